from .dedup import dedup_exact, dedup_semantic, fingerprint
from .filters import FilterCriteria, PRESETS, filter_records, preset
from .records import CommitRecord, IngestResult, Label, LabelSource, SchemaViolation, apply_group_mapping, ingest, \
    iter_records, normalize_repo, write_records
from .snapshots import FileCacheSnapshotProvider, LocalGitSnapshotProvider, SnapshotProvider, StaticSnapshots, \
    open_snapshot_provider
from .splits import Split, SplitAssignment, SplitStrategy, split_cve, split_group_stratified, split_random, \
    split_records, split_temporal
from .temporal import WindowDiagnostics, js_divergence, sliding_window_scan
