"""Record-file tasks: ingest, dedup and filter.
"""
import dataclasses
import json
import logging
from typing import Dict, Iterable, Iterator, List, Optional, Sequence

from ..corpus.dedup import dedup_exact, dedup_semantic
from ..corpus.filters import FilterCriteria, preset
from ..corpus.records import CommitRecord, LabelSource, SchemaViolation, ingest, iter_records, normalize_repo, \
    write_records
from ..errors import ConfigurationError, DataError, SchemaError
from ..syntax.languages import Language, parse_language
from .base import CorpusTask

__max_reported_violations__ = 100

DEDUP_MODES = ('exact', 'semantic', 'both')

logger = logging.getLogger(__name__)


def load_group_map(path: str) -> Dict[str, str]:
    """Reads a JSON object mapping repositories (any accepted form) to group ids.

    :raises ConfigurationError: when the file is not such an object
    """
    try:
        with open(path, 'r', encoding='utf-8') as fp:
            mapping = json.load(fp)
    except ValueError as e:
        raise ConfigurationError('Group map "%s" is not valid JSON: %s' % (path, e))
    if not isinstance(mapping, dict):
        raise ConfigurationError('Group map "%s" must hold a JSON object' % path)
    try:
        return {normalize_repo(str(repo)): str(group) for repo, group in mapping.items()}
    except SchemaError as e:
        raise ConfigurationError('Group map "%s": %s' % (path, e))


def read_records(path: str) -> List[CommitRecord]:
    """Loads a record file, raising on the first schema violation.

    Downstream commands expect files written by `ingest`, so a violation here is a data error.
    """
    result = ingest(path)
    if result.violations:
        raise SchemaError('%s: %d invalid line(s), first at %s' % (path, len(result.violations),
                                                                   result.violations[0]))
    return result.records


def stream_records(path: str) -> Iterator[CommitRecord]:
    for item in iter_records(path):
        if isinstance(item, SchemaViolation):
            raise SchemaError('%s: %s' % (path, item))
        yield item


def build_criteria(preset_name: Optional[str] = None, languages: Optional[Sequence[str]] = None,
                   label_sources: Optional[Sequence[str]] = None, sources: Optional[Sequence[str]] = None,
                   since: Optional[int] = None, until: Optional[int] = None, has_cve: Optional[bool] = None,
                   cwe_ids: Optional[Sequence[str]] = None) -> FilterCriteria:
    """Combines a named preset with explicit criteria; explicit values win.

    :raises ConfigurationError: on an unknown preset, language or label source
    """
    criteria = preset(preset_name) if preset_name else FilterCriteria()
    changes = {}
    if languages:
        parsed = frozenset(parse_language(lang) for lang in languages)
        if Language.OTHER in parsed:
            raise ConfigurationError('Unknown language in %s' % list(languages))
        changes['languages'] = parsed
    if label_sources:
        try:
            changes['label_sources'] = frozenset(LabelSource(s.strip().lower()) for s in label_sources)
        except ValueError as e:
            raise ConfigurationError('Invalid label source: %s' % e)
    if sources:
        changes['sources'] = frozenset(sources)
    if since is not None:
        changes['since'] = since
    if until is not None:
        changes['until'] = until
    if since is not None and until is not None and since >= until:
        raise ConfigurationError('Empty time range: since %d is not before until %d' % (since, until))
    if has_cve is not None:
        changes['has_cve'] = has_cve
    if cwe_ids:
        changes['cwe_ids'] = frozenset(c.strip().upper() for c in cwe_ids)
    return dataclasses.replace(criteria, **changes)


class IngestTask(CorpusTask):
    """Normalizes a raw record file; invalid lines are reported and skipped."""

    command = 'ingest'
    title = 'Ingest'

    def run(self):
        mapping = load_group_map(self.config.group_map) if self.config.group_map else {}
        violations = []

        def valid(items: Iterable) -> Iterator[CommitRecord]:
            for item in self.progress(items):
                if isinstance(item, SchemaViolation):
                    violations.append(item)
                    continue
                if item.repo in mapping:
                    item = item.replace(group_id=mapping[item.repo])
                yield item

        written = write_records(valid(iter_records(self.inputs[0])), self.track(self.output))
        self.counts.update(records=written, violations=len(violations))
        self.details['violations'] = [str(v) for v in violations[:__max_reported_violations__]]
        if violations:
            logger.warning('%d invalid line(s) skipped in %s' % (len(violations), self.inputs[0]))
        if not written and violations:
            raise DataError('No valid records in %s' % self.inputs[0])
        return written


class DedupTask(CorpusTask):
    """Removes exact duplicates, then semantic duplicates, as selected by `mode`."""

    command = 'dedup'
    title = 'Dedup'

    def __init__(self, *args, mode: str = 'both', **kwargs):
        super(DedupTask, self).__init__(*args, **kwargs)
        if mode not in DEDUP_MODES:
            raise ConfigurationError('Unknown dedup mode "%s", expected one of: %s' % (mode, ', '.join(DEDUP_MODES)))
        self.mode = mode

    def run(self):
        records = read_records(self.inputs[0])
        self.counts['input'] = len(records)
        if self.mode in ('exact', 'both'):
            records = dedup_exact(records)
            self.counts['after_exact'] = len(records)
        if self.mode in ('semantic', 'both'):
            records = dedup_semantic(records)
            self.counts['after_semantic'] = len(records)
        self.details['mode'] = self.mode
        self.counts['output'] = write_records(records, self.track(self.output))
        return self.counts['output']


class FilterTask(CorpusTask):
    """Keeps the records matching every criterion, streaming the input."""

    command = 'filter'
    title = 'Filter'

    def __init__(self, *args, criteria: FilterCriteria = FilterCriteria(), **kwargs):
        super(FilterTask, self).__init__(*args, **kwargs)
        self.criteria = criteria

    def run(self):
        seen = [0]

        def counted(items: Iterable[CommitRecord]) -> Iterator[CommitRecord]:
            for item in self.progress(items):
                seen[0] += 1
                yield item

        kept = (record for record in counted(stream_records(self.inputs[0])) if self.criteria.matches(record))
        written = write_records(kept, self.track(self.output))
        self.counts.update(input=seen[0], output=written)
        self.details['criteria'] = _criteria_dict(self.criteria)
        return written


def _criteria_dict(criteria: FilterCriteria) -> dict:
    data = {}
    for f in dataclasses.fields(criteria):
        value = getattr(criteria, f.name)
        if value is None:
            continue
        if isinstance(value, frozenset):
            value = sorted(getattr(v, 'value', v) for v in value)
        data[f.name] = value
    return data
