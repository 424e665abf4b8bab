"""Token statistics of a record file: per-class token distributions and project concentration.
"""
import collections
import logging
from typing import Dict, List, Sequence

import numpy as np

from ..budget import compare_truncation, get_tokenizer
from ..corpus.snapshots import open_snapshot_provider
from ..enrich.representations import Representation
from .base import CorpusTask, write_json
from .enrich import iter_documents

__histogram_bins__ = 10
__concentration_share__ = 0.75

_CLASSES = ('change', 'header', 'context', 'message', 'total')

logger = logging.getLogger(__name__)


def distribution(values: Sequence[int], total: int) -> dict:
    """Summarizes token counts of one line class over the documents."""
    values = np.asarray(values, dtype=float)
    if not len(values):
        return {'median': 0.0, 'mean': 0.0, 'p25': 0.0, 'p75': 0.0, 'p90': 0.0, 'share': 0.0,
                'histogram': {'counts': [], 'edges': []}}
    counts, edges = np.histogram(values, bins=__histogram_bins__)
    p25, median, p75, p90 = np.percentile(values, [25, 50, 75, 90])
    return {
        'median': float(median),
        'mean': float(values.mean()),
        'p25': float(p25),
        'p75': float(p75),
        'p90': float(p90),
        'share': float(values.sum() / total) if total else 0.0,
        'histogram': {'counts': counts.tolist(), 'edges': edges.tolist()},
    }


def project_concentration(repos: Sequence[str], share: float = __concentration_share__) -> dict:
    """Counts the projects and the fewest projects covering `share` of the commits."""
    counts = sorted(collections.Counter(repos).values(), reverse=True)
    covered, needed = 0, 0
    for count in counts:
        if covered >= share * len(repos):
            break
        covered += count
        needed += 1
    return {'projects': len(counts), 'covering_share': share, 'projects_covering_share': needed}


class StatsTask(CorpusTask):
    """Reports per-class token distributions of one representation of every record.

    Commits whose representation holds no change line (binary-only or
    rename-only diffs) are left out of the accounting and counted apart.
    """

    command = 'stats'
    title = 'Stats'

    def run(self):
        config = self.config
        provider = open_snapshot_provider(config.snapshot_store)
        tokenizer = get_tokenizer(config.tokenizer)
        representation = Representation.parse(config.representation)
        per_class: Dict[str, List[int]] = {name: [] for name in _CLASSES}
        per_label: Dict[str, List[int]] = collections.defaultdict(list)
        documents, repos = [], []
        vfcs, lossy, excluded, seen = 0, 0, 0, 0
        for record_id, document, record in self.progress(iter_documents(self.inputs[0], representation, provider,
                                                                        config.full_chain)):
            seen += 1
            if record is not None:
                repos.append(record.repo)
                vfcs += record.is_vfc
                lossy += record.lossy
            counts = document.token_counts(tokenizer)
            if representation is not Representation.MESSAGE and not counts.change:
                logger.debug('%s: no change lines, left out of the token accounting' % record_id)
                excluded += 1
                continue
            for name, value in counts.as_dict().items():
                per_class[name].append(value)
            if record is not None:
                per_label[record.label.value].append(counts.total)
            if config.limits:
                documents.append(document)

        total = sum(per_class['total'])
        report = {
            'representation': representation.value,
            'tokenizer': {'name': tokenizer.name, 'mode': tokenizer.mode.value},
            'records': seen,
            'accounted': len(per_class['total']),
            'excluded_without_changes': excluded,
            'lossy': lossy,
            'classes': {name: distribution(values, total) for name, values in per_class.items()},
            'total_median_by_label': {label: float(np.median(values)) for label, values in sorted(per_label.items())},
        }
        if repos:
            report['vfc_fraction'] = vfcs / len(repos)
            report['concentration'] = project_concentration(repos)
        if config.limits:
            report['truncation'] = compare_truncation(documents, config.limits, tokenizer)
        write_json(report, self.track(self.output))
        self.counts.update(records=seen, accounted=report['accounted'], excluded=excluded)
        return report
