"""Split and temporal-scan tasks.
"""
import json
import logging
from typing import Dict

from ..corpus.records import apply_group_mapping
from ..corpus.splits import split_records
from ..corpus.temporal import sliding_window_scan
from ..errors import SchemaError
from .base import CorpusTask, write_json
from .records import load_group_map, read_records

logger = logging.getLogger(__name__)


class SplitTask(CorpusTask):
    """Assigns every record to train, val or test and writes the `{id, split}` table."""

    command = 'split'
    title = 'Split'

    def run(self):
        records = read_records(self.inputs[0])
        if self.config.group_map:
            records = apply_group_mapping(records, load_group_map(self.config.group_map))
        config = self.config
        assignment = split_records(records, config.strategy, config.fractions, config.seed, config.tolerance,
                                   config.vuln_ratio)
        with open(self.track(self.output), 'w', encoding='utf-8') as fp:
            for record_id, split in assignment.mapping.items():
                fp.write(json.dumps({'id': record_id, 'split': split.value}, sort_keys=True))
                fp.write('\n')
        self.counts.update(assignment.sizes())
        self.counts['input'] = len(records)
        self.counts['unassigned'] = len(records) - len(assignment.mapping)
        self.details['split'] = assignment.manifest()
        return assignment


def read_window_scores(path: str) -> Dict[int, Dict[str, float]]:
    """Reads per-window external scores.

    Accepts a JSON object keyed by window index, or a list of objects carrying
    a `window` index, each with optional `f1` and `pd_s` values.

    :raises SchemaError: on any other shape
    """
    with open(path, 'r', encoding='utf-8') as fp:
        try:
            data = json.load(fp)
        except ValueError as e:
            raise SchemaError('%s: not valid JSON: %s' % (path, e))
    try:
        if isinstance(data, dict):
            items = [(int(key), value) for key, value in data.items()]
        elif isinstance(data, list):
            items = [(int(entry['window']), entry) for entry in data]
        else:
            raise TypeError('expected an object or a list')
        return {index: {name: float(entry[name]) for name in ('f1', 'pd_s') if entry.get(name) is not None}
                for index, entry in items}
    except (KeyError, TypeError, ValueError, AttributeError) as e:
        raise SchemaError('%s: invalid window scores: %s' % (path, e))


class TemporalScanTask(CorpusTask):
    """Slides train/val/test windows over time and reports drift diagnostics per window."""

    command = 'temporal-scan'
    title = 'Temporal scan'

    def __init__(self, *args, scores: str = None, **kwargs):
        super(TemporalScanTask, self).__init__(*args, **kwargs)
        self.scores = scores
        if scores:
            self.inputs.append(scores)

    def run(self):
        records = read_records(self.inputs[0])
        scores = read_window_scores(self.scores) if self.scores else None
        diagnostics = sliding_window_scan(records, self.config.window_fracs, self.config.stride, scores)
        report = {
            'records': len(records),
            'window_fracs': list(self.config.window_fracs),
            'stride': self.config.stride,
            'windows': [d.as_dict() for d in diagnostics],
        }
        write_json(report, self.track(self.output))
        self.counts.update(records=len(records), windows=len(diagnostics))
        return report
