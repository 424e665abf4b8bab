"""Sliding-window temporal diagnostics and the Jensen-Shannon divergence.
"""
import logging
import math
from collections import Counter
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.spatial.distance import jensenshannon

from ..errors import ConfigurationError, InvalidDistributionError, SplitError
from .records import CommitRecord

logger = logging.getLogger(__name__)

__default_windows__ = (0.2, 0.2, 0.2)
__default_stride__ = 0.05


def js_divergence(p: Sequence[float], q: Sequence[float]) -> float:
    """Jensen-Shannon divergence with base-2 logarithms, in [0, 1].

    :raises InvalidDistributionError: unless `p` and `q` are non-negative, of equal
        length and each sum to 1 within 1e-9
    """
    p, q = np.asarray(p, dtype=float), np.asarray(q, dtype=float)
    if p.ndim != 1 or p.shape != q.shape or not len(p):
        raise InvalidDistributionError('Distributions must be non-empty vectors over the same support')
    for name, dist in (('p', p), ('q', q)):
        if not np.all(np.isfinite(dist)) or np.any(dist < 0):
            raise InvalidDistributionError('%s has negative or non-finite probabilities' % name)
        if abs(dist.sum() - 1.0) > 1e-9:
            raise InvalidDistributionError('%s sums to %r, not 1' % (name, float(dist.sum())))
    # scipy returns the distance, the square root of the divergence
    distance = float(jensenshannon(p, q, base=2))
    if math.isnan(distance):
        return 0.0
    return min(1.0, max(0.0, distance * distance))


def project_distributions(first: Sequence[str], second: Sequence[str]) -> Tuple[np.ndarray, np.ndarray]:
    """Returns the project frequency vectors of two samples over their joint support."""
    a, b = Counter(first), Counter(second)
    support = sorted(set(a) | set(b))
    p = np.array([a[name] for name in support], dtype=float)
    q = np.array([b[name] for name in support], dtype=float)
    return p / p.sum(), q / q.sum()


@dataclass
class WindowDiagnostics:
    """Diagnostics of one sliding window; ranges are half-open indexes into the time order."""
    index: int
    offset: float
    train: Tuple[int, int]
    val: Tuple[int, int]
    test: Tuple[int, int]
    jsd: float
    unseen_project_fraction: float
    test_vuln_rate: float
    test_f1: Optional[float] = None
    test_pd_s: Optional[float] = None

    def as_dict(self) -> dict:
        return {
            'index': self.index,
            'offset': round(self.offset, 10),
            'train': list(self.train),
            'val': list(self.val),
            'test': list(self.test),
            'jsd': self.jsd,
            'unseen_project_fraction': self.unseen_project_fraction,
            'test_vuln_rate': self.test_vuln_rate,
            'test_f1': self.test_f1,
            'test_pd_s': self.test_pd_s,
        }


def window_offsets(window_fracs: Sequence[float], stride: float) -> List[float]:
    """Returns the offsets 0, stride, 2 stride, ... at which all windows fit."""
    total = float(sum(window_fracs))
    if len(window_fracs) != 3 or any(f <= 0 for f in window_fracs) or total > 1.0 + 1e-9:
        raise ConfigurationError('Window fractions must be three positive numbers summing to at most 1')
    if stride <= 0:
        raise ConfigurationError('Stride must be positive')
    count = int(math.floor((1.0 - total) / stride + 1e-9)) + 1
    return [k * stride for k in range(count)]


def _bound(fraction: float, n: int) -> int:
    return min(n, int(math.floor(fraction * n + 1e-9)))


def sliding_window_scan(records: Sequence[CommitRecord], window_fracs=__default_windows__,
                        stride: float = __default_stride__,
                        scores: Optional[Dict[int, Dict[str, float]]] = None) -> List[WindowDiagnostics]:
    """Slides train/val/test windows over the chronologically ordered records.

    :param records: timestamped records
    :param window_fracs: train, validation and test window fractions
    :param stride: offset step as a fraction of the corpus
    :param scores: optional externally computed `{window index: {"f1": ..., "pd_s": ...}}`
    :raises SplitError: on an empty corpus or records without timestamps
    """
    records = list(records)
    if not records:
        raise SplitError('Cannot scan an empty corpus')
    if any(r.timestamp is None for r in records):
        raise SplitError('Every record needs a timestamp for a temporal scan')
    offsets = window_offsets(window_fracs, stride)
    ordered = sorted(records, key=lambda r: (r.timestamp, r.sha, r.repo))
    n = len(ordered)
    scores = scores or {}
    diagnostics = []
    for index, offset in enumerate(offsets):
        cuts = [offset, offset + window_fracs[0], offset + window_fracs[0] + window_fracs[1],
                offset + sum(window_fracs)]
        bounds = [_bound(c, n) for c in cuts]
        train = ordered[bounds[0]:bounds[1]]
        test = ordered[bounds[2]:bounds[3]]
        train_projects = [r.repo for r in train]
        test_projects = [r.repo for r in test]
        if train and test:
            jsd = js_divergence(*project_distributions(train_projects, test_projects))
        else:
            jsd = 0.0
        seen = set(train_projects)
        unseen = sum(1 for p in test_projects if p not in seen) / len(test) if test else 0.0
        vuln_rate = sum(1 for r in test if r.is_vfc) / len(test) if test else 0.0
        external = scores.get(index, {})
        diagnostics.append(WindowDiagnostics(
            index=index, offset=offset, train=(bounds[0], bounds[1]), val=(bounds[1], bounds[2]),
            test=(bounds[2], bounds[3]), jsd=jsd, unseen_project_fraction=unseen, test_vuln_rate=vuln_rate,
            test_f1=external.get('f1'), test_pd_s=external.get('pd_s')))
        logger.debug('window %d at %.2f: jsd %.4f unseen %.3f' % (index, offset, jsd, unseen))
    return diagnostics
