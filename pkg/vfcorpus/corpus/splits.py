"""Train/validation/test split strategies.

Every strategy is a pure function of its inputs and seed. The assignment
reports the achieved fractions and vulnerability ratios next to the targets.
"""
import enum
import logging
import math
from collections import OrderedDict
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from ..errors import ConfigurationError, SplitError
from .records import CommitRecord

logger = logging.getLogger(__name__)

__default_fractions__ = (0.6, 0.2, 0.2)
__default_tolerance__ = 0.02


class Split(enum.Enum):
    TRAIN = 'train'
    VAL = 'val'
    TEST = 'test'


SPLITS = (Split.TRAIN, Split.VAL, Split.TEST)


class SplitStrategy(enum.Enum):
    RANDOM = 'random'
    TEMPORAL = 'temporal'
    GROUP = 'group'
    CVE = 'cve'


@dataclass
class SplitAssignment:
    """Record id to split mapping with its manifest data."""
    strategy: SplitStrategy
    seed: Optional[int]
    fractions: Tuple[float, float, float]
    mapping: Dict[str, Split] = field(default_factory=OrderedDict)
    achieved_fractions: Dict[str, float] = field(default_factory=dict)
    vuln_ratios: Dict[str, float] = field(default_factory=dict)
    warnings: List[str] = field(default_factory=list)

    def members(self, split: Split) -> List[str]:
        return [record_id for record_id, s in self.mapping.items() if s is split]

    def sizes(self) -> Dict[str, int]:
        counts = {s.value: 0 for s in SPLITS}
        for s in self.mapping.values():
            counts[s.value] += 1
        return counts

    def manifest(self) -> dict:
        return {
            'strategy': self.strategy.value,
            'seed': self.seed,
            'fractions': list(self.fractions),
            'sizes': self.sizes(),
            'achieved_fractions': self.achieved_fractions,
            'vuln_ratios': self.vuln_ratios,
            'warnings': list(self.warnings),
        }


def validate_fractions(fractions: Sequence[float]) -> Tuple[float, float, float]:
    """Checks that three positive fractions sum to 1.

    :raises ConfigurationError: otherwise
    """
    fractions = tuple(float(f) for f in fractions)
    if len(fractions) != 3 or any(f <= 0 for f in fractions) or abs(sum(fractions) - 1.0) > 1e-9:
        raise ConfigurationError('Split fractions must be three positive numbers summing to 1, got %s' % (
            list(fractions),))
    return fractions


def allocate(total: int, fractions: Sequence[float]) -> List[int]:
    """Splits `total` into integer parts by the largest-remainder method (ties to the earlier part)."""
    raw = [total * f for f in fractions]
    parts = [int(math.floor(r + 1e-9)) for r in raw]
    order = sorted(range(len(raw)), key=lambda i: (-(raw[i] - parts[i]), i))
    for i in order[:total - sum(parts)]:
        parts[i] += 1
    return parts


def _finish(assignment: SplitAssignment, records: Sequence[CommitRecord], tolerance: float,
            check_ratio: bool = True) -> SplitAssignment:
    by_id = {r.record_id: r for r in records}
    total = len(assignment.mapping)
    global_ratio = sum(1 for r in records if r.is_vfc) / len(records)
    for split in SPLITS:
        members = assignment.members(split)
        assignment.achieved_fractions[split.value] = len(members) / total if total else 0.0
        vfc = sum(1 for m in members if by_id[m].is_vfc)
        ratio = vfc / len(members) if members else 0.0
        assignment.vuln_ratios[split.value] = ratio
        target = assignment.fractions[SPLITS.index(split)]
        if abs(assignment.achieved_fractions[split.value] - target) > tolerance:
            assignment.warnings.append('%s holds %.3f of the records, target %.3f' % (
                split.value, assignment.achieved_fractions[split.value], target))
        if check_ratio and members and abs(ratio - global_ratio) > tolerance:
            assignment.warnings.append('%s vulnerability ratio %.3f deviates from the global %.3f' % (
                split.value, ratio, global_ratio))
    assignment.vuln_ratios['global'] = global_ratio
    for warning in assignment.warnings:
        logger.warning('%s split: %s' % (assignment.strategy.value, warning))
    return assignment


def _check_size(records: Sequence[CommitRecord]) -> None:
    if len(records) < 3:
        raise SplitError('At least 3 records are needed for a split, got %d' % len(records))
    ids = {r.record_id for r in records}
    if len(ids) != len(records):
        raise SplitError('Record ids are not unique; deduplicate before splitting')


def split_random(records: Sequence[CommitRecord], fractions=__default_fractions__, seed: int = 0,
                 tolerance: float = __default_tolerance__) -> SplitAssignment:
    """Seeded, label-stratified random split.

    Each label class is shuffled and cut so that split sizes follow `fractions`
    and the vulnerability ratio of each split tracks the global ratio.
    """
    fractions = validate_fractions(fractions)
    records = list(records)
    _check_size(records)
    sizes = allocate(len(records), fractions)
    vfc = [i for i, r in enumerate(records) if r.is_vfc]
    benign = [i for i, r in enumerate(records) if not r.is_vfc]
    vfc_sizes = allocate(len(vfc), fractions)
    # keep every split within its overall size
    for k in range(3):
        while vfc_sizes[k] > sizes[k]:
            vfc_sizes[k] -= 1
            spare = min((j for j in range(3) if vfc_sizes[j] < sizes[j]), key=lambda j: vfc_sizes[j] - sizes[j])
            vfc_sizes[spare] += 1
    benign_sizes = [sizes[k] - vfc_sizes[k] for k in range(3)]

    rng = np.random.default_rng(seed)
    assignment = SplitAssignment(SplitStrategy.RANDOM, seed, fractions)
    placed: Dict[int, Split] = {}
    for members, parts in ((vfc, vfc_sizes), (benign, benign_sizes)):
        order = [members[i] for i in rng.permutation(len(members))]
        start = 0
        for split, size in zip(SPLITS, parts):
            for index in order[start:start + size]:
                placed[index] = split
            start += size
    for index, record in enumerate(records):
        assignment.mapping[record.record_id] = placed[index]
    return _finish(assignment, records, tolerance, check_ratio=len(records) >= 500)


def split_temporal(records: Sequence[CommitRecord], fractions=__default_fractions__,
                   tolerance: float = __default_tolerance__) -> SplitAssignment:
    """Chronological split: earliest records train, latest test; ties broken by sha."""
    fractions = validate_fractions(fractions)
    records = list(records)
    _check_size(records)
    missing = [r.record_id for r in records if r.timestamp is None]
    if missing:
        raise SplitError('%d records have no timestamp (first: %s)' % (len(missing), missing[0]))
    ordered = sorted(records, key=lambda r: (r.timestamp, r.sha, r.repo))
    assignment = SplitAssignment(SplitStrategy.TEMPORAL, None, fractions)
    start = 0
    for split, size in zip(SPLITS, allocate(len(ordered), fractions)):
        for record in ordered[start:start + size]:
            assignment.mapping[record.record_id] = split
        start += size
    return _finish(assignment, records, tolerance, check_ratio=False)


class _Bipartition(object):
    """Assigns whole groups to a side A (share `share` of the records) or side B.

    Side A always keeps at least one group and side B at least `min_b`.
    """

    def __init__(self, sizes: np.ndarray, vulns: np.ndarray, share: float, order: np.ndarray, min_b: int = 1):
        self.sizes = sizes
        self.min_b = min_b
        self.vulns = vulns
        self.share = share
        self.order = order
        self.total = float(sizes.sum())
        self.ratio = float(vulns.sum()) / self.total
        self.in_a = np.zeros(len(sizes), dtype=bool)

    def objective(self, size_a, vuln_a):
        size_a = np.asarray(size_a, dtype=float)
        with np.errstate(divide='ignore', invalid='ignore'):
            ratio_a = np.where(size_a > 0, np.asarray(vuln_a, dtype=float) / np.maximum(size_a, 1), 0.0)
        return np.abs(size_a / self.total - self.share) + np.abs(ratio_a - self.ratio)

    def greedy(self) -> None:
        target_a = self.share * self.total
        target_b = self.total - target_a
        size_a = size_b = 0.0
        for g in self.order:
            deficit_a, deficit_b = target_a - size_a, target_b - size_b
            if deficit_a > deficit_b or (deficit_a == deficit_b and target_a > target_b):
                self.in_a[g] = True
                size_a += self.sizes[g]
            else:
                size_b += self.sizes[g]
        self._ensure_nonempty()

    def _ensure_nonempty(self) -> None:
        if not self.in_a.any():
            self.in_a[self.order[-1]] = True
        if self.in_a.all():
            self.in_a[self.order[0]] = False
        # smallest groups of A go back to B until B holds enough of them
        for g in self.order[::-1]:
            if len(self.sizes) - int(self.in_a.sum()) >= self.min_b or int(self.in_a.sum()) <= 1:
                break
            if self.in_a[g]:
                self.in_a[g] = False

    def local_search(self, max_rounds: int = 10000) -> None:
        """Applies the best improving single-group move or pairwise swap until none is left."""
        for _ in range(max_rounds):
            size_a = float(self.sizes[self.in_a].sum())
            vuln_a = float(self.vulns[self.in_a].sum())
            current = float(self.objective(size_a, vuln_a))
            count_a = int(self.in_a.sum())
            count_b = len(self.sizes) - count_a

            sign = np.where(self.in_a, -1.0, 1.0)
            moved = self.objective(size_a + sign * self.sizes, vuln_a + sign * self.vulns)
            # a move must not empty A nor shrink B below its minimum
            moved = np.where(self.in_a & (count_a <= 1), np.inf, moved)
            moved = np.where(~self.in_a & (count_b <= self.min_b), np.inf, moved)
            best_move = int(np.argmin(moved))
            if moved[best_move] < current - 1e-12:
                self.in_a[best_move] = not self.in_a[best_move]
                continue

            members_a, members_b = np.flatnonzero(self.in_a), np.flatnonzero(~self.in_a)
            if not len(members_a) or not len(members_b):
                break
            swap_size = size_a - self.sizes[members_a][:, None] + self.sizes[members_b][None, :]
            swap_vuln = vuln_a - self.vulns[members_a][:, None] + self.vulns[members_b][None, :]
            swapped = self.objective(swap_size, swap_vuln)
            best = int(np.argmin(swapped))
            i, j = divmod(best, len(members_b))
            if swapped[i, j] < current - 1e-12:
                self.in_a[members_a[i]] = False
                self.in_a[members_b[j]] = True
                continue
            break


def _group_summary(records: Sequence[CommitRecord]) -> Tuple[List[str], np.ndarray, np.ndarray]:
    groups: Dict[str, List[int]] = OrderedDict()
    for record in records:
        counts = groups.setdefault(record.group_id, [0, 0])
        counts[0] += 1
        counts[1] += 1 if record.is_vfc else 0
    names = sorted(groups)
    sizes = np.array([groups[name][0] for name in names], dtype=float)
    vulns = np.array([groups[name][1] for name in names], dtype=float)
    return names, sizes, vulns


def _bipartition(sizes: np.ndarray, vulns: np.ndarray, share: float, rng: np.random.Generator,
                 min_b: int = 1) -> np.ndarray:
    tie_order = rng.permutation(len(sizes))
    order = tie_order[np.argsort(-sizes[tie_order], kind='stable')]
    part = _Bipartition(sizes, vulns, share, order, min_b)
    part.greedy()
    part.local_search()
    return part.in_a


def split_group_stratified(records: Sequence[CommitRecord], fractions=__default_fractions__, seed: int = 0,
                           tolerance: float = __default_tolerance__) -> SplitAssignment:
    """Group-stratified split: no group spans two splits.

    Stage one separates the test groups from the rest, stage two splits the rest
    into train and validation. Each stage assigns groups greedily, largest first,
    to the side with the larger remaining deficit, then refines the assignment
    by local search over moves and swaps. Stage one leaves at least two groups
    outside test so that train and validation each get one.

    :raises SplitError: with fewer than 3 groups
    """
    fractions = validate_fractions(fractions)
    records = list(records)
    _check_size(records)
    names, sizes, vulns = _group_summary(records)
    if len(names) < 3:
        raise SplitError('Insufficient groups for a group split: %d (at least 3 are needed)' % len(names))
    rng = np.random.default_rng(seed)

    in_test = _bipartition(sizes, vulns, fractions[2], rng, min_b=2)
    rest = np.flatnonzero(~in_test)
    val_share = fractions[1] / (fractions[0] + fractions[1])
    in_val = _bipartition(sizes[rest], vulns[rest], val_share, rng)

    group_split = {}
    for index, name in enumerate(names):
        group_split[name] = Split.TEST if in_test[index] else Split.TRAIN
    for position, index in enumerate(rest):
        if in_val[position]:
            group_split[names[index]] = Split.VAL

    assignment = SplitAssignment(SplitStrategy.GROUP, seed, fractions)
    for record in records:
        assignment.mapping[record.record_id] = group_split[record.group_id]
    return _finish(assignment, records, tolerance)


def split_cve(records: Sequence[CommitRecord], fractions=__default_fractions__, seed: int = 0,
              vuln_ratio: Optional[float] = None, tolerance: float = __default_tolerance__) -> SplitAssignment:
    """CVE-held-out split.

    CVE-mapped VFCs never reach train; ordered by sha they alternate between
    validation and test. Benign records are then added to both so that each
    holds `vuln_ratio` VFCs (the corpus' global ratio by default); all other
    records train.

    :raises SplitError: with fewer than 2 CVE-mapped VFCs
    """
    fractions = validate_fractions(fractions)
    records = list(records)
    _check_size(records)
    held_out = sorted((r for r in records if r.is_vfc and r.cve_ids), key=lambda r: (r.sha, r.repo))
    if not held_out:
        raise SplitError('No CVE-mapped VFC records to hold out')
    if len(held_out) < 2:
        raise SplitError('At least 2 CVE-mapped VFC records are needed, got %d' % len(held_out))
    if vuln_ratio is None:
        vuln_ratio = sum(1 for r in records if r.is_vfc) / len(records)
    if not 0 < vuln_ratio <= 1:
        raise ConfigurationError('Vulnerability ratio must be in (0, 1], got %s' % vuln_ratio)

    assignment = SplitAssignment(SplitStrategy.CVE, seed, fractions)
    placed: Dict[str, Split] = {}
    for index, record in enumerate(held_out):
        placed[record.record_id] = Split.VAL if index % 2 == 0 else Split.TEST

    benign = [r for r in records if not r.is_vfc]
    rng = np.random.default_rng(seed)
    shuffled = [benign[i] for i in rng.permutation(len(benign))]
    start = 0
    for split in (Split.VAL, Split.TEST):
        vfc_count = sum(1 for s in placed.values() if s is split)
        wanted = int(round(vfc_count * (1.0 - vuln_ratio) / vuln_ratio))
        chosen = shuffled[start:start + wanted]
        if len(chosen) < wanted:
            assignment.warnings.append('%s received %d benign records, %d wanted' % (split.value, len(chosen),
                                                                                    wanted))
        for record in chosen:
            placed[record.record_id] = split
        start += len(chosen)

    for record in records:
        assignment.mapping[record.record_id] = placed.get(record.record_id, Split.TRAIN)
    _finish(assignment, records, 1.0, check_ratio=False)
    for split in (Split.VAL, Split.TEST):
        ratio = assignment.vuln_ratios[split.value]
        if abs(ratio - vuln_ratio) > tolerance:
            message = '%s vulnerability ratio %.3f misses the target %.3f' % (split.value, ratio, vuln_ratio)
            logger.warning('cve split: %s' % message)
            assignment.warnings.append(message)
    assignment.vuln_ratios['target'] = vuln_ratio
    return assignment


def split_records(records: Sequence[CommitRecord], strategy, fractions=__default_fractions__, seed: int = 0,
                  tolerance: float = __default_tolerance__, vuln_ratio: Optional[float] = None) -> SplitAssignment:
    """Dispatches to the split strategy named by `strategy`."""
    try:
        strategy = SplitStrategy(strategy.value if isinstance(strategy, SplitStrategy) else strategy)
    except ValueError:
        raise ConfigurationError('Unknown split strategy "%s"' % strategy)
    if strategy is SplitStrategy.RANDOM:
        return split_random(records, fractions, seed, tolerance)
    if strategy is SplitStrategy.TEMPORAL:
        return split_temporal(records, fractions, tolerance)
    if strategy is SplitStrategy.GROUP:
        return split_group_stratified(records, fractions, seed, tolerance)
    return split_cve(records, fractions, seed, vuln_ratio, tolerance)
