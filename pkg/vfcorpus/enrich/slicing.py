"""Def-use slicing and control-flow enclosures over the statement IR.

Slicing is flow-insensitive but ordered: a backward step reaches every earlier
statement that writes a variable the current statement reads, not only the
nearest reaching definition.
"""
import enum
import logging
from typing import Dict, Iterable, List

from ..errors import ConfigurationError
from ..structdiff import StatementSet
from ..syntax.ir import StatementIR

logger = logging.getLogger(__name__)


class EnrichmentLevel(enum.Enum):
    CF = 'cf'
    DF1 = 'df1'
    DF2 = 'df2'

    @property
    def depth(self) -> int:
        return _DEPTHS[self]

    @classmethod
    def parse(cls, value) -> 'EnrichmentLevel':
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).strip().lower())
        except ValueError:
            raise ConfigurationError('Unknown enrichment level "%s", expected one of: %s' % (
                value, ', '.join(level.value for level in cls)))


_DEPTHS = {EnrichmentLevel.CF: 0, EnrichmentLevel.DF1: 1, EnrichmentLevel.DF2: 2}


class Direction(enum.Enum):
    BACKWARD = 'backward'
    FORWARD = 'forward'


def _reaches(ir: StatementIR, current: int, direction: Direction) -> Iterable[int]:
    statement = ir[current]
    if direction is Direction.BACKWARD:
        if not statement.reads:
            return ()
        return (s.id for s in ir.statements[:current] if s.writes & statement.reads)
    if not statement.writes:
        return ()
    return (s.id for s in ir.statements[current + 1:] if s.reads & statement.writes)


def slice_depths(seed: StatementSet, ir: StatementIR, d: int, direction: Direction) -> Dict[int, int]:
    """Returns the statements reached from `seed` within `d` def-use steps.

    :param seed: the seed statements, excluded from the result
    :param ir: the statement IR the seed refers to
    :param d: maximum number of steps, 0 or more
    :param direction: backward (writers of read variables) or forward (readers of written variables)
    :return: a mapping of statement id to the smallest number of steps reaching it
    """
    if d < 0:
        raise ValueError('slice depth must be non-negative')
    visited = set(seed.ids)
    frontier = sorted(seed.ids)
    depths = {}
    for depth in range(1, d + 1):
        reached: List[int] = []
        for current in frontier:
            for other in _reaches(ir, current, direction):
                if other not in visited:
                    visited.add(other)
                    depths[other] = depth
                    reached.append(other)
        if not reached:
            break
        frontier = sorted(reached)
    return depths


def backward_slice(seed: StatementSet, ir: StatementIR, d: int) -> StatementSet:
    """Statements preceding the seed that (transitively, up to `d` steps) write what it reads."""
    return StatementSet(seed.side, frozenset(slice_depths(seed, ir, d, Direction.BACKWARD)))


def forward_slice(seed: StatementSet, ir: StatementIR, d: int) -> StatementSet:
    """Statements following the seed that (transitively, up to `d` steps) read what it writes."""
    return StatementSet(seed.side, frozenset(slice_depths(seed, ir, d, Direction.FORWARD)))


def control_flow_enclosure(seed: StatementSet, ir: StatementIR, full_chain: bool = False) -> StatementSet:
    """Returns the control headers directly enclosing the seed statements.

    :param seed: the statements to enclose
    :param ir: the statement IR the seed refers to
    :param full_chain: include every enclosing header, not only the innermost one
    """
    headers = set()
    for statement_id in seed.ids:
        chain = ir[statement_id].enclosure_chain
        if not chain:
            continue
        headers.update(chain if full_chain else chain[:1])
    return StatementSet(seed.side, frozenset(headers))
