"""Conjunctive record filters and dataset composition presets.
"""
import logging
from dataclasses import dataclass
from typing import FrozenSet, Iterable, List, Optional

from ..errors import ConfigurationError
from ..syntax.languages import Language
from .records import CommitRecord, LabelSource

logger = logging.getLogger(__name__)

C_FAMILY = frozenset([Language.C, Language.CPP])


@dataclass(frozen=True)
class FilterCriteria:
    """Filter criteria; unset criteria accept every record.

    Set-valued criteria match when the record shares at least one member;
    the time range is `since <= timestamp < until`.
    """
    languages: Optional[FrozenSet[Language]] = None
    label_sources: Optional[FrozenSet[LabelSource]] = None
    sources: Optional[FrozenSet[str]] = None
    since: Optional[int] = None
    until: Optional[int] = None
    has_cve: Optional[bool] = None
    cwe_ids: Optional[FrozenSet[str]] = None

    @property
    def is_empty(self) -> bool:
        return all(getattr(self, name) is None for name in self.__dataclass_fields__)

    def matches(self, record: CommitRecord) -> bool:
        if self.languages is not None and not (record.languages & self.languages):
            return False
        if self.label_sources is not None and not (record.label_source & self.label_sources):
            return False
        if self.sources is not None and not (record.sources & self.sources):
            return False
        if self.since is not None or self.until is not None:
            if record.timestamp is None:
                return False
            if self.since is not None and record.timestamp < self.since:
                return False
            if self.until is not None and record.timestamp >= self.until:
                return False
        if self.has_cve is not None and bool(record.cve_ids) != self.has_cve:
            return False
        if self.cwe_ids is not None:
            cwes = record.extra.get('cwe_ids') or []
            if isinstance(cwes, str):
                cwes = [cwes]
            if not ({str(c).upper() for c in cwes} & self.cwe_ids):
                return False
        return True


PRESETS = {
    'manual-c-cpp': FilterCriteria(languages=C_FAMILY, label_sources=frozenset([LabelSource.MANUAL])),
    'advisory-c-cpp': FilterCriteria(languages=C_FAMILY,
                                     label_sources=frozenset([LabelSource.MANUAL, LabelSource.ADVISORY])),
    'all-c-cpp': FilterCriteria(languages=C_FAMILY),
    'all': FilterCriteria(),
}


def preset(name: str) -> FilterCriteria:
    try:
        return PRESETS[name]
    except KeyError:
        raise ConfigurationError('Unknown filter preset "%s", expected one of: %s' % (
            name, ', '.join(sorted(PRESETS))))


def filter_records(records: Iterable[CommitRecord], criteria: FilterCriteria) -> List[CommitRecord]:
    """Returns the records matching every criterion, in input order."""
    return [record for record in records if criteria.matches(record)]
