"""Exact and semantic deduplication of commit records.
"""
import hashlib
import logging
import re
from collections import OrderedDict
from typing import Dict, Iterable, List, Tuple

from .records import CommitRecord

logger = logging.getLogger(__name__)

_HEADER_NOISE = re.compile(r'^(?:index [0-9a-fA-F]+\.\.[0-9a-fA-F]+.*|(?:From|commit) [0-9a-fA-F]{7,40}\b.*|'
                           r'similarity index .*|dissimilarity index .*)$')
_PATHS = re.compile(r'^(?:---|\+\+\+) (?:[ab]/)?(\S+)', re.MULTILINE)
_WHITESPACE = re.compile(r'\s+')


def _merge(group: List[CommitRecord]) -> CommitRecord:
    first = group[0]
    extra = {}
    for record in reversed(group):
        extra.update(record.extra)
    return first.replace(
        sources=frozenset().union(*(r.sources for r in group)),
        label_source=frozenset().union(*(r.label_source for r in group)),
        cve_ids=frozenset().union(*(r.cve_ids for r in group)),
        languages=frozenset().union(*(r.languages for r in group)),
        lossy=any(r.lossy for r in group),
        extra=extra)


def dedup_exact(records: Iterable[CommitRecord]) -> List[CommitRecord]:
    """Merges records sharing `(repo, sha)`.

    Sources, label sources and CVE ids are unioned. Groups whose labels
    disagree are dropped entirely. Output follows first-occurrence order.
    """
    groups: Dict[Tuple[str, str], List[CommitRecord]] = OrderedDict()
    for record in records:
        groups.setdefault((record.repo, record.sha), []).append(record)
    result = []
    for key, group in groups.items():
        if len({r.label for r in group}) > 1:
            logger.warning('Dropping %d records of %s@%s: labels disagree' % (len(group), key[0], key[1]))
            continue
        result.append(_merge(group) if len(group) > 1 else group[0])
    return result


def fingerprint(record: CommitRecord) -> str:
    """Hashes a record's modified paths and its normalized diff body.

    Index and commit-id header lines are removed and whitespace runs collapsed,
    so that mirrors of the same patch share a fingerprint.
    """
    paths = sorted({path for path in _PATHS.findall(record.diff) if path != '/dev/null'})
    body = '\n'.join(line for line in record.diff.splitlines() if not _HEADER_NOISE.match(line))
    body = _WHITESPACE.sub(' ', body).strip()
    digest = hashlib.sha256()
    digest.update('\0'.join(paths).encode('utf-8'))
    digest.update(b'\n')
    digest.update(body.encode('utf-8'))
    return digest.hexdigest()


def _survivor_key(record: CommitRecord):
    return -len(record.cve_ids), -len(record.sources), record.repo, record.sha


def dedup_semantic(records: Iterable[CommitRecord]) -> List[CommitRecord]:
    """Keeps one record per diff fingerprint.

    The survivor has the most CVE ids, then the most sources, then the
    smallest repository identity; it takes the position of the first member.
    Records with an empty diff are never merged.
    """
    records = list(records)
    classes: Dict[str, List[int]] = OrderedDict()
    for index, record in enumerate(records):
        if record.diff.strip():
            classes.setdefault(fingerprint(record), []).append(index)
    survivors = {}
    dropped = set()
    for members in classes.values():
        best = min(members, key=lambda i: _survivor_key(records[i]))
        survivors[members[0]] = best
        dropped.update(i for i in members if i != members[0])
        if len(members) > 1:
            logger.debug('Keeping %s over %d semantic duplicates' % (records[best].record_id, len(members) - 1))
    result = []
    for index, record in enumerate(records):
        if index in survivors:
            result.append(records[survivors[index]])
        elif index not in dropped:
            result.append(record)
    return result
