"""Commit records: normalization, ingestion and serialization of record files.

A record file holds one JSON object per line. Known keys map onto
`CommitRecord` fields; unknown keys are preserved in `extra` and written back.
"""
import enum
import json
import logging
import re
from dataclasses import dataclass, field, replace
from typing import Dict, FrozenSet, Iterable, Iterator, List, Optional, Union

from ..diff import decode_text
from ..errors import SchemaError
from ..syntax.languages import Language, language_for_path, parse_language

logger = logging.getLogger(__name__)

__default_host__ = 'github.com'

_SHA = re.compile(r'^[0-9a-f]{40}$')
_DIFF_PATH = re.compile(r'^(?:diff --git a/\S+ b/(\S+)|\+\+\+ b/(\S+))', re.MULTILINE)

FIELDS = ('repo', 'sha', 'timestamp', 'message', 'diff', 'label', 'label_source', 'cve_ids', 'languages',
          'group_id', 'sources')


class Label(enum.Enum):
    VFC = 'VFC'
    NON_VFC = 'NonVFC'

    @property
    def is_vfc(self) -> bool:
        return self is Label.VFC

    @classmethod
    def parse(cls, value) -> 'Label':
        if isinstance(value, cls):
            return value
        if isinstance(value, bool) or isinstance(value, int):
            return cls.VFC if value else cls.NON_VFC
        key = str(value).strip().lower().replace('-', '').replace('_', '')
        if key in ('vfc', '1', 'true', 'vulnerable', 'positive'):
            return cls.VFC
        if key in ('nonvfc', '0', 'false', 'benign', 'negative'):
            return cls.NON_VFC
        raise SchemaError('invalid label "%s"' % value)


class LabelSource(enum.Enum):
    MANUAL = 'manual'
    ADVISORY = 'advisory'
    TOOL = 'tool'
    SYNTHETIC = 'synthetic'


def normalize_repo(value: str) -> str:
    """Normalizes a repository reference to `host/owner/name`.

    URLs, scp-style remotes and bare `owner/name` references are accepted;
    the result is lowercase without a `.git` suffix.
    """
    repo = (value or '').strip().lower()
    repo = re.sub(r'^[a-z+]+://', '', repo)
    repo = re.sub(r'^[^@/]+@', '', repo)
    repo = re.sub(r'^([^/:]+):(?!\d)', r'\1/', repo)
    repo = repo.rstrip('/')
    if repo.endswith('.git'):
        repo = repo[:-4]
    parts = [part for part in repo.split('/') if part]
    if len(parts) == 2:
        parts.insert(0, __default_host__)
    if len(parts) < 3:
        raise SchemaError('invalid repository identity "%s"' % value)
    return '/'.join(parts)


def repo_name(repo: str) -> str:
    return repo.rsplit('/', 1)[-1]


def diff_languages(diff: str) -> FrozenSet[Language]:
    """Guesses the languages touched by a diff from its file paths."""
    languages = set()
    for match in _DIFF_PATH.finditer(diff or ''):
        languages.add(language_for_path(match.group(1) or match.group(2)))
    languages.discard(Language.OTHER)
    return frozenset(languages)


@dataclass(frozen=True)
class CommitRecord:
    """A normalized commit with its label and provenance."""
    repo: str
    sha: str
    label: Label
    timestamp: Optional[int] = None
    message: str = ''
    diff: str = ''
    label_source: FrozenSet[LabelSource] = frozenset()
    cve_ids: FrozenSet[str] = frozenset()
    languages: FrozenSet[Language] = frozenset()
    group_id: str = ''
    sources: FrozenSet[str] = frozenset()
    lossy: bool = False
    extra: Dict[str, object] = field(default_factory=dict, compare=False, hash=False)

    @property
    def record_id(self) -> str:
        return '%s@%s' % (self.repo, self.sha)

    @property
    def is_vfc(self) -> bool:
        return self.label.is_vfc

    def replace(self, **changes) -> 'CommitRecord':
        return replace(self, **changes)

    @classmethod
    def from_dict(cls, data: dict, lossy: bool = False) -> 'CommitRecord':
        """Builds a normalized record.

        :raises SchemaError: when a required field is missing or a value is invalid
        """
        if not isinstance(data, dict):
            raise SchemaError('record is not an object')
        for key in ('repo', 'sha', 'label'):
            if data.get(key) in (None, ''):
                raise SchemaError('missing required field "%s"' % key)
        repo = normalize_repo(str(data['repo']))
        sha = str(data['sha']).strip().lower()
        if not _SHA.match(sha):
            raise SchemaError('invalid sha "%s"' % data['sha'])
        timestamp = data.get('timestamp')
        if timestamp is not None:
            try:
                timestamp = int(timestamp)
            except (TypeError, ValueError):
                raise SchemaError('invalid timestamp "%s"' % timestamp)
        try:
            label_source = frozenset(LabelSource(str(s).lower()) for s in _as_list(data.get('label_source')))
        except ValueError as e:
            raise SchemaError('invalid label_source: %s' % e)
        diff = data.get('diff') or ''
        languages = frozenset(parse_language(str(lang)) for lang in _as_list(data.get('languages'))) \
            if data.get('languages') else diff_languages(diff)
        return cls(
            repo=repo,
            sha=sha,
            label=Label.parse(data['label']),
            timestamp=timestamp,
            message=data.get('message') or '',
            diff=diff,
            label_source=label_source,
            cve_ids=frozenset(str(c).strip().upper() for c in _as_list(data.get('cve_ids')) if str(c).strip()),
            languages=languages,
            group_id=str(data.get('group_id') or repo_name(repo)),
            sources=frozenset(str(s) for s in _as_list(data.get('sources'))),
            lossy=bool(lossy or data.get('lossy', False)),
            extra={k: v for k, v in data.items() if k not in FIELDS and k != 'lossy'})

    def to_dict(self) -> dict:
        data = dict(self.extra)
        data.update({
            'repo': self.repo,
            'sha': self.sha,
            'timestamp': self.timestamp,
            'message': self.message,
            'diff': self.diff,
            'label': self.label.value,
            'label_source': sorted(s.value for s in self.label_source),
            'cve_ids': sorted(self.cve_ids),
            'languages': sorted(lang.value for lang in self.languages),
            'group_id': self.group_id,
            'sources': sorted(self.sources),
        })
        if self.lossy:
            data['lossy'] = True
        return data


def _as_list(value) -> list:
    if value is None:
        return []
    if isinstance(value, (list, tuple, set, frozenset)):
        return list(value)
    return [value]


@dataclass(frozen=True)
class SchemaViolation:
    lineno: int
    message: str

    def __str__(self):
        return 'line %d: %s' % (self.lineno, self.message)


@dataclass
class IngestResult:
    records: List[CommitRecord] = field(default_factory=list)
    violations: List[SchemaViolation] = field(default_factory=list)

    def __iter__(self):
        return iter(self.records)

    def __len__(self):
        return len(self.records)


def iter_records(path: str) -> Iterator[Union[CommitRecord, SchemaViolation]]:
    """Streams a record file, yielding a record or a violation per non-blank line.

    :param path: path of the line-delimited record file
    :raises OSError: when the file cannot be read
    """
    with open(path, 'rb') as f:
        for lineno, raw in enumerate(f, start=1):
            if not raw.strip():
                continue
            text, lossy = decode_text(raw)
            try:
                yield CommitRecord.from_dict(json.loads(text), lossy=lossy)
            except (ValueError, SchemaError) as e:
                violation = SchemaViolation(lineno, str(e))
                logger.warning('%s: %s' % (path, violation))
                yield violation


def ingest(path: str) -> IngestResult:
    """Reads and normalizes a record file.

    Invalid lines are reported as violations and skipped; blank lines are ignored.

    :param path: path of the line-delimited record file
    :raises OSError: when the file cannot be read
    """
    result = IngestResult()
    for item in iter_records(path):
        if isinstance(item, SchemaViolation):
            result.violations.append(item)
        else:
            result.records.append(item)
    logger.debug('Ingested %d records from %s (%d violations)' % (len(result.records), path,
                                                                  len(result.violations)))
    return result


def write_records(records: Iterable[CommitRecord], path: str) -> int:
    """Writes records as a line-delimited record file; returns the number written."""
    count = 0
    with open(path, 'w', encoding='utf-8') as f:
        for record in records:
            f.write(json.dumps(record.to_dict(), sort_keys=True, ensure_ascii=False))
            f.write('\n')
            count += 1
    return count


def apply_group_mapping(records: Iterable[CommitRecord], mapping: Dict[str, str]) -> List[CommitRecord]:
    """Reassigns group ids from a mapping of repository (any accepted form) to group.

    Used to fold forks and mirrors into their upstream's group.
    """
    normalized = {normalize_repo(repo): group for repo, group in mapping.items()}
    return [record.replace(group_id=normalized[record.repo]) if record.repo in normalized else record
            for record in records]
