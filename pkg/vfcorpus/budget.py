"""Tokenizers, per-class token accounting and token-budget truncation.
"""
import bisect
import enum
import logging
import math
import re
from dataclasses import dataclass, field, replace
from typing import Callable, Dict, Iterable, List, Optional, Sequence, Tuple, Union

from .diff import CommitDiff, LineClass, TokenCounts, diff_lines
from .errors import ConfigurationError

logger = logging.getLogger(__name__)

_PRETOKEN = re.compile(r'\w+|[^\w\s]')


class TokenizerMode(enum.Enum):
    BUILTIN = 'builtin-approx'
    VOCAB = 'external-vocab'


class Tokenizer(object):
    """Model-agnostic approximate tokenizer.

    Text is split on whitespace and every punctuation or operator character
    becomes a token of its own.
    """

    mode = TokenizerMode.BUILTIN

    def __init__(self, name: str = 'builtin'):
        self.name = name

    def _word_spans(self, word: str, offset: int) -> List[Tuple[int, int]]:
        return [(offset, offset + len(word))]

    def spans(self, text: str) -> List[Tuple[int, int]]:
        """Returns the (start, end) character offsets of each token."""
        spans = []
        for match in _PRETOKEN.finditer(text):
            spans.extend(self._word_spans(match.group(0), match.start()))
        return spans

    def tokenize(self, text: str) -> List[str]:
        return [text[start:end] for start, end in self.spans(text)]

    def count(self, text: str) -> int:
        if not text:
            return 0
        return len(self.spans(text))

    def prefix(self, text: str, n: int) -> str:
        """Returns the shortest prefix of `text` holding its first `n` tokens."""
        if n <= 0:
            return ''
        spans = self.spans(text)
        if n >= len(spans):
            return text
        return text[:spans[n - 1][1]]

    def __repr__(self):
        return '%s(name=%r, mode=%s)' % (type(self).__name__, self.name, self.mode.value)


class VocabTokenizer(Tokenizer):
    """Greedy longest-match subword tokenizer over an external vocabulary.

    Continuation pieces may be listed with a leading `##`. Characters that no
    vocabulary entry covers become single-character tokens.
    """

    mode = TokenizerMode.VOCAB

    def __init__(self, name: str, vocabulary: Iterable[str]):
        super(VocabTokenizer, self).__init__(name)
        self.vocabulary = frozenset(vocabulary)
        self.max_piece = max((len(piece) for piece in self.vocabulary), default=1)

    def _word_spans(self, word: str, offset: int) -> List[Tuple[int, int]]:
        spans = []
        start = 0
        while start < len(word):
            end = min(len(word), start + self.max_piece)
            while end > start + 1:
                piece = word[start:end]
                if piece in self.vocabulary or (start and '##' + piece in self.vocabulary):
                    break
                end -= 1
            spans.append((offset + start, offset + end))
            start = end
        return spans


_REGISTRY: Dict[str, Callable[[], Tokenizer]] = {}


def register_tokenizer(name: str, factory: Callable[[], Tokenizer]) -> None:
    """Registers a tokenizer factory under `name`."""
    _REGISTRY[name] = factory


def load_vocab_tokenizer(path: str) -> VocabTokenizer:
    """Loads a vocabulary file with one token per line.

    :raises ConfigurationError: when the file cannot be read
    """
    try:
        with open(path, encoding='utf-8') as fp:
            vocabulary = [line.rstrip('\n') for line in fp if line.rstrip('\n')]
    except (OSError, UnicodeDecodeError) as e:
        raise ConfigurationError('Unable to read vocabulary file "%s": %s' % (path, e))
    logger.debug('Loaded %d vocabulary entries from %s' % (len(vocabulary), path))
    return VocabTokenizer('vocab:%s' % path, vocabulary)


def get_tokenizer(spec: Union[str, Tokenizer, None] = 'builtin') -> Tokenizer:
    """Resolves a tokenizer reference.

    :param spec: a registered name, `vocab:<path>`, or a `Tokenizer`
    :raises ConfigurationError: for unknown names or unreadable vocabularies
    """
    if isinstance(spec, Tokenizer):
        return spec
    spec = spec or 'builtin'
    if spec.startswith('vocab:'):
        return load_vocab_tokenizer(spec[len('vocab:'):])
    factory = _REGISTRY.get(spec)
    if factory is None:
        raise ConfigurationError('Unknown tokenizer "%s"' % spec)
    return factory()


register_tokenizer('builtin', lambda: Tokenizer('builtin'))


@dataclass(frozen=True)
class DocumentLine:
    """A rendered line of a model input: marker and body are accounted separately.

    `path` and the line numbers locate the line in its source file; they are
    `None` for message and header lines.
    """
    line_class: LineClass
    text: str
    marker: str = ''
    file_key: Optional[int] = None
    path: Optional[str] = None
    old_lineno: Optional[int] = None
    new_lineno: Optional[int] = None

    @property
    def source(self):
        """The file the line belongs to: its path when known, its file key otherwise."""
        return self.path if self.path is not None else self.file_key

    def render(self) -> str:
        return self.marker + self.text


@dataclass(frozen=True)
class Document:
    """A line-oriented model input, the common view of diffs and enriched diffs."""
    lines: Tuple[DocumentLine, ...] = ()

    def render(self) -> str:
        if not self.lines:
            return ''
        return '\n'.join(line.render() for line in self.lines) + '\n'

    def token_counts(self, tokenizer='builtin') -> TokenCounts:
        return count_tokens(self.lines, tokenizer)


def as_document(doc) -> Document:
    """Returns the `Document` view of a `CommitDiff`, an enriched diff or a document."""
    if isinstance(doc, Document):
        return doc
    if isinstance(doc, CommitDiff):
        paths = [file_diff.path for file_diff in doc.files]
        return Document(tuple(DocumentLine(line.line_class, line.text, line.marker, file_key,
                                           paths[file_key] if file_key is not None else None,
                                           line.old_lineno, line.new_lineno)
                              for file_key, line in diff_lines(doc)))
    if hasattr(doc, 'as_document'):
        return doc.as_document()
    raise TypeError('Cannot build a document from %s' % type(doc).__name__)


def count_tokens(lines: Sequence[DocumentLine], tokenizer='builtin') -> TokenCounts:
    """Counts tokens per class; markers count as header tokens.

    :param lines: document lines
    :param tokenizer: tokenizer reference
    :return: the `TokenCounts`; its total is the token count of the whole document
    """
    tok = get_tokenizer(tokenizer)
    counts = TokenCounts()
    for line in lines:
        counts.add(LineClass.HEADER, tok.count(line.marker))
        counts.add(line.line_class, tok.count(line.text))
    return counts


@dataclass
class TruncationReport:
    """Outcome of a truncation."""
    limit: int
    strategy: str
    total_tokens: int = 0
    kept_tokens: int = 0
    removed: TokenCounts = field(default_factory=TokenCounts)
    discarded_change_fraction: float = 0.0
    affected: bool = False

    @property
    def change_share_of_discarded(self) -> float:
        """Fraction of the discarded tokens that are change tokens."""
        return self.removed.change / self.removed.total if self.removed.total else 0.0

    def as_dict(self) -> dict:
        return {
            'limit': self.limit,
            'strategy': self.strategy,
            'total_tokens': self.total_tokens,
            'kept_tokens': self.kept_tokens,
            'removed_tokens': self.removed.as_dict(),
            'discarded_change_fraction': self.discarded_change_fraction,
            'change_share_of_discarded': self.change_share_of_discarded,
            'affected': self.affected,
        }


class _Budget(object):
    """Per-line token costs of a document and the running kept total."""

    def __init__(self, document: Document, tokenizer: Tokenizer):
        self.lines = list(document.lines)
        self.tokenizer = tokenizer
        self.costs = [(tokenizer.count(line.marker), tokenizer.count(line.text)) for line in self.lines]
        self.present = count_tokens(self.lines, tokenizer)
        self.total = self.present.total

    def line_cost(self, index: int) -> int:
        marker, body = self.costs[index]
        return marker + body

    def cut(self, index: int, budget: int) -> Optional[DocumentLine]:
        """Returns the line reduced to its first `budget` tokens, or None."""
        if budget <= 0:
            return None
        line = self.lines[index]
        marker, body = self.costs[index]
        if budget >= marker + body:
            return line
        if budget < marker:
            return replace(line, text='', marker=self.tokenizer.prefix(line.marker, budget))
        return replace(line, text=self.tokenizer.prefix(line.text, budget - marker))

    def report(self, limit: int, strategy: str, kept: List[DocumentLine]) -> Tuple[Document, TruncationReport]:
        document = Document(tuple(kept))
        remaining = count_tokens(document.lines, self.tokenizer)
        removed = TokenCounts(
            change=self.present.change - remaining.change,
            header=self.present.header - remaining.header,
            context=self.present.context - remaining.context,
            message=self.present.message - remaining.message,
        )
        fraction = removed.change / self.present.change if self.present.change else 0.0
        report = TruncationReport(limit=limit, strategy=strategy, total_tokens=self.total,
                                  kept_tokens=remaining.total, removed=removed,
                                  discarded_change_fraction=fraction, affected=removed.total > 0)
        return document, report


def _check_limit(limit: int) -> None:
    if limit < 1:
        raise ValueError('Token limit must be at least 1, got %d' % limit)


def truncate_naive(doc, limit: int, tokenizer='builtin') -> Tuple[Document, TruncationReport]:
    """Keeps the first `limit` tokens in rendering order.

    :param doc: a `CommitDiff`, an enriched diff, or a `Document`
    :param limit: token budget (at least 1)
    :param tokenizer: tokenizer reference
    :return: the truncated document and its report
    """
    _check_limit(limit)
    budget = _Budget(as_document(doc), get_tokenizer(tokenizer))
    kept = []
    left = limit
    for index in range(len(budget.lines)):
        line = budget.cut(index, left)
        if line is None:
            break
        kept.append(line)
        left -= budget.line_cost(index)
    return budget.report(limit, 'naive', kept)


def _nearest(values: List[int], x: Optional[int]) -> float:
    """Distance from `x` to the closest member of the sorted `values`."""
    if x is None or not values:
        return math.inf
    at = bisect.bisect_left(values, x)
    return min(abs(values[i] - x) for i in (at - 1, at) if 0 <= i < len(values))


class _FileChanges(object):
    """Source line numbers of a file's change lines, with their document positions as a fallback."""

    def __init__(self):
        self.old: List[int] = []
        self.new: List[int] = []
        self.positions: List[int] = []

    def distance(self, line: DocumentLine, index: int) -> float:
        if line.old_lineno is not None or line.new_lineno is not None:
            found = min(_nearest(self.old, line.old_lineno), _nearest(self.new, line.new_lineno))
            if math.isfinite(found):
                return found
        return _nearest(self.positions, index)


def _change_distances(lines: Sequence[DocumentLine]) -> Dict[int, float]:
    """Maps every context line to its distance from the nearest change line of the same file.

    Distances count source lines: deleted lines are compared on the pre-change
    side, added lines on the post-change side. Lines without line numbers fall
    back to their distance in the document.
    """
    changes: Dict[object, _FileChanges] = {}
    for index, line in enumerate(lines):
        if line.line_class is not LineClass.CHANGE:
            continue
        entry = changes.setdefault(line.source, _FileChanges())
        if line.old_lineno is not None:
            entry.old.append(line.old_lineno)
        if line.new_lineno is not None:
            entry.new.append(line.new_lineno)
        entry.positions.append(index)
    for entry in changes.values():
        entry.old.sort()
        entry.new.sort()
    distances = {}
    for index, line in enumerate(lines):
        if line.line_class is not LineClass.CONTEXT:
            continue
        entry = changes.get(line.source)
        distances[index] = entry.distance(line, index) if entry is not None else math.inf
    return distances


def truncate_context_aware(doc, limit: int, tokenizer='builtin') -> Tuple[Document, TruncationReport]:
    """Fits a document into `limit` tokens while keeping change lines as long as possible.

    Context lines go first, farthest from the nearest change line of the same
    file first (files without changes count as infinitely far; ties drop the
    later line). Then header lines, then message lines, both from the end.
    Change lines are truncated last, from the tail.

    :param doc: a `CommitDiff`, an enriched diff, or a `Document`
    :param limit: token budget (at least 1)
    :param tokenizer: tokenizer reference
    :return: the truncated document and its report
    """
    _check_limit(limit)
    budget = _Budget(as_document(doc), get_tokenizer(tokenizer))
    if budget.total <= limit:
        return budget.report(limit, 'context-aware', budget.lines)

    keep = [True] * len(budget.lines)
    total = budget.total

    distances = _change_distances(budget.lines)
    order = sorted(distances, key=lambda index: (-distances[index], -index))
    for line_class in (LineClass.HEADER, LineClass.MESSAGE):
        order.extend(sorted((index for index, line in enumerate(budget.lines) if line.line_class is line_class),
                            reverse=True))
    for index in order:
        if total <= limit:
            break
        keep[index] = False
        total -= budget.line_cost(index)

    kept = []
    left = limit
    for index, line in enumerate(budget.lines):
        if not keep[index]:
            continue
        line = budget.cut(index, left)
        if line is None:
            break
        kept.append(line)
        left -= budget.line_cost(index)
    return budget.report(limit, 'context-aware', kept)


_STRATEGIES = {
    'naive': truncate_naive,
    'context-aware': truncate_context_aware,
}


def truncate(doc, limit: int, tokenizer='builtin', strategy: str = 'context-aware'):
    """Dispatches to the named truncation strategy."""
    try:
        return _STRATEGIES[strategy](doc, limit, tokenizer)
    except KeyError:
        raise ConfigurationError('Unknown truncation strategy "%s"' % strategy)


def compare_truncation(docs: Iterable, limits: Sequence[int], tokenizer='builtin') -> List[dict]:
    """Compares naive and context-aware truncation over a collection of documents.

    :return: one summary per limit with the mean discarded change fraction of
        each strategy over the affected documents and the affected count
    """
    tok = get_tokenizer(tokenizer)
    documents = [as_document(doc) for doc in docs]
    summaries = []
    for limit in limits:
        naive, aware = [], []
        for document in documents:
            _, naive_report = truncate_naive(document, limit, tok)
            if not naive_report.affected:
                continue
            _, aware_report = truncate_context_aware(document, limit, tok)
            naive.append(naive_report.discarded_change_fraction)
            aware.append(aware_report.discarded_change_fraction)
        summaries.append({
            'limit': limit,
            'affected': len(naive),
            'naive_discarded_change_fraction': sum(naive) / len(naive) if naive else 0.0,
            'context_aware_discarded_change_fraction': sum(aware) / len(aware) if aware else 0.0,
        })
    return summaries
