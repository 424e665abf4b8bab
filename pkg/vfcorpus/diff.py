"""Unified diff model: parsing, rendering, regeneration and patch application.

The model is immutable. A `CommitDiff` holds the files of one commit in input
order; every input line ends up in exactly one `DiffLine`, so rendering a
parsed canonical git diff reproduces the input byte for byte.
"""
import difflib
import enum
import logging
import re
from dataclasses import dataclass
from typing import Iterator, List, Optional, Sequence, Tuple

from .errors import DiffParseError, DiffRenderError, PatchApplyError

logger = logging.getLogger(__name__)

__dev_null__ = '/dev/null'
__no_newline__ = '\\ No newline at end of file'

_HUNK_HEADER = re.compile(r'^@@ -(\d+)(?:,(\d+))? \+(\d+)(?:,(\d+))? @@(.*)$')
_GIT_HEADER = re.compile(r'^diff --git (?:a/)?(\S+) (?:b/)?(\S+)$')


class LineKind(enum.Enum):
    """Kind of a single diff line."""
    ADDED = 'added'
    DELETED = 'deleted'
    CONTEXT = 'context'
    HEADER = 'header'
    MESSAGE = 'message'


class LineClass(enum.Enum):
    """Coarse line classes used for token accounting."""
    CHANGE = 'change'
    HEADER = 'header'
    CONTEXT = 'context'
    MESSAGE = 'message'


_MARKERS = {
    LineKind.ADDED: '+',
    LineKind.DELETED: '-',
    LineKind.CONTEXT: ' ',
}

_CLASSES = {
    LineKind.ADDED: LineClass.CHANGE,
    LineKind.DELETED: LineClass.CHANGE,
    LineKind.CONTEXT: LineClass.CONTEXT,
    LineKind.HEADER: LineClass.HEADER,
    LineKind.MESSAGE: LineClass.MESSAGE,
}


@dataclass(frozen=True)
class DiffLine:
    """One line of a diff.

    `text` excludes the diff marker and the line terminator.
    """
    kind: LineKind
    text: str
    old_lineno: Optional[int] = None
    new_lineno: Optional[int] = None

    @property
    def marker(self) -> str:
        return _MARKERS.get(self.kind, '')

    @property
    def line_class(self) -> LineClass:
        return _CLASSES[self.kind]

    @property
    def is_change(self) -> bool:
        return self.kind in (LineKind.ADDED, LineKind.DELETED)

    @property
    def is_no_newline_marker(self) -> bool:
        return self.kind is LineKind.HEADER and self.text.startswith('\\')

    def render(self) -> str:
        return self.marker + self.text


def _format_range(start: int, count: int) -> str:
    return str(start) if count == 1 else '%d,%d' % (start, count)


@dataclass(frozen=True)
class Hunk:
    """A contiguous change region.

    `section` is the text following the closing `@@` of the header, leading
    space included.
    """
    old_start: int
    old_count: int
    new_start: int
    new_count: int
    lines: Tuple[DiffLine, ...] = ()
    section: str = ''

    @property
    def header(self) -> str:
        return '@@ -%s +%s @@%s' % (_format_range(self.old_start, self.old_count),
                                   _format_range(self.new_start, self.new_count),
                                   self.section)

    def body_counts(self) -> Tuple[int, int]:
        """Returns the (old, new) line counts implied by the body."""
        old = sum(1 for line in self.lines if line.kind in (LineKind.DELETED, LineKind.CONTEXT))
        new = sum(1 for line in self.lines if line.kind in (LineKind.ADDED, LineKind.CONTEXT))
        return old, new

    def validate(self, name: str = 'hunk') -> None:
        """Raises `DiffRenderError` when the declared counts disagree with the body.

        :param name: name used to identify the hunk in the error message
        """
        old, new = self.body_counts()
        if (old, new) != (self.old_count, self.new_count):
            raise DiffRenderError('%s declares -%d +%d lines but its body has -%d +%d' % (
                name, self.old_count, self.new_count, old, new))


@dataclass(frozen=True)
class FileDiff:
    """Changes to one file. `headers` keeps the raw header lines in input order."""
    old_path: str
    new_path: str
    is_binary: bool = False
    hunks: Tuple[Hunk, ...] = ()
    headers: Tuple[str, ...] = ()

    @property
    def path(self) -> str:
        """The post-change path, or the pre-change path for deletions."""
        return self.old_path if self.new_path == __dev_null__ else self.new_path

    @property
    def is_added(self) -> bool:
        return self.old_path == __dev_null__

    @property
    def is_deleted(self) -> bool:
        return self.new_path == __dev_null__

    @property
    def is_rename(self) -> bool:
        return not (self.is_added or self.is_deleted) and self.old_path != self.new_path

    def changed_lines(self) -> Iterator[DiffLine]:
        for hunk in self.hunks:
            for line in hunk.lines:
                if line.is_change:
                    yield line


@dataclass(frozen=True)
class CommitDiff:
    """The diff of one commit.

    `preamble` holds lines preceding the first file (e.g. `git show` output),
    `lossy` records that the source bytes were not valid UTF-8.
    """
    message: Optional[str] = None
    files: Tuple[FileDiff, ...] = ()
    preamble: Tuple[str, ...] = ()
    final_newline: bool = True
    lossy: bool = False

    @property
    def is_empty(self) -> bool:
        return not self.files and not self.preamble


@dataclass
class TokenCounts:
    """Token counts per line class."""
    change: int = 0
    header: int = 0
    context: int = 0
    message: int = 0

    @property
    def total(self) -> int:
        return self.change + self.header + self.context + self.message

    def add(self, line_class: LineClass, count: int) -> None:
        setattr(self, line_class.value, getattr(self, line_class.value) + count)

    def get(self, line_class: LineClass) -> int:
        return getattr(self, line_class.value)

    def as_dict(self) -> dict:
        return {'change': self.change, 'header': self.header, 'context': self.context, 'message': self.message,
                'total': self.total}


def decode_text(data: bytes) -> Tuple[str, bool]:
    """Decodes UTF-8 bytes, replacing invalid sequences.

    :param data: raw bytes
    :return: the (text, lossy) pair, where lossy tells if any byte was replaced
    """
    try:
        return data.decode('utf-8'), False
    except UnicodeDecodeError:
        return data.decode('utf-8', errors='replace'), True


def split_lines(text: str) -> List[str]:
    """Splits text on newlines, keeping the terminators (only `\\n` separates lines)."""
    if not text:
        return []
    parts = text.split('\n')
    last = parts.pop()
    lines = [part + '\n' for part in parts]
    if last:
        lines.append(last)
    return lines


def _strip_diff_path(path: str) -> str:
    path = path.split('\t', 1)[0]
    if path == __dev_null__:
        return path
    if path.startswith('a/') or path.startswith('b/'):
        return path[2:]
    return path


class _FileBuilder(object):

    def __init__(self):
        self.old_path = None
        self.new_path = None
        self.is_binary = False
        self.headers = []
        self.hunks = []
        self.seen_paths = False

    def header(self, line: str) -> None:
        self.headers.append(line)
        if line.startswith('diff --git '):
            match = _GIT_HEADER.match(line)
            if match:
                self.old_path, self.new_path = match.group(1), match.group(2)
        elif line.startswith('--- '):
            self.old_path = _strip_diff_path(line[4:])
            self.seen_paths = True
        elif line.startswith('+++ '):
            self.new_path = _strip_diff_path(line[4:])
        elif line.startswith('rename from ') or line.startswith('copy from '):
            self.old_path = line.split(' ', 2)[2]
        elif line.startswith('rename to ') or line.startswith('copy to '):
            self.new_path = line.split(' ', 2)[2]
        elif line.startswith('new file mode '):
            self.old_path = __dev_null__
        elif line.startswith('deleted file mode '):
            self.new_path = __dev_null__
        elif line.startswith('Binary files ') or line.startswith('GIT binary patch'):
            self.is_binary = True

    def build(self) -> FileDiff:
        return FileDiff(old_path=self.old_path or self.new_path or '',
                        new_path=self.new_path or self.old_path or '',
                        is_binary=self.is_binary,
                        hunks=tuple(self.hunks),
                        headers=tuple(self.headers))


class _DiffParser(object):
    """Line-oriented state machine over git-flavored unified diff text."""

    def __init__(self, lines: List[str]):
        self.lines = lines
        self.pos = 0
        self.files = []
        self.preamble = []
        self.current = None

    def _flush(self):
        if self.current is not None:
            self.files.append(self.current.build())
        self.current = None

    def _peek(self, offset: int) -> str:
        index = self.pos + offset
        return self.lines[index] if index < len(self.lines) else ''

    def parse(self):
        while self.pos < len(self.lines):
            line = self.lines[self.pos]
            if line.startswith('diff --git '):
                self._flush()
                self.current = _FileBuilder()
                self.current.header(line)
            elif line.startswith('--- ') and self._peek(1).startswith('+++ ') and \
                    (self.current is None or self.current.hunks or self.current.seen_paths or
                     self.current.is_binary):
                # plain unified diff without a git header
                self._flush()
                self.current = _FileBuilder()
                self.current.header(line)
                self.current.header(self._peek(1))
                self.pos += 1
            elif line.startswith('@@ ') and self.current is not None and not self.current.is_binary:
                self._parse_hunk()
                continue
            elif line.startswith('@@ '):
                raise DiffParseError('hunk outside of a file section', self.pos + 1)
            elif self.current is None:
                self.preamble.append(line)
            elif self.current.hunks:
                self._after_hunk(line)
            else:
                self.current.header(line)
            self.pos += 1
        self._flush()
        return self.files, self.preamble

    def _after_hunk(self, line: str):
        # ...trailing text after the last hunk of a file (e.g. a patch signature)
        if line[:1] in ('+', '-', ' ') and line != '-- ':
            raise DiffParseError('hunk body longer than its header declares', self.pos + 1)
        last = self.current.hunks[-1]
        self.current.hunks[-1] = Hunk(last.old_start, last.old_count, last.new_start, last.new_count,
                                      last.lines + (DiffLine(LineKind.HEADER, line),), last.section)

    def _parse_hunk(self):
        header_lineno = self.pos + 1
        match = _HUNK_HEADER.match(self.lines[self.pos])
        if not match:
            raise DiffParseError('malformed hunk header %r' % self.lines[self.pos], header_lineno)
        old_start = int(match.group(1))
        old_count = int(match.group(2)) if match.group(2) is not None else 1
        new_start = int(match.group(3))
        new_count = int(match.group(4)) if match.group(4) is not None else 1
        old_lineno, new_lineno = old_start, new_start
        old_left, new_left = old_count, new_count
        body = []
        self.pos += 1
        while old_left > 0 or new_left > 0:
            if self.pos >= len(self.lines):
                raise DiffParseError('hunk body ends with %d old and %d new lines still declared' % (
                    old_left, new_left), header_lineno)
            line = self.lines[self.pos]
            tag = line[:1]
            if tag == ' ' or line == '':
                if not old_left or not new_left:
                    raise DiffParseError('context line exceeds the counts declared at line %d' % header_lineno,
                                         self.pos + 1)
                body.append(DiffLine(LineKind.CONTEXT, line[1:], old_lineno, new_lineno))
                old_lineno += 1
                new_lineno += 1
                old_left -= 1
                new_left -= 1
            elif tag == '-':
                if not old_left:
                    raise DiffParseError('deleted line exceeds the counts declared at line %d' % header_lineno,
                                         self.pos + 1)
                body.append(DiffLine(LineKind.DELETED, line[1:], old_lineno, None))
                old_lineno += 1
                old_left -= 1
            elif tag == '+':
                if not new_left:
                    raise DiffParseError('added line exceeds the counts declared at line %d' % header_lineno,
                                         self.pos + 1)
                body.append(DiffLine(LineKind.ADDED, line[1:], None, new_lineno))
                new_lineno += 1
                new_left -= 1
            elif tag == '\\':
                body.append(DiffLine(LineKind.HEADER, line))
            else:
                raise DiffParseError('unexpected line in hunk body: %r' % line, self.pos + 1)
            self.pos += 1
        if self.pos < len(self.lines) and self.lines[self.pos].startswith('\\'):
            body.append(DiffLine(LineKind.HEADER, self.lines[self.pos]))
            self.pos += 1
        self.current.hunks.append(Hunk(old_start, old_count, new_start, new_count, tuple(body), match.group(5)))


def parse_unified_diff(text: str, message: Optional[str] = None, lossy: bool = False) -> CommitDiff:
    """Parses git-flavored unified diff text.

    :param text: the diff text
    :param message: optional commit message carried along with the diff
    :param lossy: set when `text` was decoded with replacement characters
    :return: the `CommitDiff`
    :raises DiffParseError: on a malformed hunk header or a body inconsistent with its header
    """
    if not text:
        return CommitDiff(message=message, lossy=lossy)
    final_newline = text.endswith('\n')
    lines = text.split('\n')
    if final_newline:
        lines.pop()
    files, preamble = _DiffParser(lines).parse()
    return CommitDiff(message=message, files=tuple(files), preamble=tuple(preamble),
                      final_newline=final_newline, lossy=lossy)


def render_file_diff(file_diff: FileDiff) -> List[str]:
    """Renders one file diff into lines (without terminators)."""
    out = list(file_diff.headers)
    for index, hunk in enumerate(file_diff.hunks):
        hunk.validate('%s hunk #%d' % (file_diff.path, index + 1))
        out.append(hunk.header)
        out.extend(line.render() for line in hunk.lines)
    return out


def render_unified_diff(diff: CommitDiff) -> str:
    """Renders a `CommitDiff` as unified diff text, the inverse of `parse_unified_diff`.

    :raises DiffRenderError: when a hunk's declared counts disagree with its body
    """
    out = list(diff.preamble)
    for file_diff in diff.files:
        out.extend(render_file_diff(file_diff))
    if not out:
        return ''
    text = '\n'.join(out)
    return text + '\n' if diff.final_newline else text


def diff_lines(diff: CommitDiff, with_message: bool = True) -> Iterator[Tuple[Optional[int], DiffLine]]:
    """Yields `(file_index, line)` for every line of the rendered representation.

    Message lines come first; hunk headers are yielded as `HEADER` lines.
    The file index is `None` for message and preamble lines.
    """
    if with_message and diff.message:
        for text in diff.message.splitlines():
            yield None, DiffLine(LineKind.MESSAGE, text)
    for text in diff.preamble:
        yield None, DiffLine(LineKind.HEADER, text)
    for index, file_diff in enumerate(diff.files):
        for text in file_diff.headers:
            yield index, DiffLine(LineKind.HEADER, text)
        for hunk in file_diff.hunks:
            yield index, DiffLine(LineKind.HEADER, hunk.header)
            for line in hunk.lines:
                yield index, line


def classify_token_budget(diff: CommitDiff, tokenizer) -> TokenCounts:
    """Counts tokens of the rendered diff per line class.

    Diff markers (`+`, `-`) count as header tokens; line bodies count toward
    their own class.

    :param diff: the commit diff, message included when present
    :param tokenizer: a `vfcorpus.budget.Tokenizer`
    :return: the `TokenCounts`, whose total equals the token count of the rendering
    """
    counts = TokenCounts()
    for _, line in diff_lines(diff):
        counts.add(LineClass.HEADER, tokenizer.count(line.marker))
        counts.add(line.line_class, tokenizer.count(line.text))
    return counts


def _text_lines(kind: LineKind, raw: Sequence[str], old_base: Optional[int],
                new_base: Optional[int]) -> List[DiffLine]:
    lines = []
    for offset, value in enumerate(raw):
        old_lineno = old_base + offset if old_base is not None else None
        new_lineno = new_base + offset if new_base is not None else None
        if value.endswith('\n'):
            lines.append(DiffLine(kind, value[:-1], old_lineno, new_lineno))
        else:
            lines.append(DiffLine(kind, value, old_lineno, new_lineno))
            lines.append(DiffLine(LineKind.HEADER, __no_newline__))
    return lines


def _opcode_lines(opcode, pre: List[str], post: List[str]) -> List[DiffLine]:
    tag, i1, i2, j1, j2 = opcode
    if tag == 'equal':
        return _text_lines(LineKind.CONTEXT, post[j1:j2], i1 + 1, j1 + 1)
    lines = []
    if tag in ('replace', 'delete'):
        lines.extend(_text_lines(LineKind.DELETED, pre[i1:i2], i1 + 1, None))
    if tag in ('replace', 'insert'):
        lines.extend(_text_lines(LineKind.ADDED, post[j1:j2], None, j1 + 1))
    return lines


def _matcher(pre_lines: List[str], post_lines: List[str]) -> difflib.SequenceMatcher:
    return difflib.SequenceMatcher(None, pre_lines, post_lines, autojunk=False)


def compute_unified_diff(pre: str, post: str, context_n: int = 3, old_path: str = 'a',
                         new_path: str = 'b') -> FileDiff:
    """Computes the unified diff between two file versions.

    :param pre: pre-change file content
    :param post: post-change file content
    :param context_n: number of context lines around each change
    :param old_path: path recorded for the pre-change side
    :param new_path: path recorded for the post-change side
    :return: a `FileDiff` whose application to `pre` reproduces `post`
    """
    if context_n < 0:
        raise ValueError('context_n must be non-negative')
    pre_lines, post_lines = split_lines(pre), split_lines(post)
    hunks = []
    for group in _matcher(pre_lines, post_lines).get_grouped_opcodes(context_n):
        i1, i2 = group[0][1], group[-1][2]
        j1, j2 = group[0][3], group[-1][4]
        lines = []
        for opcode in group:
            lines.extend(_opcode_lines(opcode, pre_lines, post_lines))
        hunks.append(Hunk(old_start=i1 + 1 if i2 > i1 else i1, old_count=i2 - i1,
                          new_start=j1 + 1 if j2 > j1 else j1, new_count=j2 - j1,
                          lines=tuple(lines)))
    headers = ()
    if hunks:
        headers = ('--- %s' % (old_path if old_path == __dev_null__ else 'a/' + old_path),
                   '+++ %s' % (new_path if new_path == __dev_null__ else 'b/' + new_path))
    return FileDiff(old_path=old_path, new_path=new_path, hunks=tuple(hunks), headers=headers)


def align_lines(pre: str, post: str) -> List[DiffLine]:
    """Aligns two file versions line by line (a diff with unlimited context).

    The alignment agrees with `compute_unified_diff` on which lines changed.
    """
    pre_lines, post_lines = split_lines(pre), split_lines(post)
    lines = []
    for opcode in _matcher(pre_lines, post_lines).get_opcodes():
        lines.extend(_opcode_lines(opcode, pre_lines, post_lines))
    return lines


def apply_file_diff(pre: str, file_diff: FileDiff) -> str:
    """Applies a file diff to the pre-change content.

    :raises PatchApplyError: when context or deleted lines do not match `pre`
    """
    source = split_lines(pre)
    out = []
    cursor = 0
    for number, hunk in enumerate(file_diff.hunks, start=1):
        start = hunk.old_start - 1 if hunk.old_count > 0 else hunk.old_start
        if start < cursor or start > len(source):
            raise PatchApplyError('hunk #%d starts at line %d, outside of the remaining source' % (
                number, hunk.old_start))
        out.extend(source[cursor:start])
        cursor = start
        lines = hunk.lines
        for index, line in enumerate(lines):
            if line.kind not in _MARKERS:
                continue
            no_newline = index + 1 < len(lines) and lines[index + 1].is_no_newline_marker
            value = line.text if no_newline else line.text + '\n'
            if line.kind is LineKind.ADDED:
                out.append(value)
                continue
            if cursor >= len(source) or source[cursor] != value:
                raise PatchApplyError('hunk #%d does not apply at line %d' % (number, cursor + 1))
            cursor += 1
            if line.kind is LineKind.CONTEXT:
                out.append(value)
    out.extend(source[cursor:])
    return ''.join(out)
