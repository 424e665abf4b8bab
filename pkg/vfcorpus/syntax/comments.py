"""Comment removal on source text.
"""
import logging
from typing import List, Tuple

from .languages import Language
from .tree import parse_source

logger = logging.getLogger(__name__)

_COMMENT_KINDS = frozenset(['comment'])


def comment_spans(text: str, language: Language) -> List[Tuple[int, int]]:
    """Returns the merged byte spans of the comments in `text`, in order."""
    tree = parse_source(text, language)
    spans = []
    for node in tree.nodes():
        if node.kind in _COMMENT_KINDS:
            if spans and node.start_byte <= spans[-1][1]:
                spans[-1] = (spans[-1][0], max(spans[-1][1], node.end_byte))
            else:
                spans.append((node.start_byte, node.end_byte))
    return spans


def strip_source_comments(text: str, language: Language) -> str:
    """Removes all comments from `text`.

    Newlines inside comments are kept, as are string literals that look like
    comments. Whitespace left in front of a comment that ended its line is
    trimmed, and lines that only become blank through the removal are dropped.
    The operation is idempotent.

    :raises UnsupportedLanguageError: when no grammar is available
    """
    spans = comment_spans(text, language)
    if not spans:
        return text
    source = text.encode('utf-8')
    out = bytearray()
    position = 0
    span_index = 0
    while position < len(source):
        newline = source.find(b'\n', position)
        line_end = len(source) if newline < 0 else newline
        terminator = b'' if newline < 0 else b'\n'

        while span_index < len(spans) and spans[span_index][1] <= position:
            span_index += 1
        content = bytearray()
        cursor = position
        touched = False
        tail_removed = False
        index = span_index
        while index < len(spans) and spans[index][0] < line_end:
            start, end = max(spans[index][0], position), min(spans[index][1], line_end)
            if start < end:
                content += source[cursor:start]
                cursor = end
                touched = True
            elif spans[index][0] <= position and spans[index][1] > line_end:
                # blank line inside a block comment
                touched = True
            if spans[index][1] > line_end:
                break
            index += 1
        rest = source[cursor:line_end]
        if touched:
            tail_removed = not rest.strip(b' \t\r')
        content += rest

        if not touched:
            out += source[position:line_end] + terminator
        else:
            carriage = source[position:line_end].endswith(b'\r')
            body = bytes(content).rstrip(b'\r')
            if tail_removed:
                body = body.rstrip(b' \t')
            if body.strip(b' \t'):
                out += body + (b'\r' if carriage else b'') + terminator
        position = line_end + len(terminator)
    return out.decode('utf-8')


def strip_comments(pre: str, post: str, language: Language) -> Tuple[str, str]:
    """Removes comments from both versions of a file."""
    return strip_source_comments(pre, language), strip_source_comments(post, language)
