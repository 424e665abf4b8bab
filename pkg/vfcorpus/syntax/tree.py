"""Immutable syntax trees converted from tree-sitter parses.

Traversals here are iterative; nested `else if` chains and long expressions
produce trees deeper than the interpreter's recursion limit.
"""
import logging
from dataclasses import dataclass
from typing import Iterator, List, Optional, Tuple

from .languages import Language, parser_for

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class SyntaxNode:
    """A node of a syntax tree.

    `label` holds the source text of leaves and is empty for inner nodes;
    `field` is the grammar field name of the node within its parent.
    Lines are 1-based and inclusive.
    """
    kind: str
    start_byte: int
    end_byte: int
    start_line: int
    end_line: int
    children: Tuple['SyntaxNode', ...] = ()
    is_named: bool = True
    is_error: bool = False
    field: Optional[str] = None
    label: str = ''

    @property
    def is_leaf(self) -> bool:
        return not self.children

    def child_by_field(self, name: str) -> Optional['SyntaxNode']:
        for child in self.children:
            if child.field == name:
                return child
        return None

    def children_by_field(self, name: str) -> List['SyntaxNode']:
        return [child for child in self.children if child.field == name]

    def named_children(self) -> List['SyntaxNode']:
        return [child for child in self.children if child.is_named]

    def overlaps(self, start: int, end: int) -> bool:
        """Tests whether the node's byte span intersects the half-open span `[start, end)`."""
        return self.start_byte < end and start < self.end_byte

    def __repr__(self):
        return '%s[%d:%d]' % (self.kind, self.start_byte, self.end_byte)


def iter_preorder(node: SyntaxNode) -> Iterator[SyntaxNode]:
    stack = [node]
    while stack:
        current = stack.pop()
        yield current
        stack.extend(reversed(current.children))


def iter_postorder(node: SyntaxNode) -> Iterator[SyntaxNode]:
    stack = [(node, False)]
    while stack:
        current, expanded = stack.pop()
        if expanded or not current.children:
            yield current
            continue
        stack.append((current, True))
        stack.extend((child, False) for child in reversed(current.children))


@dataclass(frozen=True, eq=False)
class SyntaxTree:
    """A syntax tree together with the UTF-8 source it was parsed from.

    Subtrees share the source of the whole file, so node offsets stay absolute.
    """
    language: Language
    root: SyntaxNode
    source: bytes
    has_error: bool = False

    def text(self, node: Optional[SyntaxNode] = None) -> str:
        node = node or self.root
        return self.source[node.start_byte:node.end_byte].decode('utf-8', errors='replace')

    def subtree(self, node: SyntaxNode) -> 'SyntaxTree':
        return SyntaxTree(self.language, node, self.source, self.has_error)

    def nodes(self) -> Iterator[SyntaxNode]:
        return iter_preorder(self.root)

    def postorder(self) -> Iterator[SyntaxNode]:
        return iter_postorder(self.root)


def _convert(ts_tree, source: bytes) -> SyntaxNode:
    cursor = ts_tree.walk()
    # each frame: [ts node, field, converted children]
    stack = [[cursor.node, None, []]]
    result = None
    descending = True
    while stack:
        if descending and cursor.goto_first_child():
            stack.append([cursor.node, cursor.field_name, []])
            continue
        node, field, children = stack.pop()
        converted = SyntaxNode(
            kind=node.type,
            start_byte=node.start_byte,
            end_byte=node.end_byte,
            start_line=node.start_point[0] + 1,
            end_line=node.end_point[0] + 1,
            children=tuple(children),
            is_named=node.is_named,
            is_error=node.type == 'ERROR' or node.is_missing,
            field=field,
            label='' if children else source[node.start_byte:node.end_byte].decode('utf-8', errors='replace'))
        if not stack:
            result = converted
            break
        stack[-1][2].append(converted)
        if cursor.goto_next_sibling():
            stack.append([cursor.node, cursor.field_name, []])
            descending = True
        else:
            cursor.goto_parent()
            descending = False
    return result


def parse_source(text: str, language: Language) -> SyntaxTree:
    """Parses `text` with the grammar registered for `language`.

    Parsing never fails on malformed code; erroneous regions become `ERROR` nodes
    and `has_error` is set.

    :raises UnsupportedLanguageError: when no grammar is available
    """
    source = text.encode('utf-8')
    ts_tree = parser_for(language).parse(source)
    root = _convert(ts_tree, source)
    has_error = ts_tree.root_node.has_error
    if has_error:
        logger.debug('Parse of %d bytes of %s contains error nodes' % (len(source), language.value))
    return SyntaxTree(language, root, source, has_error)
