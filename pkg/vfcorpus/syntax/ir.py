"""Statement-level intermediate representation of a function body.

Every statement records the variables it reads and writes and the chain of
control headers that enclose it. Control constructs contribute a header entry
(keyword through condition) while their bodies contribute their own statements.
Preprocessor directives and unparseable regions are opaque statements with
empty read and write sets.
"""
import logging
from dataclasses import dataclass
from typing import Dict, FrozenSet, Iterable, List, Optional, Set, Tuple

from .tree import SyntaxNode, SyntaxTree

logger = logging.getLogger(__name__)

_STATEMENT_KINDS = frozenset([
    'expression_statement', 'declaration', 'return_statement', 'break_statement',
    'continue_statement', 'goto_statement', 'throw_statement', 'co_return_statement',
    'co_yield_statement', 'type_definition', 'alias_declaration', 'using_declaration',
    'static_assert_declaration', 'namespace_alias_definition', 'asm_statement',
])

_CONTROL_KINDS = frozenset([
    'if_statement', 'while_statement', 'for_statement', 'for_range_loop', 'do_statement',
    'switch_statement',
])

_CONTAINER_KINDS = frozenset([
    'compound_statement', 'else_clause', 'case_statement', 'labeled_statement',
    'attributed_statement', 'try_statement', 'catch_clause', 'translation_unit',
    'seh_try_statement', 'seh_except_clause', 'seh_finally_clause', 'declaration_list',
])

_PREPROC_CONTAINERS = frozenset([
    'preproc_if', 'preproc_ifdef', 'preproc_else', 'preproc_elif', 'preproc_elifdef',
])

_PREPROC_KINDS = frozenset([
    'preproc_include', 'preproc_def', 'preproc_function_def', 'preproc_call',
])

_SKIPPED_KINDS = frozenset(['attribute_declaration', 'comment'])

# fields of containers that are not statements
_NON_STATEMENT_FIELDS = frozenset(['value', 'label', 'name', 'condition', 'parameters', 'declarator'])

_BODY_FIELDS = ('body', 'consequence', 'alternative')

# subtrees that never contribute variable reads
_NO_READ_KINDS = frozenset([
    'qualified_identifier', 'parameter_list', 'type_descriptor', 'template_argument_list',
    'primitive_type', 'type_identifier', 'field_identifier', 'statement_identifier',
    'string_literal', 'raw_string_literal', 'char_literal', 'comment', 'ERROR',
]) | _PREPROC_KINDS

_DECLARATOR_WRAPPERS = frozenset([
    'pointer_declarator', 'array_declarator', 'reference_declarator', 'parenthesized_declarator',
    'init_declarator', 'attributed_declarator',
])

_LVALUE_WRAPPERS = {
    'field_expression': 'argument',
    'subscript_expression': 'argument',
    'pointer_expression': 'argument',
    'parenthesized_expression': None,
    'cast_expression': 'value',
}


@dataclass(frozen=True)
class Statement:
    """One entry of the statement IR. Lines are 1-based and inclusive."""
    id: int
    kind: str
    start_line: int
    end_line: int
    start_byte: int
    end_byte: int
    text: str
    reads: FrozenSet[str] = frozenset()
    writes: FrozenSet[str] = frozenset()
    enclosure_chain: Tuple[int, ...] = ()
    is_control_header: bool = False
    is_opaque: bool = False

    @property
    def lines(self) -> range:
        return range(self.start_line, self.end_line + 1)

    def overlaps_bytes(self, start: int, end: int) -> bool:
        return self.start_byte < end and start < self.end_byte

    def overlaps_lines(self, lines: Iterable[int]) -> bool:
        return any(self.start_line <= line <= self.end_line for line in lines)


class StatementIR(object):
    """The ordered statements of one function; ids are indexes in source order."""

    def __init__(self, statements: Iterable[Statement]):
        self.statements: Tuple[Statement, ...] = tuple(statements)

    def __len__(self):
        return len(self.statements)

    def __iter__(self):
        return iter(self.statements)

    def __getitem__(self, index: int) -> Statement:
        return self.statements[index]

    def headers(self) -> List[Statement]:
        return [s for s in self.statements if s.is_control_header]

    def statements_on_lines(self, lines: Iterable[int]) -> Set[int]:
        """Returns the ids of statements spanning any of `lines`."""
        lines = set(lines)
        return {s.id for s in self.statements if any(line in lines for line in s.lines)}

    def lines_of(self, ids: Iterable[int]) -> Set[int]:
        result = set()
        for i in ids:
            result.update(self.statements[i].lines)
        return result


def _lvalue_base(node: Optional[SyntaxNode]) -> Optional[SyntaxNode]:
    """Follows member, index, dereference and cast expressions down to the base identifier."""
    while node is not None:
        if node.kind == 'identifier':
            return node
        if node.kind not in _LVALUE_WRAPPERS:
            return None
        field = _LVALUE_WRAPPERS[node.kind]
        if field is None:
            named = node.named_children()
            node = named[0] if named else None
        else:
            node = node.child_by_field(field)
    return None


def _operator(node: SyntaxNode) -> str:
    op = node.child_by_field('operator')
    if op is not None:
        return op.label
    for child in node.children:
        if not child.is_named:
            return child.label
    return ''


class _DefUse(object):
    """Collects the variables read and written by a statement's subtree."""

    def __init__(self, tree: SyntaxTree):
        self.tree = tree
        self.reads: Set[str] = set()
        self.writes: Set[str] = set()

    def name(self, node: SyntaxNode) -> str:
        return self.tree.text(node)

    def declarator(self, node: SyntaxNode, stack: list) -> None:
        """Marks declared names as written; sizes and initializers are read."""
        pending = [node]
        while pending:
            current = pending.pop()
            if current.kind == 'identifier':
                self.writes.add(self.name(current))
            elif current.kind == 'function_declarator':
                continue
            elif current.kind in _DECLARATOR_WRAPPERS or current.kind == 'structured_binding_declarator':
                for child in current.children:
                    if child.field in ('value', 'size', 'default_value'):
                        stack.append((child, current.kind, child.field))
                    elif child.is_named:
                        pending.append(child)

    def visit(self, root: SyntaxNode) -> None:
        stack = [(root, None, None)]
        while stack:
            node, parent, field = stack.pop()
            kind = node.kind
            if kind == 'identifier':
                if not (parent == 'call_expression' and field == 'function'):
                    self.reads.add(self.name(node))
                continue
            if kind in _NO_READ_KINDS:
                continue
            if kind in ('declaration', 'parameter_declaration', 'field_declaration', 'condition_declaration',
                        'for_range_loop'):
                for child in node.children:
                    if child.field == 'declarator':
                        self.declarator(child, stack)
                    elif child.field in ('value', 'right', 'default_value'):
                        stack.append((child, kind, child.field))
                continue
            if kind == 'init_declarator':
                self.declarator(node, stack)
                continue
            if kind == 'assignment_expression':
                left, right = node.child_by_field('left'), node.child_by_field('right')
                base = _lvalue_base(left)
                if base is not None:
                    self.writes.add(self.name(base))
                    if _operator(node) != '=' or base is not left:
                        self.reads.add(self.name(base))
                if left is not None and base is not left:
                    stack.append((left, kind, 'left'))
                if right is not None:
                    stack.append((right, kind, 'right'))
                continue
            if kind == 'update_expression':
                base = _lvalue_base(node.child_by_field('argument'))
                if base is not None:
                    self.reads.add(self.name(base))
                    self.writes.add(self.name(base))
            elif kind == 'pointer_expression' and parent == 'argument_list' and _operator(node) == '&':
                base = _lvalue_base(node.child_by_field('argument'))
                if base is not None:
                    self.reads.add(self.name(base))
                    self.writes.add(self.name(base))
            for child in reversed(node.children):
                if child.is_named:
                    stack.append((child, kind, child.field))


def def_use(node: SyntaxNode, tree: SyntaxTree) -> Tuple[FrozenSet[str], FrozenSet[str]]:
    """Returns the `(reads, writes)` variable sets of a subtree."""
    collector = _DefUse(tree)
    collector.visit(node)
    return frozenset(collector.reads), frozenset(collector.writes)


class _Entry(object):
    __slots__ = ('key', 'kind', 'start_byte', 'end_byte', 'start_line', 'end_line', 'reads', 'writes',
                 'chain', 'is_header', 'is_opaque')

    def __init__(self, key, kind, start_byte, end_byte, start_line, end_line, reads=frozenset(),
                 writes=frozenset(), chain=(), is_header=False, is_opaque=False):
        self.key = key
        self.kind = kind
        self.start_byte = start_byte
        self.end_byte = end_byte
        self.start_line = start_line
        self.end_line = end_line
        self.reads = reads
        self.writes = writes
        self.chain = chain
        self.is_header = is_header
        self.is_opaque = is_opaque


def _body_children(node: SyntaxNode) -> List[SyntaxNode]:
    bodies = [child for child in node.children if child.field in _BODY_FIELDS]
    if not bodies:
        named = node.named_children()
        if named and named[-1].field not in ('condition',):
            bodies = [named[-1]]
    return bodies


def _line_end(source: bytes, offset: int) -> int:
    end = source.find(b'\n', offset)
    return len(source) if end < 0 else end


class _Builder(object):

    def __init__(self, tree: SyntaxTree):
        self.tree = tree
        self.entries: List[_Entry] = []

    def add(self, **kwargs) -> int:
        key = len(self.entries)
        self.entries.append(_Entry(key, **kwargs))
        return key

    def statement(self, node: SyntaxNode, chain: Tuple[int, ...]) -> None:
        reads, writes = def_use(node, self.tree)
        self.add(kind=node.kind, start_byte=node.start_byte, end_byte=node.end_byte,
                 start_line=node.start_line, end_line=node.end_line, reads=reads, writes=writes, chain=chain)

    def opaque(self, node: SyntaxNode, chain: Tuple[int, ...], first_line_only: bool = False) -> None:
        end_byte = node.end_byte
        end_line = node.end_line
        if first_line_only:
            end_byte = min(end_byte, _line_end(self.tree.source, node.start_byte))
            end_line = node.start_line
        self.add(kind=node.kind, start_byte=node.start_byte, end_byte=end_byte, start_line=node.start_line,
                 end_line=end_line, chain=chain, is_opaque=True)

    def header(self, node: SyntaxNode, bodies: List[SyntaxNode], chain: Tuple[int, ...]) -> int:
        if node.kind == 'do_statement':
            keyword = next((c for c in node.children if c.kind == 'while' and not c.is_named), None)
            parts = [c for c in node.children if keyword is not None and c.start_byte >= keyword.start_byte]
        else:
            first_body = min((b.start_byte for b in bodies), default=node.end_byte)
            parts = [c for c in node.children if c.end_byte <= first_body]
        if not parts:
            parts = [node]
        reads, writes = set(), set()
        if node.kind == 'for_range_loop':
            parts_for_def_use = [node]
        else:
            parts_for_def_use = parts
        for part in parts_for_def_use:
            if part.is_named:
                r, w = def_use(part, self.tree)
                reads.update(r)
                writes.update(w)
        return self.add(kind=node.kind, start_byte=parts[0].start_byte, end_byte=parts[-1].end_byte,
                        start_line=parts[0].start_line, end_line=parts[-1].end_line, reads=frozenset(reads),
                        writes=frozenset(writes), chain=chain, is_header=True)

    def build(self, root: SyntaxNode) -> None:
        pending = [(root, ())]
        while pending:
            node, chain = pending.pop()
            kind = node.kind
            if kind in _SKIPPED_KINDS:
                continue
            if node.is_error:
                self.opaque(node, chain)
            elif kind in _CONTROL_KINDS:
                bodies = _body_children(node)
                key = self.header(node, bodies, chain)
                inner = (key,) + chain
                pending.extend((body, inner) for body in reversed(bodies))
            elif kind in _CONTAINER_KINDS:
                pending.extend((child, chain) for child in reversed(node.children)
                               if child.is_named and child.field not in _NON_STATEMENT_FIELDS)
            elif kind in _PREPROC_CONTAINERS:
                self.opaque(node, chain, first_line_only=True)
                pending.extend((child, chain) for child in reversed(node.children)
                               if child.is_named and child.field not in _NON_STATEMENT_FIELDS)
            elif kind in _PREPROC_KINDS:
                self.opaque(node, chain)
            elif kind in _STATEMENT_KINDS or kind.endswith('_statement') or kind.endswith('_declaration'):
                self.statement(node, chain)
            elif kind == 'function_definition':
                body = node.child_by_field('body')
                if body is not None:
                    pending.append((body, chain))
            # other named nodes (comments, stray expressions) are not statements

    def result(self) -> StatementIR:
        ordered = sorted(self.entries, key=lambda e: (e.start_byte, -e.end_byte, e.key))
        ids: Dict[int, int] = {entry.key: index for index, entry in enumerate(ordered)}
        statements = []
        for index, entry in enumerate(ordered):
            text = self.tree.source[entry.start_byte:entry.end_byte].decode('utf-8', errors='replace')
            statements.append(Statement(
                id=index, kind=entry.kind, start_line=entry.start_line, end_line=entry.end_line,
                start_byte=entry.start_byte, end_byte=entry.end_byte, text=text, reads=entry.reads,
                writes=entry.writes, enclosure_chain=tuple(ids[k] for k in entry.chain),
                is_control_header=entry.is_header, is_opaque=entry.is_opaque))
        return StatementIR(statements)


def function_body(node: SyntaxNode) -> SyntaxNode:
    """Returns the body of a function definition, or the node itself."""
    if node.kind == 'function_definition':
        return node.child_by_field('body') or node
    if node.kind == 'translation_unit':
        functions = [c for c in node.children if c.kind == 'function_definition']
        if len(functions) == 1:
            return function_body(functions[0])
    return node


def build_statement_ir(tree: SyntaxTree) -> StatementIR:
    """Builds the statement IR of the function (or snippet) rooted at `tree.root`."""
    builder = _Builder(tree)
    builder.build(function_body(tree.root))
    return builder.result()

