"""Pairing of the functions touched by a commit.
"""
import logging
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

from ..diff import CommitDiff, FileDiff, Hunk
from ..errors import UnsupportedLanguageError
from .ir import StatementIR, build_statement_ir
from .languages import Language, language_for_path, is_supported
from .tree import SyntaxNode, SyntaxTree, parse_source

logger = logging.getLogger(__name__)

_NAME_KINDS = frozenset([
    'identifier', 'field_identifier', 'qualified_identifier', 'destructor_name', 'operator_name',
    'template_function',
])


class FallbackReason(object):
    BINARY = 'binary'
    UNSUPPORTED_LANGUAGE = 'unsupported-language'
    MISSING_SNAPSHOT = 'missing-snapshot'


@dataclass(frozen=True)
class FunctionDef:
    """A top-level function definition found in one version of a file."""
    name: str
    occurrence: int
    node: SyntaxNode

    @property
    def key(self) -> Tuple[str, int]:
        return self.name, self.occurrence

    def contains(self, line: int) -> bool:
        return self.node.start_line <= line <= self.node.end_line


@dataclass(frozen=True, eq=False)
class FunctionPair:
    """A changed function with both of its versions.

    One side is `None` when the function was added or removed. Trees share
    the source of their whole file.
    """
    path: str
    name: str
    language: Language
    pre_tree: Optional[SyntaxTree]
    post_tree: Optional[SyntaxTree]
    pre_ir: Optional[StatementIR]
    post_ir: Optional[StatementIR]
    deleted_lines: Tuple[int, ...] = ()
    added_lines: Tuple[int, ...] = ()

    @property
    def is_one_sided(self) -> bool:
        return self.pre_tree is None or self.post_tree is None


@dataclass(frozen=True)
class FileFallback:
    """A file that cannot be analysed structurally."""
    path: str
    reason: str
    file_diff: FileDiff


@dataclass
class FunctionChanges:
    """Result of `changed_functions`, in diff order."""
    pairs: List[FunctionPair] = field(default_factory=list)
    residual: List[Tuple[str, Hunk]] = field(default_factory=list)
    fallbacks: List[FileFallback] = field(default_factory=list)


def function_name(node: SyntaxNode, tree: SyntaxTree) -> str:
    """Returns the declared name of a function definition."""
    current = node.child_by_field('declarator')
    while current is not None:
        if current.kind == 'function_declarator':
            name = current.child_by_field('declarator')
            if name is not None and name.kind in _NAME_KINDS:
                return tree.text(name)
            current = name
        elif current.kind in _NAME_KINDS:
            return tree.text(current)
        else:
            current = current.child_by_field('declarator')
    return 'anonymous@%d' % node.start_line


def find_functions(tree: SyntaxTree) -> List[FunctionDef]:
    """Returns the outermost function definitions of a file in source order."""
    found = []
    counts: Dict[str, int] = {}
    pending = [tree.root]
    while pending:
        node = pending.pop()
        if node.kind == 'function_definition':
            name = function_name(node, tree)
            found.append((node, name))
            continue
        pending.extend(reversed(node.children))
    result = []
    for node, name in sorted(found, key=lambda item: item[0].start_byte):
        occurrence = counts.get(name, 0)
        counts[name] = occurrence + 1
        result.append(FunctionDef(name, occurrence, node))
    return result


def _owner(functions: Sequence[FunctionDef], line: int) -> Optional[FunctionDef]:
    for function in functions:
        if function.contains(line):
            return function
    return None


def pair_functions(path: str, language: Language, pre: Optional[SyntaxTree], post: Optional[SyntaxTree],
                   file_diff: FileDiff) -> Tuple[List[FunctionPair], List[Hunk]]:
    """Pairs the functions of two file versions touched by `file_diff`.

    Functions are paired by name. Hunks with changes outside any function are
    returned as residual hunks.

    :param path: the file path reported in the pairs
    :param language: the file's language
    :param pre: the pre-change tree or `None` for an added file
    :param post: the post-change tree or `None` for a deleted file
    :param file_diff: the diff between the two versions
    """
    pre_functions = find_functions(pre) if pre is not None else []
    post_functions = find_functions(post) if post is not None else []
    order: List[Tuple[str, int]] = []
    deleted: Dict[Tuple[str, int], List[int]] = {}
    added: Dict[Tuple[str, int], List[int]] = {}
    residual = []

    for hunk in file_diff.hunks:
        outside = False
        for line in hunk.lines:
            if line.old_lineno is not None and line.new_lineno is None and line.is_change:
                owner, bucket = _owner(pre_functions, line.old_lineno), deleted
                lineno = line.old_lineno
            elif line.new_lineno is not None and line.old_lineno is None and line.is_change:
                owner, bucket = _owner(post_functions, line.new_lineno), added
                lineno = line.new_lineno
            else:
                continue
            if owner is None:
                outside = True
                continue
            if owner.key not in deleted and owner.key not in added:
                order.append(owner.key)
            bucket.setdefault(owner.key, []).append(lineno)
        if outside:
            residual.append(hunk)

    pre_by_key = {f.key: f for f in pre_functions}
    post_by_key = {f.key: f for f in post_functions}
    pairs = []
    for key in order:
        pre_def, post_def = pre_by_key.get(key), post_by_key.get(key)
        pre_tree = pre.subtree(pre_def.node) if pre_def is not None else None
        post_tree = post.subtree(post_def.node) if post_def is not None else None
        pairs.append(FunctionPair(
            path=path, name=key[0], language=language, pre_tree=pre_tree, post_tree=post_tree,
            pre_ir=build_statement_ir(pre_tree) if pre_tree is not None else None,
            post_ir=build_statement_ir(post_tree) if post_tree is not None else None,
            deleted_lines=tuple(deleted.get(key, ())), added_lines=tuple(added.get(key, ()))))
    return pairs, residual


def file_language(file_diff: FileDiff) -> Language:
    return language_for_path(file_diff.new_path if not file_diff.is_deleted else file_diff.old_path)


def load_versions(file_diff: FileDiff, snapshots) -> Tuple[Optional[str], Optional[str]]:
    """Returns the pre and post contents of a file; `None` marks a missing snapshot."""
    pre = '' if file_diff.is_added else snapshots.pre(file_diff.old_path)
    post = '' if file_diff.is_deleted else snapshots.post(file_diff.new_path)
    return pre, post


def classify_file(file_diff: FileDiff, snapshots) -> Tuple[Optional[str], Optional[str], Optional[str]]:
    """Returns `(fallback_reason, pre, post)` for one file of a commit."""
    if file_diff.is_binary:
        return FallbackReason.BINARY, None, None
    if not is_supported(file_language(file_diff)):
        return FallbackReason.UNSUPPORTED_LANGUAGE, None, None
    pre, post = load_versions(file_diff, snapshots)
    if pre is None or post is None:
        return FallbackReason.MISSING_SNAPSHOT, None, None
    return None, pre, post


def changed_functions(diff: CommitDiff, snapshots) -> FunctionChanges:
    """Finds the functions changed by a commit and pairs their versions.

    :param diff: the parsed commit diff
    :param snapshots: an object with `pre(path)` and `post(path)` returning file
        contents or `None` when unavailable
    """
    changes = FunctionChanges()
    for file_diff in diff.files:
        reason, pre, post = classify_file(file_diff, snapshots)
        if reason is not None:
            logger.debug('Falling back to the raw diff of %s: %s' % (file_diff.path, reason))
            changes.fallbacks.append(FileFallback(file_diff.path, reason, file_diff))
            continue
        language = file_language(file_diff)
        try:
            pre_tree = parse_source(pre, language) if not file_diff.is_added else None
            post_tree = parse_source(post, language) if not file_diff.is_deleted else None
        except UnsupportedLanguageError:
            changes.fallbacks.append(FileFallback(file_diff.path, FallbackReason.UNSUPPORTED_LANGUAGE, file_diff))
            continue
        pairs, residual = pair_functions(file_diff.path, language, pre_tree, post_tree, file_diff)
        changes.pairs.extend(pairs)
        changes.residual.extend((file_diff.path, hunk) for hunk in residual)
    return changes
