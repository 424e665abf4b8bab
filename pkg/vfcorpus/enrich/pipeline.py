"""Commit enrichment: comment stripping, structural diffing, slicing and merged emission.
"""
import logging
from typing import Dict, List, Optional, Set, Tuple

from ..diff import CommitDiff, DiffLine, FileDiff, Hunk, LineKind, align_lines, compute_unified_diff, \
    parse_unified_diff
from ..errors import DiffParseError, EnrichmentError
from ..structdiff import StatementSet, changed_statements, match_trees
from ..syntax.comments import strip_source_comments
from ..syntax.functions import FallbackReason, FunctionPair, classify_file, file_language, pair_functions
from ..syntax.ir import StatementIR
from ..syntax.languages import Language
from ..syntax.tree import parse_source
from .document import EnrichedDiff, EnrichedLine, EnrichedSection, LineTag
from .slicing import Direction, EnrichmentLevel, control_flow_enclosure, slice_depths

logger = logging.getLogger(__name__)

__analysis_error__ = 'analysis-error'

_Selection = Dict[int, Tuple[LineTag, str]]


class _NoSnapshots(object):

    def pre(self, path):
        return None

    def post(self, path):
        return None


def commit_view(snapshots, record):
    """Returns the per-commit snapshot view (`pre(path)`, `post(path)`) for a record."""
    if snapshots is None:
        return _NoSnapshots()
    if hasattr(snapshots, 'for_commit'):
        return snapshots.for_commit(record.repo, record.sha)
    return snapshots


def parse_record_diff(record) -> CommitDiff:
    """Parses a record's diff; an unparseable diff is fatal for the record.

    :raises EnrichmentError: when the diff cannot be parsed
    """
    try:
        return parse_unified_diff(record.diff, lossy=getattr(record, 'lossy', False))
    except DiffParseError as e:
        raise EnrichmentError('%s: unparseable diff, %s' % (getattr(record, 'record_id', '?'), e))


def _shift(line: DiffLine, old_offset: int, new_offset: int) -> DiffLine:
    return DiffLine(line.kind, line.text,
                    line.old_lineno + old_offset if line.old_lineno is not None else None,
                    line.new_lineno + new_offset if line.new_lineno is not None else None)


def strip_hunk_comments(file_diff: FileDiff, language: Language) -> FileDiff:
    """Removes comments from the hunks of a file diff without the full file versions.

    Each hunk's two sides are stripped as fragments and diffed again; hunks
    that only changed comments disappear.
    """
    hunks = []
    for hunk in file_diff.hunks:
        pre = ''.join(line.text + '\n' for line in hunk.lines if line.kind in (LineKind.CONTEXT, LineKind.DELETED))
        post = ''.join(line.text + '\n' for line in hunk.lines if line.kind in (LineKind.CONTEXT, LineKind.ADDED))
        stripped_pre, stripped_post = strip_source_comments(pre, language), strip_source_comments(post, language)
        width = max(len(pre), len(post))
        old_offset = hunk.old_start - 1 if hunk.old_count > 0 else hunk.old_start
        new_offset = hunk.new_start - 1 if hunk.new_count > 0 else hunk.new_start
        for sub in compute_unified_diff(stripped_pre, stripped_post, context_n=width).hunks:
            hunks.append(Hunk(sub.old_start + old_offset, sub.old_count, sub.new_start + new_offset, sub.new_count,
                              tuple(_shift(line, old_offset, new_offset) for line in sub.lines), hunk.section))
    return FileDiff(file_diff.old_path, file_diff.new_path, file_diff.is_binary, tuple(hunks), file_diff.headers)


def _file_headers(file_diff: FileDiff) -> List[EnrichedLine]:
    old = file_diff.old_path if file_diff.is_added else 'a/' + file_diff.old_path
    new = file_diff.new_path if file_diff.is_deleted else 'b/' + file_diff.new_path
    return [EnrichedLine(LineTag.HEADER, '--- ' + old), EnrichedLine(LineTag.HEADER, '+++ ' + new)]


def _fallback_section(file_diff: FileDiff, reason: str) -> EnrichedSection:
    provenance = 'fallback:' + reason
    lines = [EnrichedLine(LineTag.HEADER, text) for text in file_diff.headers]
    for hunk in file_diff.hunks:
        lines.append(EnrichedLine(LineTag.HEADER, hunk.header))
        for line in hunk.lines:
            if line.kind is LineKind.ADDED:
                lines.append(EnrichedLine(LineTag.ADDED, line.text, '', None, line.new_lineno))
            elif line.kind is LineKind.DELETED:
                lines.append(EnrichedLine(LineTag.DELETED, line.text, '', line.old_lineno, None))
            elif line.kind is LineKind.CONTEXT:
                lines.append(EnrichedLine(LineTag.CONTEXT, line.text, provenance, line.old_lineno, line.new_lineno))
            else:
                lines.append(EnrichedLine(LineTag.HEADER, line.text))
    return EnrichedSection(file_diff.path, None, tuple(lines), reason)


def select_context(seeds: StatementSet, ir: StatementIR, level: EnrichmentLevel,
                   full_chain: bool = False) -> Dict[int, Tuple[LineTag, str]]:
    """Selects the context statements of one side of a function.

    :return: statement id mapped to its tag and provenance; seeds map to
        `ctx-statement` so that unchanged lines of changed statements are kept
    """
    backward = slice_depths(seeds, ir, level.depth, Direction.BACKWARD)
    forward = slice_depths(seeds, ir, level.depth, Direction.FORWARD)
    sliced = set(backward) | set(forward)
    enclosures = control_flow_enclosure(StatementSet(seeds.side, seeds.ids | frozenset(sliced)), ir, full_chain)

    selected = {}
    for statement_id in sorted(seeds.ids):
        selected[statement_id] = (LineTag.STATEMENT, 'changed statement')
    for statement_id, depth in sorted(backward.items()):
        selected.setdefault(statement_id, (LineTag.DATAFLOW, 'backward d=%d' % depth))
    for statement_id, depth in sorted(forward.items()):
        selected.setdefault(statement_id, (LineTag.DATAFLOW, 'forward d=%d' % depth))
    for statement_id in sorted(enclosures.ids):
        selected.setdefault(statement_id, (LineTag.CONTROL, 'enclosure'))
    return selected


def _line_selection(ir: Optional[StatementIR], selected: Dict[int, Tuple[LineTag, str]]) -> _Selection:
    lines: _Selection = {}
    if ir is None:
        return lines
    for statement_id in sorted(selected):
        for line in ir[statement_id].lines:
            lines.setdefault(line, selected[statement_id])
    return lines


def _emit(alignment: List[DiffLine], deleted: Set[int], added: Set[int], pre_lines: _Selection,
          post_lines: _Selection, title: str) -> Tuple[int, List[EnrichedLine]]:
    """Walks the file alignment and emits the selected lines in source order.

    :return: the alignment index of the first emitted line and the lines, hunk header first
    """
    body = []
    first = -1
    last_old = last_new = 0
    start_old = start_new = None
    for index, line in enumerate(alignment):
        emitted = None
        if line.kind is LineKind.DELETED and line.old_lineno in deleted:
            emitted = EnrichedLine(LineTag.DELETED, line.text, '', line.old_lineno, None)
        elif line.kind is LineKind.ADDED and line.new_lineno in added:
            emitted = EnrichedLine(LineTag.ADDED, line.text, '', None, line.new_lineno)
        elif line.kind is LineKind.CONTEXT:
            info = pre_lines.get(line.old_lineno) or post_lines.get(line.new_lineno)
            if info is not None:
                emitted = EnrichedLine(info[0], line.text, info[1], line.old_lineno, line.new_lineno)
        if emitted is None:
            if first < 0:
                last_old = line.old_lineno or last_old
                last_new = line.new_lineno or last_new
            continue
        if first < 0:
            first = index
        if start_old is None and emitted.old_lineno is not None:
            start_old = emitted.old_lineno
        if start_new is None and emitted.new_lineno is not None:
            start_new = emitted.new_lineno
        body.append(emitted)
    if not body:
        return -1, []
    old_count = sum(1 for line in body if line.old_lineno is not None)
    new_count = sum(1 for line in body if line.new_lineno is not None)
    header = Hunk(start_old if start_old is not None else last_old, old_count,
                  start_new if start_new is not None else last_new, new_count,
                  section=' ' + title if title else '').header
    return first, [EnrichedLine(LineTag.HEADER, header)] + body


def _side_selection(pair: FunctionPair, level: EnrichmentLevel, full_chain: bool) -> Tuple[_Selection, _Selection]:
    mapping = match_trees(pair.pre_tree, pair.post_tree)
    pre_seeds, post_seeds = changed_statements(mapping, pair.pre_ir, pair.post_ir)
    logger.debug('%s:%s: %d actions, seeds -%d +%d' % (pair.path, pair.name, len(mapping.actions),
                                                       len(pre_seeds), len(post_seeds)))
    pre_lines = post_lines = {}
    if pair.pre_ir is not None:
        pre_lines = _line_selection(pair.pre_ir, select_context(pre_seeds, pair.pre_ir, level, full_chain))
    if pair.post_ir is not None:
        post_lines = _line_selection(pair.post_ir, select_context(post_seeds, pair.post_ir, level, full_chain))
    return pre_lines, post_lines


def _enrich_file(file_diff: FileDiff, pre: str, post: str, level: EnrichmentLevel, full_chain: bool,
                 context_n: int) -> List[EnrichedSection]:
    language = file_language(file_diff)
    stripped_pre = strip_source_comments(pre, language) if not file_diff.is_added else ''
    stripped_post = strip_source_comments(post, language) if not file_diff.is_deleted else ''
    stripped = compute_unified_diff(stripped_pre, stripped_post, context_n, file_diff.old_path, file_diff.new_path)
    if not stripped.hunks:
        logger.debug('%s: only comments changed' % file_diff.path)
        return []

    pre_tree = parse_source(stripped_pre, language) if not file_diff.is_added else None
    post_tree = parse_source(stripped_post, language) if not file_diff.is_deleted else None
    pairs, residual = pair_functions(file_diff.path, language, pre_tree, post_tree, stripped)
    alignment = align_lines(stripped_pre, stripped_post)

    ordered = []
    for pair in pairs:
        pre_lines, post_lines = _side_selection(pair, level, full_chain)
        first, lines = _emit(alignment, set(pair.deleted_lines), set(pair.added_lines), pre_lines, post_lines,
                             pair.name)
        if lines:
            ordered.append((first, EnrichedSection(file_diff.path, pair.name, tuple(lines))))

    owned_deleted = {line for pair in pairs for line in pair.deleted_lines}
    owned_added = {line for pair in pairs for line in pair.added_lines}
    residual_deleted, residual_added = set(), set()
    for hunk in residual:
        for line in hunk.lines:
            if line.kind is LineKind.DELETED and line.old_lineno not in owned_deleted:
                residual_deleted.add(line.old_lineno)
            elif line.kind is LineKind.ADDED and line.new_lineno not in owned_added:
                residual_added.add(line.new_lineno)
    if residual_deleted or residual_added:
        first, lines = _emit(alignment, residual_deleted, residual_added, {}, {}, '')
        if lines:
            ordered.append((first, EnrichedSection(file_diff.path, None, tuple(lines))))

    ordered.sort(key=lambda item: item[0])
    sections = [section for _, section in ordered]
    if sections:
        head = sections[0]
        sections[0] = EnrichedSection(head.path, head.function, tuple(_file_headers(file_diff)) + head.lines)
    return sections


def enrich_diff(diff: CommitDiff, view, level='df1', full_chain: bool = False, context_n: int = 3,
                record_id: Optional[str] = None) -> EnrichedDiff:
    """Enriches a parsed commit diff given a snapshot view of the commit.

    Files that cannot be analysed degrade to their (comment-stripped where
    possible) raw diff and are flagged in the section's `fallback`.
    """
    level = EnrichmentLevel.parse(level)
    result = EnrichedDiff(level=level.value, record_id=record_id, metadata={
        'full_chain': full_chain,
        'move_marks_both_sides': True,
        'changed_headers_seed': True,
        'lossy': diff.lossy,
        'fallbacks': [],
    })
    for file_diff in diff.files:
        reason, pre, post = classify_file(file_diff, view)
        sections = None
        if reason is None:
            try:
                sections = _enrich_file(file_diff, pre, post, level, full_chain, context_n)
            except Exception as e:
                logger.warning('%s: analysis of %s failed, using the raw diff: %s' % (
                    record_id, file_diff.path, e))
                reason = __analysis_error__
        if sections is None:
            if reason == FallbackReason.BINARY:
                fallback = FileDiff(file_diff.old_path, file_diff.new_path, True, (), file_diff.headers)
            elif reason == FallbackReason.UNSUPPORTED_LANGUAGE:
                fallback = file_diff
            else:
                fallback = strip_hunk_comments(file_diff, file_language(file_diff))
            logger.debug('%s: %s falls back to the raw diff (%s)' % (record_id, file_diff.path, reason))
            result.metadata['fallbacks'].append({'path': file_diff.path, 'reason': reason})
            sections = [_fallback_section(fallback, reason)]
        result.sections.extend(sections)
    # snapshots that were not valid UTF-8 make the result lossy too
    result.metadata['lossy'] = bool(diff.lossy or getattr(view, 'lossy', False))
    return result


def enrich_commit(record, snapshots, level='df1', full_chain: bool = False, context_n: int = 3,
                  with_message: bool = False) -> EnrichedDiff:
    """Produces the enriched diff of a commit record.

    :param record: a `CommitRecord` (or any object with `repo`, `sha`, `diff` and `message`)
    :param snapshots: a snapshot provider, a per-commit view, or `None`
    :param level: the enrichment level, `cf`, `df1` or `df2`
    :param full_chain: add every enclosing control header instead of the innermost one
    :param context_n: context width of the regenerated comment-stripped diff
    :param with_message: carry the commit message in the result
    :raises EnrichmentError: when the record's diff is unparseable
    """
    diff = parse_record_diff(record)
    result = enrich_diff(diff, commit_view(snapshots, record), level, full_chain, context_n,
                         getattr(record, 'record_id', None))
    if with_message:
        result.message = record.message
    return result


def stripped_commit_diff(record, snapshots, context_n: int = 3) -> CommitDiff:
    """Returns the comment-stripped diff of a record.

    Files with both snapshots are regenerated from the stripped versions; other
    supported files are stripped hunk by hunk; the rest are kept unchanged.
    """
    diff = parse_record_diff(record)
    view = commit_view(snapshots, record)
    files = []
    for file_diff in diff.files:
        reason, pre, post = classify_file(file_diff, view)
        language = file_language(file_diff)
        if reason is None:
            stripped_pre = strip_source_comments(pre, language) if not file_diff.is_added else ''
            stripped_post = strip_source_comments(post, language) if not file_diff.is_deleted else ''
            regenerated = compute_unified_diff(stripped_pre, stripped_post, context_n, file_diff.old_path,
                                               file_diff.new_path)
            if regenerated.hunks:
                files.append(FileDiff(file_diff.old_path, file_diff.new_path, False, regenerated.hunks,
                                      _stripped_headers(file_diff)))
        elif reason == FallbackReason.MISSING_SNAPSHOT:
            files.append(strip_hunk_comments(file_diff, language))
        else:
            files.append(file_diff)
    return CommitDiff(message=record.message, files=tuple(files),
                      lossy=bool(diff.lossy or getattr(view, 'lossy', False)))


def _stripped_headers(file_diff: FileDiff) -> Tuple[str, ...]:
    return tuple(line.text for line in _file_headers(file_diff))
