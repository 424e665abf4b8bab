import json

import pytest
from hypothesis import given, strategies as st

from vfcorpus.corpus.records import CommitRecord, Label
from vfcorpus.corpus.snapshots import StaticSnapshots
from vfcorpus.diff import CommitDiff, LineClass, LineKind, compute_unified_diff, render_unified_diff
from vfcorpus.enrich import EnrichedDiff, EnrichmentLevel, LineTag, Representation, backward_slice, \
    control_flow_enclosure, enrich_commit, forward_slice, representation_document
from vfcorpus.errors import ConfigurationError, EnrichmentError, SchemaError
from vfcorpus.structdiff import Side, StatementSet
from vfcorpus.syntax.ir import Statement, StatementIR
from vfcorpus.tasks.enrich import enrich_record

PRE = ('int copy(char *dst, int len)\n'
       '{\n'
       '    int n = len;\n'
       '    int m = n * 2;\n'
       '    int k = m + 1;\n'
       '    if (n > 0) {\n'
       '        dst[0] = n;\n'
       '    }\n'
       '    return k;\n'
       '}\n')


def _record(pre, post, path='src/buf.c', message='Fix off-by-one'):
    diff = render_unified_diff(CommitDiff(files=(compute_unified_diff(pre, post, 3, path, path),)))
    return CommitRecord(repo='github.com/acme/buf', sha='a' * 40, label=Label.VFC, message=message, diff=diff)


def _snapshots(pre, post, path='src/buf.c'):
    return StaticSnapshots.single({path: pre}, {path: post})


def _context_lines(enriched):
    return {line.old_lineno: line for line in enriched.context_lines()}


def _ir(*effects, chains=None):
    statements = []
    for index, (reads, writes) in enumerate(effects):
        statements.append(Statement(index, 'expression_statement', index + 1, index + 1, index * 10, index * 10 + 5,
                                    's%d' % index, frozenset(reads), frozenset(writes),
                                    (chains or {}).get(index, ())))
    return StatementIR(statements)


def test_levels_parse():
    assert EnrichmentLevel.parse('DF2') is EnrichmentLevel.DF2
    assert [level.depth for level in EnrichmentLevel] == [0, 1, 2]
    with pytest.raises(ConfigurationError):
        EnrichmentLevel.parse('df3')


def test_slices_follow_def_use_steps():
    ir = _ir(({'len'}, {'n'}), ({'n'}, {'m'}), ({'m'}, {'k'}), ({'k'}, set()), ({'n'}, {'x'}))
    seed = StatementSet(Side.PRE, frozenset([3]))
    assert backward_slice(seed, ir, 0).ids == frozenset()
    assert backward_slice(seed, ir, 1).ids == {2}
    assert backward_slice(seed, ir, 3).ids == {0, 1, 2}
    assert forward_slice(StatementSet(Side.PRE, frozenset([0])), ir, 1).ids == {1, 4}
    assert backward_slice(seed, ir, 2).side is Side.PRE
    with pytest.raises(ValueError):
        backward_slice(seed, ir, -1)


def test_enclosure_innermost_or_full_chain():
    ir = _ir((set(), set()), (set(), set()), (set(), set()), chains={1: (0,), 2: (1, 0)})
    seed = StatementSet(Side.POST, frozenset([2]))
    assert control_flow_enclosure(seed, ir).ids == {1}
    assert control_flow_enclosure(seed, ir, full_chain=True).ids == {0, 1}
    assert control_flow_enclosure(StatementSet(Side.POST, frozenset([0])), ir).ids == frozenset()


_variables = st.sets(st.sampled_from('abcd'), max_size=2)


@st.composite
def slicing_cases(draw):
    effects = draw(st.lists(st.tuples(_variables, _variables), min_size=1, max_size=12))
    seeds = draw(st.sets(st.integers(0, len(effects) - 1), min_size=1))
    return _ir(*effects), frozenset(seeds)


def _closure(ir, seeds, d, backward):
    reached = set(seeds)
    for _ in range(d):
        step = set(reached)
        for i in reached:
            for j in range(len(ir)):
                if backward and j < i and ir[j].writes & ir[i].reads:
                    step.add(j)
                if not backward and j > i and ir[i].writes & ir[j].reads:
                    step.add(j)
        reached = step
    return reached - set(seeds)


@given(case=slicing_cases(), d=st.integers(0, 4))
def test_slices_match_def_use_closure(case, d):
    ir, seeds = case
    seed = StatementSet(Side.PRE, seeds)
    assert backward_slice(seed, ir, d).ids == _closure(ir, seeds, d, backward=True)
    assert forward_slice(seed, ir, d).ids == _closure(ir, seeds, d, backward=False)
    if d:
        assert backward_slice(seed, ir, d - 1).ids <= backward_slice(seed, ir, d).ids


def test_enrichment_levels_grow_the_context():
    pytest.importorskip('tree_sitter_c')
    post = PRE.replace('return k;', 'return k - 1;')
    record, snapshots = _record(PRE, post), _snapshots(PRE, post)
    enriched = {level: enrich_commit(record, snapshots, level) for level in ('cf', 'df1', 'df2')}

    assert set(_context_lines(enriched['cf'])) == set()
    assert set(_context_lines(enriched['df1'])) == {5}
    df2 = _context_lines(enriched['df2'])
    assert set(df2) == {4, 5}
    assert df2[4].tag is LineTag.DATAFLOW and df2[4].provenance == 'backward d=2'
    assert df2[5].text == '    int k = m + 1;'

    for result in enriched.values():
        assert [(line.tag, line.text) for line in result.changed_lines()] == [
            (LineTag.DELETED, '    return k;'), (LineTag.ADDED, '    return k - 1;')]
        assert result.fallbacks == []
    section = enriched['df2'].sections[0]
    assert section.function == 'copy'
    assert [line.text for line in section.lines[:3]] == ['--- a/src/buf.c', '+++ b/src/buf.c',
                                                         '@@ -4,3 +4,3 @@ copy']


def test_enclosing_header_and_reaching_definition():
    pytest.importorskip('tree_sitter_c')
    post = PRE.replace('dst[0] = n;', 'dst[0] = n - 1;')
    record, snapshots = _record(PRE, post), _snapshots(PRE, post)

    cf = _context_lines(enrich_commit(record, snapshots, 'cf'))
    assert set(cf) == {6}
    assert cf[6].tag is LineTag.CONTROL and cf[6].provenance == 'enclosure'

    df1 = _context_lines(enrich_commit(record, snapshots, 'df1'))
    assert set(df1) == {3, 6}
    assert df1[3].tag is LineTag.DATAFLOW and df1[3].provenance == 'backward d=1'


def test_comment_only_change_produces_nothing():
    pytest.importorskip('tree_sitter_c')
    post = PRE.replace('return k;', 'return k; /* result */')
    enriched = enrich_commit(_record(PRE, post), _snapshots(PRE, post), 'df1')
    assert enriched.sections == []
    assert enriched.render(with_message=False) == ''


def test_unanalysable_files_fall_back_to_raw_diff():
    pytest.importorskip('tree_sitter_c')
    readme = compute_unified_diff('old\n', 'new\n', 3, 'README.md', 'README.md')
    source = compute_unified_diff('int a = 1; // one\n', 'int a = 2; // two\n', 3, 'src/a.c', 'src/a.c')
    diff = render_unified_diff(CommitDiff(files=(readme, source)))
    record = CommitRecord(repo='github.com/acme/a', sha='b' * 40, label=Label.NON_VFC, diff=diff)
    enriched = enrich_commit(record, None, 'df1')
    assert enriched.metadata['fallbacks'] == [{'path': 'README.md', 'reason': 'unsupported-language'},
                                              {'path': 'src/a.c', 'reason': 'missing-snapshot'}]
    assert [section.fallback for section in enriched.sections] == ['unsupported-language', 'missing-snapshot']
    assert [(line.tag, line.text) for line in enriched.changed_lines()] == [
        (LineTag.DELETED, 'old'), (LineTag.ADDED, 'new'),
        (LineTag.DELETED, 'int a = 1;'), (LineTag.ADDED, 'int a = 2;')]

def test_fallback_context_lines_name_the_reason():
    readme = compute_unified_diff('a\nb\nc\n', 'a\nB\nc\n', 3, 'README.md', 'README.md')
    record = CommitRecord(repo='github.com/acme/a', sha='d' * 40, label=Label.NON_VFC,
                          diff=render_unified_diff(CommitDiff(files=(readme,))))
    context = enrich_commit(record, None, 'df1').context_lines()
    assert [(line.tag, line.provenance, line.text) for line in context] == [
        (LineTag.CONTEXT, 'fallback:unsupported-language', 'a'),
        (LineTag.CONTEXT, 'fallback:unsupported-language', 'c')]



def test_unparseable_diff_is_an_enrichment_error():
    record = CommitRecord(repo='github.com/acme/a', sha='c' * 40, label=Label.VFC,
                          diff='--- a/x.c\n+++ b/x.c\n@@ -1,3 +1,3 @@\n a\n')
    with pytest.raises(EnrichmentError):
        enrich_commit(record, None)


def test_enriched_record_form():
    pytest.importorskip('tree_sitter_c')
    post = PRE.replace('return k;', 'return k - 1;')
    enriched = enrich_commit(_record(PRE, post), _snapshots(PRE, post), 'df2', with_message=True)
    data = enriched.to_record()
    assert data['level'] == 'df2'
    assert data['message'] == 'Fix off-by-one'
    assert {'text': '    int m = n * 2;', 'tag': 'ctx-dataflow', 'provenance': 'backward d=2', 'old_lineno': 4,
            'new_lineno': 4} in data['sections'][0]['lines']

    rebuilt = EnrichedDiff.from_record(data, record_id='x')
    assert rebuilt.render() == enriched.render()
    assert rebuilt.as_document() == enriched.as_document()
    assert enriched.render().splitlines()[0] == 'Fix off-by-one'
    with pytest.raises(SchemaError):
        EnrichedDiff.from_record({'sections': []})


def test_representations():
    pytest.importorskip('tree_sitter_c')
    post = PRE.replace('return k;', 'return k - 1; // fixed')
    record, snapshots = _record(PRE, post), _snapshots(PRE, post)

    message = representation_document(record, 'message', snapshots)
    assert {line.line_class for line in message.lines} == {LineClass.MESSAGE}

    diff = representation_document(record, Representation.DIFF, snapshots)
    assert LineClass.MESSAGE not in {line.line_class for line in diff.lines}
    assert not any('fixed' in line.text for line in diff.lines)

    commit = representation_document(record, 'commit', snapshots)
    assert commit.lines[0].text == 'Fix off-by-one'
    assert commit.token_counts().change == diff.token_counts().change

    cf = representation_document(record, 'cf', snapshots)
    assert cf.token_counts().change == diff.token_counts().change
    assert cf.token_counts().context < diff.token_counts().context

    assert Representation.DF1.level is EnrichmentLevel.DF1
    assert Representation.COMMIT.level is None
    with pytest.raises(ConfigurationError):
        Representation.parse('ast')


LEAK = ('int handle(int n)\n'
        '{\n'
        '    char *buf = malloc(n);\n'
        '    if (buf == NULL)\n'
        '        return -1;\n'
        '    if (n > 16) {\n'
        '        fill(buf, n);\n'
        '        return 0;\n'
        '    }\n'
        '    log_short(n);\n'
        '    return 1;\n'
        '}\n')


def test_leak_fix_context_by_level():
    pytest.importorskip('tree_sitter_c')
    post = LEAK.replace('        return 0;\n', '        free(buf);\n        return 0;\n')
    record, snapshots = _record(LEAK, post, message='Free the buffer'), _snapshots(LEAK, post)
    enriched = {level: enrich_commit(record, snapshots, level) for level in ('cf', 'df1', 'df2')}

    for result in enriched.values():
        assert [(line.tag, line.text) for line in result.changed_lines()] == [(LineTag.ADDED, '        free(buf);')]
    cf = _context_lines(enriched['cf'])
    assert set(cf) == {6}
    assert (cf[6].tag, cf[6].provenance, cf[6].text) == (LineTag.CONTROL, 'enclosure', '    if (n > 16) {')

    df1 = _context_lines(enriched['df1'])
    assert set(df1) == {3, 6}
    assert (df1[3].tag, df1[3].provenance, df1[3].text) == (LineTag.DATAFLOW, 'backward d=1',
                                                            '    char *buf = malloc(n);')
    assert set(_context_lines(enriched['df2'])) == {3, 6}


TEMPLATE = ('int process(int *data, int len, int limit)\n'
            '{\n'
            '    int total = 0;\n'
            '    int count = 0;\n'
            '    for (int i = 0; i < len; i++) {\n'
            '        int value = data[i] * 2;\n'
            '        if (value > limit) {\n'
            '            count++;\n'
            '            total += value;\n'
            '        } else {\n'
            '            total -= 1;\n'
            '        }\n'
            '    }\n'
            '    int mean = count ? total / count : 0;\n'
            '    while (mean > limit) {\n'
            '        mean = mean / 2;\n'
            '    }\n'
            '    return mean + total;\n'
            '}\n')

EDITS = (('* 2;', '* 3;'), ('count++;', 'count += 2;'), ('total -= 1;', 'total -= 2;'), ('mean / 2;', 'mean / 4;'),
         ('return mean + total;', 'return mean - total;'), ('int total = 0;', 'int total = 1;'),
         ('i < len;', 'i <= len;'), ('value > limit', 'value >= limit'), ('total += value;', 'total += value + 1;'),
         ('mean > limit', 'mean >= limit'))


def _template_commits():
    chosen = [(edit,) for edit in EDITS] + [(EDITS[i], EDITS[j]) for i in range(len(EDITS))
                                            for j in range(i + 1, len(EDITS), 3)]
    for edits in chosen:
        post = TEMPLATE
        for old, new in edits:
            post = post.replace(old, new)
        yield post


def _context_keys(enriched):
    return {(line.old_lineno, line.new_lineno) for line in enriched.context_lines()}


def test_levels_are_nested_over_a_synthetic_corpus():
    pytest.importorskip('tree_sitter_c')
    grew = 0
    for post in _template_commits():
        record, snapshots = _record(TEMPLATE, post, path='src/process.c'), _snapshots(TEMPLATE, post, 'src/process.c')
        diff_changes = [line for hunk in compute_unified_diff(TEMPLATE, post, 3).hunks for line in hunk.lines
                        if line.kind in (LineKind.ADDED, LineKind.DELETED)]
        levels = [enrich_commit(record, snapshots, level) for level in ('cf', 'df1', 'df2')]
        for result in levels:
            assert [line.text for line in result.changed_lines()] == [line.text for line in diff_changes]
        cf, df1, df2 = (_context_keys(result) for result in levels)
        assert cf <= df1 <= df2
        totals = [result.as_document().token_counts().total for result in levels]
        assert totals == sorted(totals)
        grew += len(df1) > len(cf)
    assert grew > 0


def test_enrichment_is_deterministic():
    pytest.importorskip('tree_sitter_c')
    post = TEMPLATE.replace('return mean + total;', 'return mean - total;').replace('* 2;', '* 3;')
    outputs = []
    for _ in range(2):
        enriched = enrich_commit(_record(TEMPLATE, post), _snapshots(TEMPLATE, post), 'df2', with_message=True)
        outputs.append((enriched.render(), json.dumps(enriched.to_record(), sort_keys=True)))
    assert outputs[0] == outputs[1]


def test_unchanged_lines_of_a_changed_statement():
    pytest.importorskip('tree_sitter_c')
    pre = PRE.replace('    int k = m + 1;\n', '    int k = m +\n        1;\n')
    post = pre.replace('        1;\n', '        2;\n')
    enriched = enrich_commit(_record(pre, post), _snapshots(pre, post), 'cf')
    assert [(line.tag, line.text) for line in enriched.changed_lines()] == [
        (LineTag.DELETED, '        1;'), (LineTag.ADDED, '        2;')]
    statement = _context_lines(enriched)[5]
    assert (statement.tag, statement.provenance, statement.text) == (LineTag.STATEMENT, 'changed statement',
                                                                    '    int k = m +')
    assert statement.render() == ' ' + '    int k = m +'


def test_invalid_snapshot_bytes_mark_the_result_lossy():
    pytest.importorskip('tree_sitter_c')
    pre = '// caf\ufffd\n' + PRE
    post = pre.replace('return k;', 'return k - 1;')
    raw = StaticSnapshots.single({'src/buf.c': pre.encode('utf-8').replace('\ufffd'.encode('utf-8'), b'\xff')},
                                 {'src/buf.c': post.encode('utf-8').replace('\ufffd'.encode('utf-8'), b'\xff')})
    record = _record(pre, post)
    assert not record.lossy
    assert enrich_commit(record, raw, 'df1').metadata['lossy'] is True
    assert enrich_commit(record, _snapshots(pre, post), 'df1').metadata['lossy'] is False

    _, output, error = enrich_record(record, raw, 'df1', False, 3, False)
    assert error is None and output['lossy'] is True
