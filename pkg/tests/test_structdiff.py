import pytest
from hypothesis import given, strategies as st

pytest.importorskip('tree_sitter_c')

from vfcorpus.structdiff import ActionKind, Side, changed_statements, format_actions, match_trees
from vfcorpus.syntax import Language, build_statement_ir, parse_source

PRE = ('int f(int a)\n'
       '{\n'
       '    int b = a;\n'
       '    return b;\n'
       '}\n')


def _tree(text):
    return parse_source(text, Language.C)


def test_identical_trees_match_completely():
    pre, post = _tree(PRE), _tree(PRE)
    mapping = match_trees(pre, post)
    assert mapping.is_identity
    assert len(mapping.pairs) == len(list(pre.nodes()))
    assert format_actions(mapping) == ''


def test_renamed_use_is_an_update():
    post_text = PRE.replace('return b;', 'return a;')
    pre, post = _tree(PRE), _tree(post_text)
    mapping = match_trees(pre, post)
    assert mapping.count(ActionKind.UPDATE) == 1
    assert mapping.count(ActionKind.INSERT) == mapping.count(ActionKind.DELETE) == 0
    update = mapping.actions[0]
    assert (update.pre.label, update.post.label) == ('b', 'a')
    assert format_actions(mapping).startswith('update identifier@4')

    pre_set, post_set = changed_statements(mapping, build_statement_ir(pre), build_statement_ir(post))
    assert pre_set.side is Side.PRE and post_set.side is Side.POST
    assert pre_set.ids == post_set.ids == frozenset([1])


def test_inserted_statement_marks_only_post_side():
    post_text = PRE.replace('    return b;\n', '    b++;\n    return b;\n')
    pre, post = _tree(PRE), _tree(post_text)
    mapping = match_trees(pre, post)
    assert mapping.count(ActionKind.INSERT) > 0
    pre_set, post_set = changed_statements(mapping, build_statement_ir(pre), build_statement_ir(post))
    assert 1 in post_set
    assert 2 not in post_set


def test_missing_side_inserts_everything():
    post = _tree(PRE)
    mapping = match_trees(None, post)
    assert mapping.pairs == []
    assert mapping.count(ActionKind.INSERT) == len(list(post.nodes()))
    pre_set, post_set = changed_statements(mapping, None, build_statement_ir(post))
    assert len(pre_set) == 0
    assert post_set.ids == frozenset([0, 1])


def test_matching_is_deterministic():
    post_text = PRE.replace('int b = a;', 'int b = a * 2;')
    first = format_actions(match_trees(_tree(PRE), _tree(post_text)))
    second = format_actions(match_trees(_tree(PRE), _tree(post_text)))
    assert first == second


_STATEMENTS = ('    int b = a;\n', '    b = b + 1;\n', '    a = b * 2;\n', '    if (a > b) {\n        b = a;\n    }\n',
               '    while (b > 0) {\n        b = b - 1;\n    }\n', '    g(a, b);\n', '    return b;\n', '    a++;\n')


@st.composite
def function_pairs(draw):
    def body():
        return ''.join(draw(st.lists(st.sampled_from(_STATEMENTS), max_size=6)))
    return ('int f(int a, int b)\n{\n' + body() + '}\n', 'int f(int a, int b)\n{\n' + body() + '}\n')


@given(texts=function_pairs())
def test_matching_is_one_to_one_and_kind_preserving(texts):
    mapping = match_trees(_tree(texts[0]), _tree(texts[1]))
    assert all(a.kind == b.kind for a, b in mapping.pairs)
    assert len({id(a) for a, _ in mapping.pairs}) == len(mapping.pairs) == len({id(b) for _, b in mapping.pairs})
