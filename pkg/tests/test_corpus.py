import json
from collections import defaultdict

import pytest
from hypothesis import assume, given, strategies as st

from vfcorpus.corpus import CommitRecord, FileCacheSnapshotProvider, FilterCriteria, Label, LabelSource, Split, \
    StaticSnapshots, apply_group_mapping, dedup_exact, dedup_semantic, filter_records, fingerprint, ingest, \
    js_divergence, normalize_repo, open_snapshot_provider, preset, sliding_window_scan, split_cve, \
    split_group_stratified, split_random, split_records, split_temporal, write_records
from vfcorpus.corpus.splits import allocate
from vfcorpus.corpus.temporal import window_offsets
from vfcorpus.errors import ConfigurationError, InvalidDistributionError, SchemaError, SplitError
from vfcorpus.syntax import Language

DIFF = ('diff --git a/src/a.c b/src/a.c\n'
        'index 83db48f..bf269f4 100644\n'
        '--- a/src/a.c\n'
        '+++ b/src/a.c\n'
        '@@ -1 +1 @@\n'
        '-int x = 0;\n'
        '+int x = 1;\n')


def _record(i, label=Label.NON_VFC, repo='github.com/acme/lib', timestamp=None, cve_ids=(), group_id=None,
            diff='', sources=(), label_source=()):
    return CommitRecord(repo=repo, sha='%040x' % i, label=label, timestamp=timestamp, diff=diff,
                        cve_ids=frozenset(cve_ids), group_id=group_id or repo.rsplit('/', 1)[-1],
                        sources=frozenset(sources), label_source=frozenset(label_source))


def test_normalize_repo():
    assert normalize_repo('https://GitHub.com/Acme/Lib.git') == 'github.com/acme/lib'
    assert normalize_repo('git@github.com:acme/lib.git') == 'github.com/acme/lib'
    assert normalize_repo('acme/lib/') == 'github.com/acme/lib'
    with pytest.raises(SchemaError):
        normalize_repo('lib')


def test_record_from_dict():
    record = CommitRecord.from_dict({'repo': 'https://github.com/Acme/Lib', 'sha': 'A' * 40, 'label': 'vfc',
                                     'cve_ids': ['cve-2020-1234'], 'diff': DIFF, 'label_source': 'Manual',
                                     'cwe_ids': ['CWE-787']})
    assert record.record_id == 'github.com/acme/lib@' + 'a' * 40
    assert record.is_vfc
    assert record.cve_ids == {'CVE-2020-1234'}
    assert record.languages == {Language.C}
    assert record.label_source == {LabelSource.MANUAL}
    assert record.group_id == 'lib'
    assert record.to_dict()['cwe_ids'] == ['CWE-787']
    assert CommitRecord.from_dict(record.to_dict()) == record


@pytest.mark.parametrize('data', [
    {'repo': 'acme/lib', 'label': 'vfc'},
    {'repo': 'acme/lib', 'sha': 'xyz', 'label': 'vfc'},
    {'repo': 'acme/lib', 'sha': 'a' * 40, 'label': 'maybe'},
    {'repo': 'acme/lib', 'sha': 'a' * 40, 'label': 'vfc', 'timestamp': 'yesterday'},
    {'repo': 'acme/lib', 'sha': 'a' * 40, 'label': 'vfc', 'label_source': 'oracle'},
])
def test_invalid_records(data):
    with pytest.raises(SchemaError):
        CommitRecord.from_dict(data)


def test_ingest_reports_violations(tmp_path):
    path = tmp_path / 'records.jsonl'
    lines = [json.dumps({'repo': 'acme/lib', 'sha': 'b' * 40, 'label': 0, 'timestamp': 10}), '',
             '{not json', json.dumps({'repo': 'acme/lib', 'label': 1})]
    path.write_text('\n'.join(lines) + '\n', encoding='utf-8')
    result = ingest(str(path))
    assert len(result) == 1
    assert [v.lineno for v in result.violations] == [3, 4]
    assert 'sha' in str(result.violations[1])

    out = tmp_path / 'out.jsonl'
    assert write_records(result, str(out)) == 1
    assert ingest(str(out)).records == result.records


def test_group_mapping_folds_forks():
    records = [_record(1, repo='github.com/fork/lib'), _record(2, repo='github.com/acme/lib')]
    mapped = apply_group_mapping(records, {'https://github.com/fork/lib': 'acme-lib'})
    assert [r.group_id for r in mapped] == ['acme-lib', 'lib']


def test_exact_dedup_merges_and_drops_conflicts():
    records = [
        _record(1, sources=['a'], cve_ids=['CVE-1']),
        _record(2, label=Label.VFC),
        _record(1, sources=['b']),
        _record(2, label=Label.NON_VFC),
        _record(3),
    ]
    result = dedup_exact(records)
    assert [r.sha[-1] for r in result] == ['1', '3']
    assert result[0].sources == {'a', 'b'}
    assert result[0].cve_ids == {'CVE-1'}
    assert dedup_exact(result) == result


def test_semantic_dedup_collapses_mirrors():
    mirror = DIFF.replace('index 83db48f..bf269f4', 'index 1111111..2222222').replace('int x = 1;', 'int  x = 1; ')
    records = [
        _record(1, repo='github.com/mirror/lib', diff=mirror),
        _record(2, repo='github.com/acme/lib', diff=DIFF, cve_ids=['CVE-2']),
        _record(3, diff=DIFF.replace('1;', '2;')),
        _record(4, diff=''),
        _record(5, diff=''),
    ]
    assert fingerprint(records[0]) == fingerprint(records[1])
    result = dedup_semantic(records)
    assert [r.sha[-1] for r in result] == ['2', '3', '4', '5']
    assert dedup_semantic(result) == result


def test_filters_and_presets():
    c_manual = _record(1, label_source=[LabelSource.MANUAL], timestamp=100).replace(
        languages=frozenset([Language.C]), extra={'cwe_ids': ['cwe-787']})
    java_tool = _record(2, label_source=[LabelSource.TOOL], timestamp=200, cve_ids=['CVE-3']).replace(
        languages=frozenset([Language.JAVA]))
    records = [c_manual, java_tool]

    assert filter_records(records, preset('manual-c-cpp')) == [c_manual]
    assert filter_records(records, preset('all')) == records
    assert filter_records(records, FilterCriteria(since=100, until=200)) == [c_manual]
    assert filter_records(records, FilterCriteria(has_cve=True)) == [java_tool]
    assert filter_records(records, FilterCriteria(cwe_ids=frozenset(['CWE-787']))) == [c_manual]
    assert filter_records([_record(3)], FilterCriteria(since=0)) == []
    assert FilterCriteria().is_empty
    with pytest.raises(ConfigurationError):
        preset('everything')


def test_allocate_uses_largest_remainders():
    assert allocate(10, (0.6, 0.2, 0.2)) == [6, 2, 2]
    assert allocate(7, (0.6, 0.2, 0.2)) == [4, 2, 1]
    assert sum(allocate(1001, (0.7, 0.15, 0.15))) == 1001


def _labelled(count, vfc_every):
    return [_record(i, label=Label.VFC if i % vfc_every == 0 else Label.NON_VFC, timestamp=1000 - i)
            for i in range(count)]


def test_random_split_is_stratified_and_seeded():
    records = [_record(i, label=Label.VFC if i < 30 else Label.NON_VFC) for i in range(100)]
    first = split_random(records, seed=7)
    assert first.sizes() == {'train': 60, 'val': 20, 'test': 20}
    by_id = {r.record_id: r for r in records}
    vfc = {split.value: sum(1 for m in first.members(split) if by_id[m].is_vfc) for split in Split}
    assert vfc == {'train': 18, 'val': 6, 'test': 6}
    assert split_random(records, seed=7).mapping == first.mapping
    assert split_random(records, seed=8).mapping != first.mapping
    assert first.manifest()['seed'] == 7


def test_temporal_split_orders_by_time():
    records = _labelled(10, 3)
    assignment = split_temporal(records)
    newest_first = sorted(records, key=lambda r: r.timestamp, reverse=True)
    assert [assignment.mapping[r.record_id] for r in newest_first[:2]] == [Split.TEST, Split.TEST]
    assert [assignment.mapping[r.record_id] for r in newest_first[-6:]] == [Split.TRAIN] * 6
    with pytest.raises(SplitError):
        split_temporal(records + [_record(99)])


def test_group_split_keeps_groups_together():
    records = []
    index = 0
    for group, size in enumerate([10, 8, 8, 6, 6, 5, 5, 4, 4, 2, 1, 1]):
        for _ in range(size):
            records.append(_record(index, label=Label.VFC if index % 3 == 0 else Label.NON_VFC,
                                   group_id='g%02d' % group))
            index += 1
    assignment = split_group_stratified(records, seed=3)
    splits_by_group = defaultdict(set)
    for record in records:
        splits_by_group[record.group_id].add(assignment.mapping[record.record_id])
    assert all(len(splits) == 1 for splits in splits_by_group.values())
    assert all(size > 0 for size in assignment.sizes().values())
    assert split_group_stratified(records, seed=3).mapping == assignment.mapping

    with pytest.raises(SplitError):
        split_group_stratified([_record(i, group_id='g%d' % (i % 2)) for i in range(10)])

def test_random_split_tracks_ratios_at_scale():
    records = [_record(i, label=Label.VFC if i % 10 < 3 else Label.NON_VFC) for i in range(10000)]
    assignment = split_random(records, seed=5)
    assert assignment.sizes() == {'train': 6000, 'val': 2000, 'test': 2000}
    assert assignment.warnings == []
    for split in Split:
        assert abs(assignment.vuln_ratios[split.value] - assignment.vuln_ratios['global']) <= 0.02


def _grouped_corpus(groups=300):
    records = []
    index = 0
    for group in range(groups):
        size = 1 + (group * 7) % 10
        vfc = (group * 3) % (size + 1)
        for k in range(size):
            records.append(_record(index, label=Label.VFC if k < vfc else Label.NON_VFC, group_id='g%03d' % group))
            index += 1
    return records


def test_group_split_balances_many_small_groups():
    records = _grouped_corpus()
    assignment = split_group_stratified(records, seed=2)
    splits_by_group = defaultdict(set)
    for record in records:
        splits_by_group[record.group_id].add(assignment.mapping[record.record_id])
    assert all(len(splits) == 1 for splits in splits_by_group.values())
    for position, split in enumerate(Split):
        assert abs(assignment.achieved_fractions[split.value] - (0.6, 0.2, 0.2)[position]) <= 0.02
        assert abs(assignment.vuln_ratios[split.value] - assignment.vuln_ratios['global']) <= 0.02
    assert assignment.warnings == []


def test_group_split_with_one_dominant_group():
    records = [_record(i, group_id='big') for i in range(10)]
    records += [_record(10, group_id='a'), _record(11, group_id='b')]
    assignment = split_group_stratified(records, seed=0)
    assert all(size > 0 for size in assignment.sizes().values())
    assert {assignment.mapping[r.record_id] for r in records[:10]} == {Split.TRAIN}
    assert assignment.warnings


def test_cve_split_hits_a_target_ratio():
    records = [_record(i, label=Label.VFC, cve_ids=['CVE-2020-%04d' % i]) for i in range(200)]
    records += [_record(i, label=Label.VFC) for i in range(200, 500)]
    records += [_record(i) for i in range(500, 2000)]
    assignment = split_cve(records, seed=4, vuln_ratio=0.32)
    assert abs(assignment.vuln_ratios['val'] - 0.32) <= 0.02
    assert abs(assignment.vuln_ratios['test'] - 0.32) <= 0.02
    assert assignment.vuln_ratios['target'] == 0.32
    assert not any(assignment.mapping[r.record_id] is Split.TRAIN for r in records if r.cve_ids)
    assert assignment.warnings == []



def test_cve_split_holds_out_mapped_vulnerabilities():
    records = [_record(i, label=Label.VFC, cve_ids=['CVE-%d' % i]) for i in range(10)]
    records += [_record(i, label=Label.VFC) for i in range(10, 15)]
    records += [_record(i) for i in range(15, 40)]
    assignment = split_cve(records, seed=1)
    for record in records:
        if record.cve_ids:
            assert assignment.mapping[record.record_id] in (Split.VAL, Split.TEST)
    assert assignment.sizes() == {'train': 14, 'val': 13, 'test': 13}
    assert assignment.vuln_ratios['target'] == pytest.approx(0.375)

    balanced = split_cve(records, seed=1, vuln_ratio=0.5)
    assert balanced.vuln_ratios['val'] == balanced.vuln_ratios['test'] == 0.5
    with pytest.raises(SplitError):
        split_cve(records[:1] + records[10:], seed=1)


def test_split_argument_errors():
    records = _labelled(10, 2)
    with pytest.raises(SplitError):
        split_random(records[:2])
    with pytest.raises(SplitError):
        split_random(records + records[:1])
    with pytest.raises(ConfigurationError):
        split_random(records, fractions=(0.5, 0.5, 0.5))
    with pytest.raises(ConfigurationError):
        split_records(records, 'alphabetical')
    assert split_records(records, 'temporal').strategy.value == 'temporal'


def test_js_divergence():
    assert js_divergence((0.5, 0.5), (1.0, 0.0)) == pytest.approx(0.311278, abs=1e-6)
    assert js_divergence((0.25, 0.75), (0.25, 0.75)) == pytest.approx(0.0)
    assert js_divergence((1.0, 0.0), (0.0, 1.0)) == pytest.approx(1.0)
    with pytest.raises(InvalidDistributionError):
        js_divergence((0.5, 0.6), (0.5, 0.5))
    with pytest.raises(InvalidDistributionError):
        js_divergence((1.0,), (0.5, 0.5))


def test_sliding_window_scan():
    assert len(window_offsets((0.2, 0.2, 0.2), 0.05)) == 9
    records = [_record(i, timestamp=i, repo='github.com/acme/x' if i < 10 else 'github.com/acme/y',
                       label=Label.VFC if i % 4 == 0 else Label.NON_VFC) for i in range(20)]
    windows = sliding_window_scan(records, scores={0: {'f1': 0.5, 'pd_s': 0.25}})
    assert len(windows) == 9
    first, last = windows[0], windows[-1]
    assert (first.train, first.val, first.test) == ((0, 4), (4, 8), (8, 12))
    assert first.unseen_project_fraction == 0.5
    assert first.jsd == pytest.approx(0.311278, abs=1e-6)
    assert first.test_vuln_rate == 0.25
    assert (first.test_f1, first.test_pd_s) == (0.5, 0.25)
    assert last.test == (16, 20)
    assert last.unseen_project_fraction == 0.0
    assert last.as_dict()['test_f1'] is None
    with pytest.raises(SplitError):
        sliding_window_scan([])
    with pytest.raises(ConfigurationError):
        sliding_window_scan(records, window_fracs=(0.5, 0.5, 0.5))


def test_file_cache_snapshots(tmp_path):
    provider = open_snapshot_provider('cache:%s' % tmp_path)
    assert isinstance(provider, FileCacheSnapshotProvider)
    provider.store('github.com/acme/lib', 'a' * 40, 'pre', 'src/a.c', 'int x;\n')
    provider.store('github.com/acme/lib', 'a' * 40, 'post', 'src/a.c', b'int \xff;\n')
    view = provider.for_commit('github.com/acme/lib', 'a' * 40)
    assert view.pre('src/a.c') == 'int x;\n'
    assert not view.lossy
    assert view.post('src/a.c').startswith('int ')
    assert view.lossy
    assert view.pre('src/missing.c') is None
    assert open_snapshot_provider(None) is None
    with pytest.raises(ConfigurationError):
        open_snapshot_provider(str(tmp_path / 'nowhere'))


def test_static_snapshots_prefer_commit_entries():
    snapshots = StaticSnapshots.single(pre={'a.c': 'any'})
    snapshots.add('r', 's', 'pre', 'a.c', 'exact')
    assert snapshots.for_commit('r', 's').pre('a.c') == 'exact'
    assert snapshots.for_commit('other', 's').pre('a.c') == 'any'


def test_local_git_snapshots(tmp_path):
    git = pytest.importorskip('git')
    repo = git.Repo.init(str(tmp_path))
    actor = git.Actor('Test', 'test@example.com')
    source = tmp_path / 'a.c'
    source.write_text('int x = 0;\n', encoding='utf-8')
    repo.index.add(['a.c'])
    repo.index.commit('initial', author=actor, committer=actor)
    source.write_text('int x = 1;\n', encoding='utf-8')
    repo.index.add(['a.c'])
    fix = repo.index.commit('fix', author=actor, committer=actor)

    provider = open_snapshot_provider(str(tmp_path))
    assert provider.backend == 'local-git'
    view = provider.for_commit('github.com/acme/lib', fix.hexsha)
    assert view.pre('a.c') == 'int x = 0;\n'
    assert view.post('a.c') == 'int x = 1;\n'
    assert view.post('missing.c') is None


def _normalized(weights):
    total = float(sum(weights))
    return [w / total for w in weights]


@given(pair=st.integers(1, 8).flatmap(lambda n: st.tuples(st.lists(st.integers(0, 9), min_size=n, max_size=n),
                                                           st.lists(st.integers(0, 9), min_size=n, max_size=n))))
def test_js_divergence_is_symmetric_and_bounded(pair):
    a, b = pair
    assume(sum(a) and sum(b))
    p, q = _normalized(a), _normalized(b)
    value = js_divergence(p, q)
    assert 0.0 <= value <= 1.0
    assert value == pytest.approx(js_divergence(q, p), abs=1e-12)
    assert js_divergence(p, p) == pytest.approx(0.0, abs=1e-12)


@given(labels=st.lists(st.booleans(), min_size=5, max_size=60), seed=st.integers(0, 1000),
       strategy=st.sampled_from(['random', 'temporal']))
def test_splits_partition_the_records(labels, seed, strategy):
    records = [_record(i, label=Label.VFC if vfc else Label.NON_VFC, timestamp=i % 7)
               for i, vfc in enumerate(labels)]
    assignment = split_records(records, strategy, seed=seed)
    assert set(assignment.mapping) == {r.record_id for r in records}
    assert sum(assignment.sizes().values()) == len(records)
