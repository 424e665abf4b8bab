import json
import os

import pytest

from vfcorpus.__main__ import main
from vfcorpus.app import CorpusApp
from vfcorpus.corpus import FileCacheSnapshotProvider
from vfcorpus.diff import CommitDiff, compute_unified_diff, render_unified_diff
from vfcorpus.tasks.base import manifest_path


def _row(i, label='NonVFC', repo='github.com/acme/lib', **extra):
    row = {'repo': repo, 'sha': '%040x' % i, 'label': label, 'timestamp': 1000 + i}
    row.update(extra)
    return row


def _corpus(n=30, vfc=10):
    return [_row(i, 'VFC' if i < vfc else 'NonVFC') for i in range(n)]


def _read_json(path):
    with open(path, 'r', encoding='utf-8') as fp:
        return json.load(fp)


def _read_lines(path):
    with open(path, 'r', encoding='utf-8') as fp:
        return [json.loads(line) for line in fp if line.strip()]


def _diff(path, pre, post):
    return render_unified_diff(CommitDiff(files=(compute_unified_diff(pre, post, 3, path, path),)))


def test_split_is_reproducible(write_jsonl, tmp_path):
    records = write_jsonl('records.jsonl', _corpus())
    first, second = str(tmp_path / 'first.jsonl'), str(tmp_path / 'second.jsonl')
    assert main(['--quiet', 'split', records, '-o', first, '--seed', '3']) == 0
    assert main(['--quiet', 'split', records, '-o', second, '--seed', '3']) == 0
    with open(first, 'rb') as a, open(second, 'rb') as b:
        assert a.read() == b.read()

    rows = _read_lines(first)
    assert len(rows) == 30 and set(rows[0]) == {'id', 'split'}
    manifest = _read_json(manifest_path(first))
    assert manifest['command'] == 'split'
    assert manifest['counts']['train'] == 18
    assert manifest['counts']['unassigned'] == 0
    assert manifest['config']['seed'] == 3
    assert len(manifest['inputs'][0]['sha256']) == 64
    assert manifest['details']['split']['strategy'] == 'random'


def test_config_file_and_flag_precedence(write_jsonl, tmp_path):
    records = write_jsonl('records.jsonl', _corpus())
    config_file = tmp_path / 'config.json'
    config_file.write_text(json.dumps({'strategy': 'temporal'}), encoding='utf-8')

    output = str(tmp_path / 'temporal.jsonl')
    assert main(['--quiet', '--config-file', str(config_file), 'split', records, '-o', output]) == 0
    assert _read_json(manifest_path(output))['details']['split']['strategy'] == 'temporal'

    output = str(tmp_path / 'random.jsonl')
    assert main(['--quiet', '--config-file', str(config_file), 'split', records, '-o', output,
                 '--strategy', 'random']) == 0
    assert _read_json(manifest_path(output))['details']['split']['strategy'] == 'random'


def test_configuration_errors_exit_with_two(write_jsonl, tmp_path, monkeypatch):
    records = write_jsonl('records.jsonl', _corpus())
    output = str(tmp_path / 'out.jsonl')
    assert main(['--quiet', 'split', records, '-o', output, '--fractions', '0.5,0.5,0.5']) == 2
    assert not os.path.exists(output)
    assert main(['--quiet', 'enrich', records, '-o', output, '--snapshot-store', str(tmp_path / 'missing')]) == 2
    assert not os.path.exists(output)

    monkeypatch.setenv('VFC_JOBS', '0')
    assert main(['--quiet', 'split', records, '-o', output]) == 2
    assert not os.path.exists(output)


def test_usage_errors_exit_with_two():
    assert main([]) == 2
    assert main(['--quiet', 'shuffle', 'in.jsonl']) == 2


def test_filter_removes_partial_output_on_bad_line(write_jsonl, tmp_path):
    records = write_jsonl('records.jsonl', [_row(1, 'VFC'), '{"repo": ', _row(2)])
    output = str(tmp_path / 'filtered.jsonl')
    assert main(['--quiet', 'filter', records, '-o', output, '--has-cve']) == 1
    assert not os.path.exists(output)
    assert not os.path.exists(manifest_path(output))


def test_filter_keeps_matching_records(write_jsonl, tmp_path):
    records = write_jsonl('records.jsonl', [_row(1, 'VFC', cve_ids=['CVE-2021-0001']), _row(2), _row(3)])
    output = str(tmp_path / 'filtered.jsonl')
    assert main(['--quiet', 'filter', records, '-o', output, '--has-cve']) == 0
    assert [row['sha'] for row in _read_lines(output)] == ['%040x' % 1]
    manifest = _read_json(manifest_path(output))
    assert manifest['counts'] == {'input': 3, 'output': 1}
    assert manifest['details']['criteria'] == {'has_cve': True}


def test_ingest_skips_invalid_lines(write_jsonl, tmp_path):
    raw = write_jsonl('raw.jsonl', [_row(1, 'VFC', repo='https://github.com/Acme/Lib.git'), 'not json',
                                    {'repo': 'acme/lib', 'label': 'VFC'}, _row(2)])
    output = str(tmp_path / 'records.jsonl')
    assert main(['--quiet', 'ingest', raw, '-o', output]) == 0
    rows = _read_lines(output)
    assert [row['repo'] for row in rows] == ['github.com/acme/lib', 'github.com/acme/lib']
    manifest = _read_json(manifest_path(output))
    assert manifest['counts'] == {'records': 2, 'violations': 2}
    assert len(manifest['details']['violations']) == 2

    broken = write_jsonl('broken.jsonl', ['not json', '{"label": "VFC"}'])
    output = str(tmp_path / 'nothing.jsonl')
    assert main(['--quiet', 'ingest', broken, '-o', output]) == 1
    assert not os.path.exists(output)


def test_dedup_merges_mirrors(write_jsonl, tmp_path):
    diff = _diff('src/a.c', 'int x = 0;\n', 'int x = 1;\n')
    records = write_jsonl('records.jsonl', [_row(1, 'VFC', diff=diff, cve_ids=['CVE-2020-0001']),
                                            _row(1, 'VFC', repo='gitlab.com/mirror/lib', diff=diff),
                                            _row(2, diff=_diff('src/b.c', 'int y;\n', 'long y;\n'))])
    output = str(tmp_path / 'unique.jsonl')
    assert main(['--quiet', 'dedup', records, '-o', output]) == 0
    assert len(_read_lines(output)) == 2
    counts = _read_json(manifest_path(output))['counts']
    assert counts['input'] == 3 and counts['output'] == 2


def test_eval_reports_f1_and_pd_s(write_jsonl, tmp_path):
    predictions = write_jsonl('predictions.jsonl', [
        {'id': 'a', 'score': 0.9, 'label': 'VFC'}, {'id': 'b', 'score': 0.4, 'label': 'VFC'},
        {'id': 'c', 'score': 0.6, 'label': 'NonVFC'}, {'id': 'd', 'score': 0.1, 'label': 'NonVFC'}])
    output = str(tmp_path / 'eval.json')
    assert main(['--quiet', 'eval', predictions, '-o', output, '--sweep']) == 0
    report = _read_json(output)
    assert report['f1'] == 0.5
    assert report['pd_s'] == 0.5
    assert report['pd_s_by_r']['0'] == 0.5
    assert report['pd_s_by_r']['0.005'] == 0.5
    assert len(report['sweep']) == 5


def test_enrich_then_truncate(write_jsonl, tmp_path):
    pytest.importorskip('tree_sitter_c')
    pre = ('int copy(char *dst, int len)\n'
           '{\n'
           '    int n = len;\n'
           '    int k = n + 1;\n'
           '    return k;\n'
           '}\n')
    post = pre.replace('return k;', 'return k - 1;')
    store = tmp_path / 'store'
    store.mkdir()
    provider = FileCacheSnapshotProvider(str(store))
    sha = 'a' * 40
    provider.store('github.com/acme/buf', sha, 'pre', 'src/buf.c', pre)
    provider.store('github.com/acme/buf', sha, 'post', 'src/buf.c', post)
    records = write_jsonl('records.jsonl', [{'repo': 'github.com/acme/buf', 'sha': sha, 'label': 'VFC',
                                             'message': 'Fix length', 'diff': _diff('src/buf.c', pre, post)}])

    enriched = str(tmp_path / 'enriched.jsonl')
    assert main(['--quiet', 'enrich', records, '-o', enriched, '--level', 'df1',
                 '--snapshot-store', 'cache:%s' % store]) == 0
    rows = _read_lines(enriched)
    assert len(rows) == 1 and rows[0]['label'] == 'VFC'
    assert '    int k = n + 1;' in rows[0]['text']
    manifest = _read_json(manifest_path(enriched))
    assert manifest['details']['snapshot_backend'] == 'file-cache'
    assert manifest['counts'] == {'records': 1, 'skipped': 0, 'fallback_files': 0}

    truncated = str(tmp_path / 'truncated.jsonl')
    assert main(['--quiet', 'truncate', enriched, '-o', truncated, '--limit', '8']) == 0
    reports = [row['report'] for row in _read_lines(truncated)]
    assert all(report['kept_tokens'] <= 8 for report in reports)
    assert reports[0]['strategy'] == 'context-aware'


def test_stats_with_truncation_comparison(write_jsonl, tmp_path):
    rows = [_row(i, 'VFC' if i % 2 else 'NonVFC',
                 diff=_diff('README.md', 'line %d\n' % i, 'line %d changed\nand more text here\n' % i))
            for i in range(4)]
    records = write_jsonl('records.jsonl', rows)
    output = str(tmp_path / 'stats.json')
    assert main(['--quiet', 'stats', records, '-o', output, '--limits', '4,8']) == 0
    report = _read_json(output)
    assert report['records'] == report['accounted'] == 4
    assert report['vfc_fraction'] == 0.5
    assert report['concentration']['projects'] == 1
    assert [entry['limit'] for entry in report['truncation']] == [4, 8]
    assert report['classes']['change']['median'] > 0


def test_temporal_scan(write_jsonl, tmp_path):
    rows = [_row(i, 'VFC' if i % 4 == 0 else 'NonVFC', repo='github.com/acme/x' if i < 10 else 'github.com/acme/y')
            for i in range(20)]
    records = write_jsonl('records.jsonl', rows)
    output = str(tmp_path / 'scan.json')
    assert main(['--quiet', 'temporal-scan', records, '-o', output]) == 0
    report = _read_json(output)
    assert report['records'] == 20
    assert len(report['windows']) == 9
    assert report['windows'][0]['unseen_project_fraction'] == 0.5


def test_eval_with_discrete_predictions(write_jsonl, tmp_path):
    predictions = write_jsonl('predictions.jsonl', [
        {'id': 'a', 'score': 1, 'label': 'VFC'}, {'id': 'b', 'score': 0, 'label': 'NonVFC'},
        {'id': 'c', 'score': 0, 'label': 'VFC'}])
    output = str(tmp_path / 'eval.json')
    assert main(['--quiet', 'eval', predictions, '-o', output]) == 0
    assert _read_json(output)['pd_s'] is None

    assert main(['--quiet', 'eval', predictions, '-o', output, '--allow-discrete']) == 0
    report = _read_json(output)
    assert report['pd_s'] == 0.5
    assert report['pd_s_by_r']['0.1'] == 0.5


def test_server_flags_are_not_offered(write_jsonl, tmp_path):
    records = write_jsonl('records.jsonl', _corpus())
    output = str(tmp_path / 'out.jsonl')
    for flag in ('--host', '--credential-file', '--token', '--oauth2-token'):
        assert main(['--quiet', flag, 'x', 'split', records, '-o', output]) == 2
    assert not os.path.exists(output)
    app = CorpusApp('vfc', None)
    assert not {'host', 'credential_file', 'token', 'oauth2_token'} & {a.dest for a in app.parser._actions}
