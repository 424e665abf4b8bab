import json

import pytest

from vfcorpus.errors import ConfigurationError
from vfcorpus.options import PipelineConfig


def test_defaults():
    config = PipelineConfig.load(environ={})
    assert config.level == 'df1'
    assert config.limit == 512
    assert config.r == 0.005
    assert config.fractions == (0.6, 0.2, 0.2)
    assert config.window_fracs == (0.2, 0.2, 0.2)
    assert config.tolerance == 0.02
    assert config.as_dict()['fractions'] == [0.6, 0.2, 0.2]


def test_precedence(tmp_path):
    config_file = tmp_path / 'config.json'
    config_file.write_text(json.dumps({'level': 'cf', 'jobs': 2, 'seed': 11, 'limits': [512, 1024]}),
                           encoding='utf-8')
    config = PipelineConfig.load(str(config_file), environ={'VFC_JOBS': '3'}, overrides={'seed': 5, 'level': None})
    assert config.level == 'cf'
    assert config.jobs == 3
    assert config.seed == 5
    assert config.limits == (512, 1024)


def test_environment_values_are_coerced():
    config = PipelineConfig.load(environ={'VFC_DEBUG': 'true', 'VFC_TOKENIZER': 'builtin'},
                                 overrides={'fractions': '0.8,0.1,0.1', 'full_chain': True})
    assert config.debug is True
    assert config.fractions == (0.8, 0.1, 0.1)
    assert config.full_chain is True


@pytest.mark.parametrize('overrides', [
    {'level': 'df9'},
    {'strategy': 'alphabetical'},
    {'fractions': '0.5,0.5,0.5'},
    {'limit': 0},
    {'limits': '512,0'},
    {'r': 1.5},
    {'tolerance': 1.0},
    {'vuln_ratio': 1.0},
    {'window_fracs': '0.5,0.5,0.5'},
    {'stride': 0},
    {'jobs': 0},
    {'jobs': 'many'},
    {'seed': 1.5},
    {'context_width': -1},
    {'truncation': 'middle-out'},
    {'representation': 'ast'},
    {'tokenizer': 'no-such-tokenizer'},
])
def test_invalid_values(overrides):
    with pytest.raises(ConfigurationError):
        PipelineConfig.load(environ={}, overrides=overrides)


def test_invalid_environment_and_files(tmp_path):
    with pytest.raises(ConfigurationError):
        PipelineConfig.load(environ={'VFC_DEBUG': 'perhaps'})
    with pytest.raises(ConfigurationError):
        PipelineConfig.load(environ={'VFC_SNAPSHOT_STORE': str(tmp_path / 'missing')})
    with pytest.raises(ConfigurationError):
        PipelineConfig.load(str(tmp_path / 'missing.json'), environ={})

    broken = tmp_path / 'broken.json'
    broken.write_text('{"level": ', encoding='utf-8')
    with pytest.raises(ConfigurationError):
        PipelineConfig.load(str(broken), environ={})

    unknown = tmp_path / 'unknown.json'
    unknown.write_text(json.dumps({'colour': 'blue'}), encoding='utf-8')
    with pytest.raises(ConfigurationError) as e:
        PipelineConfig.load(str(unknown), environ={})
    assert 'colour' in str(e.value)


def test_snapshot_store_and_group_map_are_checked(tmp_path):
    config = PipelineConfig.load(environ={'VFC_SNAPSHOT_STORE': 'cache:%s' % tmp_path})
    assert config.snapshot_store == 'cache:%s' % tmp_path
    with pytest.raises(ConfigurationError):
        PipelineConfig.load(environ={}, overrides={'group_map': str(tmp_path / 'groups.json')})
