import json
import os

import pytest
from hypothesis import HealthCheck, settings

settings.register_profile('fast', max_examples=50, deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.register_profile('thorough', max_examples=1000, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile(os.environ.get('HYPOTHESIS_PROFILE', 'fast'))

FIXTURES = os.path.join(os.path.dirname(__file__), 'fixtures')


@pytest.fixture
def fixture_path():
    def _path(name: str) -> str:
        return os.path.join(FIXTURES, name)
    return _path


@pytest.fixture
def two_file_diff(fixture_path) -> str:
    with open(fixture_path('two_file.diff'), 'r', encoding='utf-8', newline='') as fp:
        return fp.read()


@pytest.fixture(autouse=True)
def clean_environment(monkeypatch):
    for name in list(os.environ):
        if name.startswith('VFC_'):
            monkeypatch.delenv(name)


@pytest.fixture
def write_jsonl(tmp_path):
    def _write(name: str, rows) -> str:
        path = tmp_path / name
        with open(path, 'w', encoding='utf-8') as fp:
            for row in rows:
                fp.write(row if isinstance(row, str) else json.dumps(row))
                fp.write('\n')
        return str(path)
    return _write
