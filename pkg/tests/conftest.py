import os

import numpy as np
import pytest

ACCEPTANCE = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE):
        ok, msg = ACCEPTANCE[key]
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'} {key}: {msg}")


@pytest.fixture
def record():
    def _record(key, ok, msg):
        ACCEPTANCE[key] = (bool(ok), msg)
        print(f"{'PASS' if ok else 'FAIL'} {key}: {msg}")
    return _record


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def tmp_cwd(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    return tmp_path


os.environ.setdefault("PYTHONHASHSEED", "0")
