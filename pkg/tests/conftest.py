import os
import sys

import pytest

sys.path.insert(0, os.path.dirname(__file__))

from logconcave import _accel  # noqa: E402

_ACCEPTANCE = []


def record_acceptance(name: str, ok: bool, detail: str) -> None:
    _ACCEPTANCE.append((name, ok, detail))


@pytest.fixture
def acceptance():
    return record_acceptance


@pytest.fixture(params=["numba", "numpy"])
def backend(request, monkeypatch):
    """Run a test once per kernel backend."""
    if request.param == "numba" and not _accel.HAS_NUMBA:
        pytest.skip("numba not installed")
    monkeypatch.setattr(_accel, "USE_NUMBA", request.param == "numba")
    return request.param


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for name, ok, detail in sorted(_ACCEPTANCE):
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  {name}: {detail}")
