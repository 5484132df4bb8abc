import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from darkbeam import StokesProfile, SystemParams, VelocityDistribution  # noqa: E402


@pytest.fixture
def params():
    return SystemParams(alpha=20.0, r=0.05, gamma_tilde=50.0)


@pytest.fixture
def ramp():
    return StokesProfile()


@pytest.fixture
def single(params):
    return VelocityDistribution.single(params)


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    results = getattr(mod, "RESULTS", None)
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(results):
        ok, line = results[n]
        terminalreporter.write_line(f"criterion {n} {'PASS' if ok else 'FAIL'} | {line}")
