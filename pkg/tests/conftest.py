import os
import sys
from types import SimpleNamespace

import pytest
from hypothesis import HealthCheck, settings

sys.path.insert(0, os.path.dirname(__file__))

settings.register_profile("default", deadline=None, max_examples=50,
                          suppress_health_check=[HealthCheck.too_slow])
settings.register_profile("ci", deadline=None, max_examples=200,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))

_VERDICTS = []


@pytest.fixture
def verdict():
    """Print and record one PASS/FAIL line per acceptance criterion."""

    def record(label, checks):
        ok = all(c[-1] for c in checks)
        detail = "; ".join(f"{name}={value:.4g} {op} {limit:g}" + ("" if passed else " [fail]")
                           for name, value, op, limit, passed in checks)
        line = f"{label} {'PASS' if ok else 'FAIL'}: {detail}"
        print(line)
        _VERDICTS.append(line)
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if _VERDICTS:
        terminalreporter.section("acceptance criteria")
        for line in _VERDICTS:
            terminalreporter.write_line(line)


@pytest.fixture
def make_scenario():
    """Minimal object with the attributes the FDTD builder reads."""

    def make(ground, **mtle):
        from lemp.channel import MtleModel

        return SimpleNamespace(id="test", mtle=MtleModel(**mtle), ground=ground)

    return make
