import re

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from spme_ident.parameters import ParameterSet
from spme_ident.theta import ThetaVector

settings.register_profile("default", deadline=None, max_examples=50,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@pytest.fixture(scope="session")
def params():
    return ParameterSet()


@pytest.fixture(scope="session")
def theta(params):
    return ThetaVector.from_params(params)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# ------------------------------------------------------------ acceptance report

_DETAILS = pytest.StashKey[dict]()
_CRITERION = re.compile(r"test_criterion_(\d+)")


@pytest.fixture
def verdict(request):
    """Attach a one-line detail to the running acceptance criterion."""
    details = request.config.stash.setdefault(_DETAILS, {})

    def record(text):
        details[request.node.name] = text
        print(text)
    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    details = config.stash.get(_DETAILS, {})
    lines = {}
    for outcome in ("passed", "failed", "error"):
        for rep in terminalreporter.stats.get(outcome, []):
            name = getattr(rep, "nodeid", "").rsplit("::", 1)[-1]
            m = _CRITERION.match(name)
            if m is None or (outcome == "passed" and rep.when != "call"):
                continue
            status = "PASS" if outcome == "passed" else "FAIL"
            if lines.get(int(m.group(1)), "").startswith("FAIL"):
                continue
            lines[int(m.group(1))] = f"{status}  criterion {m.group(1)}: {details.get(name, '')}"
    if lines:
        terminalreporter.write_sep("=", "acceptance criteria")
        for k in sorted(lines):
            terminalreporter.write_line(lines[k])
