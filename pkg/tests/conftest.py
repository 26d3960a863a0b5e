import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from stochnewton.libsvm import synth_logistic, synth_quadratic
from stochnewton.baselines import solve_reference

settings.register_profile("default", max_examples=60, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

_ACCEPT = pytest.StashKey[list]()


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number): acceptance criterion covered by the test")
    config.addinivalue_line("markers", "expected_qualitative: figure-level behaviour, not a numeric claim")
    config.stash[_ACCEPT] = []


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None or rep.when != "call":
        return
    tag = " [EXPECTED-QUALITATIVE]" if item.get_closest_marker("expected_qualitative") else ""
    detail = dict(item.user_properties).get("detail", "")
    status = "PASS" if rep.passed else "FAIL"
    item.config.stash[_ACCEPT].append((marker.args[0], f"criterion {marker.args[0]:>2}: {status}{tag}  {detail}"))


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(_ACCEPT, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(lines):
            terminalreporter.write_line(line)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def logistic4():
    """n=4, d=2 logistic with lambda=0.5 and its reference optimum."""
    problem = synth_logistic(7, 4, 2, 0.5)
    return problem, solve_reference(problem)


@pytest.fixture(scope="session")
def quad5():
    return synth_quadratic(3, 5, 4, 0.5, 5.0)


def fd_gradient(fun, x, eps=1e-6):
    x = np.asarray(x, dtype=float)
    out = np.empty_like(x)
    for j in range(x.size):
        e = np.zeros_like(x)
        e[j] = eps
        out[j] = (fun(x + e) - fun(x - e)) / (2 * eps)
    return out


def fd_jacobian(grad, x, eps=1e-6):
    x = np.asarray(x, dtype=float)
    cols = []
    for j in range(x.size):
        e = np.zeros_like(x)
        e[j] = eps
        cols.append((grad(x + e) - grad(x - e)) / (2 * eps))
    return np.column_stack(cols)
