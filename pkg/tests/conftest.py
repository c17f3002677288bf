import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from smh.mode import find_mode
from smh.models import LogisticRegression, RobustLinearRegression, build_model, generate_synthetic

settings.register_profile(
    "repo", deadline=None, max_examples=50,
    suppress_health_check=[HealthCheck.too_slow, HealthCheck.function_scoped_fixture])
settings.load_profile("repo")


def make_problem(kind, n, d, seed=0):
    model = build_model(generate_synthetic(n, d, kind, seed=seed), kind)
    return model, find_mode(model, rng=seed)


@pytest.fixture(scope="session")
def logistic_small():
    return make_problem(LogisticRegression(), 20, 3, seed=1)


@pytest.fixture(scope="session")
def robust_small():
    return make_problem(RobustLinearRegression(4.0), 20, 3, seed=2)


@pytest.fixture(scope="session", params=["logistic", "robust"])
def small_problem(request, logistic_small, robust_small):
    return logistic_small if request.param == "logistic" else robust_small


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# one PASS/FAIL line per acceptance criterion, printed after the run
_ACCEPTANCE: dict = {}


@pytest.fixture
def criterion(request):
    """Record a criterion's outcome: yields a setter for the detail string."""
    name = request.node.get_closest_marker("criterion").args[0]
    callspec = getattr(request.node, "callspec", None)
    if callspec is not None:
        name = f"{name}[{callspec.id}]"
    info = {"detail": ""}
    yield info
    rep = getattr(request.node, "rep_call", None)
    passed = rep is not None and rep.passed
    _ACCEPTANCE[name] = (passed, info["detail"])
    print(f"\n{'PASS' if passed else 'FAIL'} {name} {info['detail']}")


@pytest.hookimpl(hookwrapper=True, tryfirst=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    if rep.when == "call":
        item.rep_call = rep


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for name in sorted(_ACCEPTANCE):
        passed, detail = _ACCEPTANCE[name]
        terminalreporter.write_line(f"{'PASS' if passed else 'FAIL'} {name}  {detail}")
