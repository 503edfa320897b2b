import numpy as np
import pytest
from hypothesis import HealthCheck, settings
from hypothesis import strategies as st

from cvwitness.states import squeezed_vacuum

settings.register_profile(
    "default", max_examples=60, deadline=None,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("default")

seeds = st.integers(min_value=0, max_value=2**32 - 1)


def random_psd(rng, d, rank=None):
    A = rng.standard_normal((d, rank or d))
    return A @ A.T


def confidence_fixture() -> np.ndarray:
    """Weakly entangled thermal-squeezed CM whose full-tomography witness value is 0.85."""
    return 0.85 * np.exp(0.2) * squeezed_vacuum(0.1)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# ---- acceptance reporting ---------------------------------------------------

_criteria: dict[int, str] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None or rep.when != "call":
        return
    number, title = mark.args
    detail = "; ".join(str(v) for k, v in item.user_properties if k == "detail")
    verdict = "PASS" if rep.passed else "FAIL"
    _criteria[number] = f"[{verdict}] criterion {number:>2}: {title} ({detail}) [{rep.duration:.1f} s]"


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_criteria):
        terminalreporter.write_line(_criteria[number])
