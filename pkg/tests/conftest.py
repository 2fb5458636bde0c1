import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from tmsqkd.symplectic import apply_symplectic, beamsplitter, direct_sum, squeezer

settings.register_profile(
    "default", deadline=None, max_examples=60,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("default")


def random_symplectic(rng, n, depth=None):
    """Product of random beamsplitters, squeezers and phase-free mixers."""
    s = np.eye(2 * n)
    for _ in range(depth or 3 * n):
        if n > 1 and rng.random() < 0.6:
            a, b = rng.choice(n, 2, replace=False)
            s = beamsplitter(rng.uniform(0, 1), int(a), int(b), n) @ s
        else:
            s = squeezer(rng.uniform(-1, 1), int(rng.integers(n)), n) @ s
    return s


def random_physical(rng, n, max_nu=5.0):
    """Thermal product state pushed through a random symplectic map."""
    nus = rng.uniform(1.0, max_nu, n)
    gamma = direct_sum(*[np.diag([v, v]) for v in nus])
    return apply_symplectic(gamma, random_symplectic(rng, n)), np.sort(nus)[::-1]


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


ACCEPTANCE = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "acceptance(number, title): numbered acceptance criterion")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("acceptance")
    if mark is None or rep.when == "teardown" or (rep.when == "setup" and rep.passed):
        return
    number, title = mark.args
    ACCEPTANCE[number] = (title, "PASS" if rep.passed else "FAIL")


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE):
        title, verdict = ACCEPTANCE[number]
        terminalreporter.write_line(f"criterion {number:2d}: {verdict}  {title}")
