import os

import pytest
from hypothesis import HealthCheck, settings

from cascade_lab.lattice import build_prototype, scale_and_certify

settings.register_profile(
    "repo",
    deadline=None,
    derandomize=True,
    max_examples=int(os.environ.get("CASCADE_LAB_HYPOTHESIS_EXAMPLES", "60")),
    suppress_health_check=[HealthCheck.too_slow, HealthCheck.data_too_large],
)
settings.load_profile("repo")


@pytest.fixture(scope="session")
def cand4():
    return build_prototype(4, 7, spread=1e3)


@pytest.fixture(scope="session")
def lam4(cand4):
    return scale_and_certify(cand4, 32)


@pytest.fixture(scope="session")
def lam5():
    return scale_and_certify(build_prototype(5, 7, spread=1e4), 32)


@pytest.fixture(scope="session")
def lam6():
    return scale_and_certify(build_prototype(6, 7, spread=1e5), 32)


@pytest.fixture(scope="session")
def lam8():
    return scale_and_certify(build_prototype(8, 7, spread=1e5, rich_factor=1024), 32)


@pytest.fixture(scope="session")
def orbit6():
    from cascade_lab.dynamics import find_traversal_orbit
    return find_traversal_orbit(6, 1e-2, tol=1e-12)


@pytest.fixture(scope="session")
def orbit5():
    from cascade_lab.dynamics import find_traversal_orbit
    return find_traversal_orbit(5, 1e-2, tol=1e-12)


ACCEPTANCE = pytest.StashKey[dict]()


@pytest.fixture(scope="session")
def acceptance_log(request):
    return request.config.stash.setdefault(ACCEPTANCE, {})


def pytest_terminal_summary(terminalreporter, config):
    log = config.stash.get(ACCEPTANCE, None)
    if not log:
        return
    terminalreporter.write_sep("=", "acceptance criteria")
    for k in sorted(log):
        terminalreporter.write_line(log[k])
