import numpy as np
import pytest

from modalform import (
    build_profile,
    build_spherical_cap,
    compute_modal_basis,
)

_ACCEPTANCE_RESULTS = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    if report.when == "call" and item.fspath.basename == "test_acceptance.py":
        _ACCEPTANCE_RESULTS[item.name] = report.outcome


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not _ACCEPTANCE_RESULTS:
        return
    terminalreporter.write_sep("-", "acceptance criteria")
    for name in sorted(_ACCEPTANCE_RESULTS):
        outcome = _ACCEPTANCE_RESULTS[name]
        status = "PASS" if outcome == "passed" else "FAIL"
        terminalreporter.write_line(f"{name}: {status}")


@pytest.fixture(scope="session")
def cap321():
    return build_spherical_cap(1.0, np.pi / 2, 321)


@pytest.fixture(scope="session")
def cap_basis50(cap321):
    """Enriched, infinity-normed, 50 columns."""
    return compute_modal_basis(cap321, 50)


@pytest.fixture(scope="session")
def cap_natural30(cap321):
    """Natural-only, infinity-normed, 30 columns."""
    return compute_modal_basis(cap321, 30, enrich=False)


@pytest.fixture(scope="session")
def profile250():
    return build_profile(10.0, 250)


@pytest.fixture(scope="session")
def profile_basis60(profile250):
    """Natural-only, infinity-normed, 60 columns."""
    return compute_modal_basis(profile250, 60, enrich=False)
