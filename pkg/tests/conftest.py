from pathlib import Path

import numpy as np
import pytest
from hypothesis import strategies as st

from mdp_dissip import lqr

CONFIGS = Path(__file__).resolve().parents[1] / "configs"

ACCEPTANCE_RESULTS = {}


def pytest_runtest_logreport(report):
    if report.when != "call":
        return
    for name, _ in report.user_properties:
        if name == "criterion":
            break
    else:
        return
    label = dict(report.user_properties)["criterion"]
    ACCEPTANCE_RESULTS[label] = "PASS" if report.passed else "FAIL"


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for label in sorted(ACCEPTANCE_RESULTS, key=lambda s: int(s.split(".")[0])):
        terminalreporter.write_line(f"[{ACCEPTANCE_RESULTS[label]}] criterion {label}")


@pytest.fixture(scope="session")
def cert():
    return lqr.certify(lqr.illustration_problem())


@pytest.fixture(scope="session")
def rho0():
    return lqr.illustration_initial_measure()


@pytest.fixture
def configs():
    return CONFIGS


@st.composite
def spd_matrices(draw, max_dim=4, lo=0.1, hi=10.0):
    n = draw(st.integers(1, max_dim))
    seed = draw(st.integers(0, 2**32 - 1))
    rng = np.random.default_rng(seed)
    Q, _ = np.linalg.qr(rng.standard_normal((n, n)))
    eig = np.exp(rng.uniform(np.log(lo), np.log(hi), size=n))
    S = (Q * eig) @ Q.T
    return 0.5 * (S + S.T)
