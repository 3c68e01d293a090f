import numpy as np
import pytest

from dsm_decay import Certificate, Constant, ContinuousInequality, PowerLaw


def tight_instance():
    """p = 2, mu = 1 + t, gamma = 2/(1+t), alpha = 1/2, beta = 1/(2(1+t)^2)."""
    ineq = ContinuousInequality(
        t0=0.0,
        p=2.0,
        gamma=PowerLaw(2.0, 1.0, 1.0),
        alpha=Constant(0.5),
        beta=PowerLaw(0.5, 1.0, 2.0),
    )
    return ineq, Certificate(PowerLaw(1.0, 1.0, -1.0))


def constant_ineq(p=2.0, gamma=0.0, alpha=0.0, beta=0.0, t0=0.0):
    return ContinuousInequality(t0=t0, p=p, gamma=Constant(gamma), alpha=Constant(alpha), beta=Constant(beta))


@pytest.fixture
def tight():
    return tight_instance()


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in RESULTS:
            terminalreporter.write_line(line)
