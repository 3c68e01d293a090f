"""Decay inequalities, certificates and grid checks of the sufficient conditions.

The continuous inequality is

    g'(t) <= -gamma(t) g + alpha(t) g**p + beta(t),   t >= t0, p > 1,

and a certificate is a positive C^1 function ``mu`` for which

    alpha / mu**p + beta <= (gamma - mu'/mu) / mu

holds. Together with ``mu(t0) g(t0) < 1`` (or ``<= 1``) this forces
``g(t) < 1/mu(t)`` (``<=`` respectively). The discrete analogue replaces
``mu'/mu`` by ``(mu[n+1] - mu[n]) / (mu[n] h[n])``.

All checks here are pointwise on a caller-supplied grid.
"""

from __future__ import annotations

import io
import json
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .coefficients import CoefficientFn, Sum, Tabulated
from .errors import (
    DecayError,
    DomainMismatch,
    EmptyGrid,
    LengthMismatch,
    NegativeAlpha,
    NonMonotoneMu,
    NonPositiveMu,
    StepConstraint,
    ThetaOutOfRange,
)

__all__ = [
    "ContinuousInequality",
    "Certificate",
    "DiscreteInequality",
    "DiscreteCertificate",
    "CertificateReport",
    "check_continuous",
    "check_split",
    "check_initial",
    "check_discrete",
    "bound",
    "default_grid",
    "default_tolerance",
]

CLOSED_FORM_TOL = 1e-12
TABULATED_TOL = 1e-8
DEFAULT_GRID_POINTS = 2048


def _is_tabulated(fn) -> bool:
    if isinstance(fn, Tabulated):
        return True
    if isinstance(fn, Sum):
        return any(_is_tabulated(term) for term in fn.terms)
    return False


@dataclass(frozen=True)
class ContinuousInequality:
    t0: float
    p: float
    gamma: CoefficientFn
    alpha: CoefficientFn
    beta: CoefficientFn

    def __post_init__(self):
        if not self.p > 1:
            raise DecayError(f"exponent p must exceed 1, got {self.p}")
        for coef in (self.gamma, self.alpha, self.beta):
            coef.check_domain(self.t0)

    def rhs(self, t, g):
        """Right-hand side of the equality case, ``-gamma g + alpha g**p + beta``."""
        return -self.gamma(t) * g + self.alpha(t) * g**self.p + self.beta(t)

    @property
    def tabulated(self) -> bool:
        return any(_is_tabulated(c) for c in (self.gamma, self.alpha, self.beta))

    def to_dict(self) -> dict:
        return {
            "t0": self.t0,
            "p": self.p,
            "gamma": self.gamma.to_dict(),
            "alpha": self.alpha.to_dict(),
            "beta": self.beta.to_dict(),
        }


@dataclass(frozen=True)
class Certificate:
    """Positive differentiable ``mu``; the proved bound is ``g <= 1/mu``."""

    mu: CoefficientFn

    def __call__(self, t):
        return self.mu(t)

    def derivative(self, t):
        return self.mu.derivative(t)

    def positive_values(self, t):
        values = np.asarray(self.mu(t), dtype=float)
        bad = ~(values > 0)
        if np.any(bad):
            where = np.asarray(t, dtype=float).reshape(-1)[np.argmax(bad.reshape(-1))]
            raise NonPositiveMu(f"certificate is not positive at t={where}")
        return values

    @property
    def tabulated(self) -> bool:
        return _is_tabulated(self.mu)

    def to_dict(self) -> dict:
        return {"mu": self.mu.to_dict()}


@dataclass(frozen=True)
class DiscreteInequality:
    """``g[n+1] <= g[n] (1 - h[n] gamma[n]) + h[n] alpha[n] g[n]**p + h[n] beta[n]``.

    ``h`` defaults to all ones.
    """

    p: float
    gamma: np.ndarray
    alpha: np.ndarray
    beta: np.ndarray
    h: Optional[np.ndarray] = None

    def __post_init__(self):
        gamma = np.asarray(self.gamma, dtype=float)
        alpha = np.asarray(self.alpha, dtype=float)
        beta = np.asarray(self.beta, dtype=float)
        h = np.ones_like(gamma) if self.h is None else np.asarray(self.h, dtype=float)
        if not self.p > 1:
            raise DecayError(f"exponent p must exceed 1, got {self.p}")
        if not (gamma.ndim == 1 and gamma.shape == alpha.shape == beta.shape == h.shape):
            raise LengthMismatch(
                f"sequence lengths differ: gamma={gamma.shape}, alpha={alpha.shape}, "
                f"beta={beta.shape}, h={h.shape}"
            )
        if np.any(alpha < 0) or np.any(beta < 0) or np.any(gamma < 0):
            raise DecayError("alpha_n, beta_n, gamma_n must be nonnegative")
        if np.any(h <= 0):
            raise StepConstraint("h_n must be positive")
        hg = h * gamma
        if np.any(hg <= 0) or np.any(hg >= 1):
            n = int(np.argmax((hg <= 0) | (hg >= 1)))
            raise StepConstraint(f"h_n * gamma_n = {hg[n]} not in (0, 1) at n={n}")
        for name, value in (("gamma", gamma), ("alpha", alpha), ("beta", beta), ("h", h)):
            value.setflags(write=False)
            object.__setattr__(self, name, value)

    def __len__(self):
        return self.gamma.size


@dataclass(frozen=True)
class DiscreteCertificate:
    mu: np.ndarray

    def __post_init__(self):
        mu = np.asarray(self.mu, dtype=float)
        if mu.ndim != 1 or mu.size == 0:
            raise DecayError("discrete certificate must be a nonempty 1-D array")
        if np.any(mu <= 0):
            raise NonPositiveMu(f"mu_n must be positive (first bad n={int(np.argmax(mu <= 0))})")
        if np.any(np.diff(mu) < 0):
            raise NonMonotoneMu(f"mu_n decreases at n={int(np.argmax(np.diff(mu) < 0))}")
        mu.setflags(write=False)
        object.__setattr__(self, "mu", mu)

    def __len__(self):
        return self.mu.size


@dataclass
class CertificateReport:
    """Outcome of a pointwise check.

    ``rows`` has one row per grid point with columns named by ``columns``;
    for condition checks the last column is the slack ``rhs - lhs``.
    """

    passed: bool
    worst_slack: float
    worst_location: Optional[float]
    rows: np.ndarray
    columns: tuple = ("t", "lhs", "rhs", "slack")
    tolerance: float = 0.0
    extras: dict = field(default_factory=dict)

    def __bool__(self):
        return self.passed

    def first_violation(self) -> Optional[float]:
        """Location of the first row whose slack is below ``-tolerance``."""
        bad = self.rows[:, -1] < -self.tolerance
        if not np.any(bad):
            return None
        return float(self.rows[np.argmax(bad), 0])

    def to_csv(self, path=None) -> str:
        buf = io.StringIO()
        buf.write(",".join(self.columns) + "\n")
        integer_index = self.columns[0] == "n"
        for row in self.rows:
            first = str(int(row[0])) if integer_index else f"{row[0]:.17g}"
            buf.write(",".join([first] + [f"{v:.17g}" for v in row[1:]]) + "\n")
        text = buf.getvalue()
        if path is not None:
            with open(path, "w", encoding="utf-8", newline="\n") as fh:
                fh.write(text)
        return text

    def to_json_dict(self) -> dict:
        def clean(v):
            return None if v is None else float(v)

        return {
            "pass": bool(self.passed),
            "worst_slack": clean(self.worst_slack),
            "worst_location": clean(self.worst_location),
            "columns": list(self.columns),
            "rows": [[float(v) for v in row] for row in self.rows],
            "extras": {k: _jsonable(v) for k, v in self.extras.items()},
        }

    def to_json(self, path=None) -> str:
        text = json.dumps(self.to_json_dict(), indent=2)
        if path is not None:
            with open(path, "w", encoding="utf-8", newline="\n") as fh:
                fh.write(text + "\n")
        return text


def _jsonable(v):
    if isinstance(v, np.ndarray):
        return v.tolist()
    if isinstance(v, (np.floating, np.integer, np.bool_)):
        return v.item()
    return v


def default_grid(t0: float, t_end: float, n: int = DEFAULT_GRID_POINTS) -> np.ndarray:
    return np.linspace(t0, t_end, n)


def default_tolerance(*objs) -> float:
    """1e-12 for closed forms, 1e-8 as soon as any input is tabulated."""
    if any(getattr(o, "tabulated", False) for o in objs):
        return TABULATED_TOL
    return CLOSED_FORM_TOL


def _prepare_grid(grid, t0):
    grid = np.asarray(grid, dtype=float).reshape(-1)
    if grid.size == 0:
        raise EmptyGrid("grid is empty")
    if np.any(np.diff(grid) < 0):
        raise DecayError("grid must be sorted")
    if grid[0] < t0:
        raise DomainMismatch(f"grid starts at {grid[0]} before t0={t0}")
    return grid


def _margin(ineq, cert, grid):
    """Return ``mu``, ``gamma - mu'/mu`` and alpha on the grid, with sign checks."""
    mu = cert.positive_values(grid)
    alpha = ineq.alpha(grid)
    if np.any(alpha < 0):
        where = grid[np.argmax(alpha < 0)]
        raise NegativeAlpha(f"alpha(t) < 0 at t={where}")
    gap = ineq.gamma(grid) - cert.derivative(grid) / mu
    return mu, gap, alpha


def _report(location, lhs, rhs, tol, *, index_name="t", extras=None):
    slack = rhs - lhs
    k = int(np.argmin(slack))
    worst = float(slack[k])
    rows = np.column_stack([location, lhs, rhs, slack])
    return CertificateReport(
        passed=bool(worst >= -tol),
        worst_slack=worst,
        worst_location=float(location[k]),
        rows=rows,
        columns=(index_name, "lhs", "rhs", "slack"),
        tolerance=tol,
        extras=extras or {},
    )


def check_continuous(ineq: ContinuousInequality, cert: Certificate, grid, tol=None) -> CertificateReport:
    """Check ``alpha/mu**p + beta <= (gamma - mu'/mu)/mu`` at every grid point."""
    if tol is None:
        tol = default_tolerance(ineq, cert)
    grid = _prepare_grid(grid, ineq.t0)
    mu, gap, alpha = _margin(ineq, cert, grid)
    lhs = alpha / mu**ineq.p + ineq.beta(grid)
    rhs = gap / mu
    return _report(grid, lhs, rhs, tol, extras={"alpha_nonnegative": True})


def _check_theta(theta):
    if not 0 < theta < 1:
        raise ThetaOutOfRange(f"theta must lie in (0, 1), got {theta}")


def _split_rows(location, alpha, beta, mu, gap, p, theta, tol, index_name):
    lhs_a, rhs_a = alpha, theta * mu ** (p - 1) * gap
    lhs_b, rhs_b = beta, (1 - theta) / mu * gap
    slack_a = rhs_a - lhs_a
    slack_b = rhs_b - lhs_b
    use_a = slack_a <= slack_b
    lhs = np.where(use_a, lhs_a, lhs_b)
    rhs = np.where(use_a, rhs_a, rhs_b)
    extras = {
        "alpha_slack": slack_a,
        "beta_slack": slack_b,
        "theta": theta,
        "alpha_pass": bool(np.min(slack_a) >= -tol),
        "beta_pass": bool(np.min(slack_b) >= -tol),
    }
    return _report(location, lhs, rhs, tol, index_name=index_name, extras=extras)


def check_split(ineq: ContinuousInequality, cert: Certificate, theta: float, grid, tol=None) -> CertificateReport:
    """Check the pair ``alpha <= theta mu**(p-1) G`` and ``beta <= (1-theta) G / mu``.

    ``G = gamma - mu'/mu``. Each row carries whichever of the two conditions
    has the smaller slack at that point.
    """
    _check_theta(theta)
    if tol is None:
        tol = default_tolerance(ineq, cert)
    grid = _prepare_grid(grid, ineq.t0)
    mu, gap, alpha = _margin(ineq, cert, grid)
    return _split_rows(grid, alpha, ineq.beta(grid), mu, gap, ineq.p, theta, tol, "t")


def check_initial(cert: Certificate, g0: float, strict: bool = True, t0: float = 0.0) -> bool:
    """``mu(t0) g0 < 1`` when ``strict``, else ``mu(t0) g0 <= 1``."""
    if g0 < 0:
        raise DecayError(f"g0 must be nonnegative, got {g0}")
    product = float(cert.positive_values(t0)) * g0
    return product < 1 if strict else product <= 1


def check_discrete(
    dineq: DiscreteInequality,
    dcert: DiscreteCertificate,
    g0: float,
    theta: Optional[float] = None,
    tol: float = CLOSED_FORM_TOL,
) -> CertificateReport:
    """Check the discrete sufficient conditions for ``n = 0 .. N-1``.

    Sequences all have length ``N + 1``; the last entry only enters through
    ``mu[N]``. The initial condition ``g0 <= 1/mu[0]`` is part of the verdict
    and appears in ``extras`` as ``initial_slack``.
    """
    if len(dcert) != len(dineq):
        raise LengthMismatch(f"certificate has {len(dcert)} entries, inequality has {len(dineq)}")
    if len(dineq) < 2:
        raise EmptyGrid("need at least two sequence entries")
    if g0 < 0:
        raise DecayError(f"g0 must be nonnegative, got {g0}")
    mu_all = dcert.mu
    mu = mu_all[:-1]
    gap = dineq.gamma[:-1] - (mu_all[1:] - mu) / (mu * dineq.h[:-1])
    n = np.arange(mu.size, dtype=float)
    alpha = dineq.alpha[:-1]
    beta = dineq.beta[:-1]
    if theta is None:
        report = _report(n, alpha / mu**dineq.p + beta, gap / mu, tol, index_name="n")
    else:
        _check_theta(theta)
        report = _split_rows(n, alpha, beta, mu, gap, dineq.p, theta, tol, "n")
    initial_slack = 1.0 / mu_all[0] - g0
    report.extras["initial_slack"] = float(initial_slack)
    if initial_slack < report.worst_slack:
        report.worst_slack = float(initial_slack)
        report.worst_location = None
    report.passed = bool(report.passed and initial_slack >= -tol)
    return report


def bound(cert: Certificate, t):
    """The proved upper bound ``1 / mu(t)``."""
    value = 1.0 / cert.positive_values(t)
    return float(value) if np.ndim(value) == 0 else value
