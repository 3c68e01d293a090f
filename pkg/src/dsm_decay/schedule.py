"""Power-law regularisation schedules ``a(t) = d / (c + t)**b``.

``build_schedule`` picks ``(d, c, b, lambda)`` so that, with ``q = 1/(p-1)``
and ``mu = lambda / a**q``, the three conditions

    M_p / a            <= 1/2 (lambda / a**q)**(p-1) (1 - q |a'| / a)
    c1 |a'| / a        <= a**q / (2 lambda) (1 - q |a'| / a)
    g0 lambda / a(0)   <  1

hold for all ``t >= 0``. Those make ``mu`` a split certificate (theta = 1/2)
for the inequality ``g' <= -g + (M_p / a) g**p + c1 |a'| / a`` that governs
``||u(t) - V_a(t)||`` along the regularised Newton flow.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .certificates import Certificate, CertificateReport, default_grid
from .coefficients import PowerLaw
from .errors import DecayError, EmptyGrid, ExponentOutOfRange

__all__ = [
    "RegularizationSchedule",
    "ScheduleParams",
    "build_schedule",
    "verify_schedule",
]


@dataclass(frozen=True)
class RegularizationSchedule:
    d: float
    c: float
    b: float

    def __post_init__(self):
        if not (self.d > 0 and self.c >= 1 and self.b > 0):
            raise DecayError(f"need d > 0, c >= 1, b > 0; got d={self.d}, c={self.c}, b={self.b}")

    def a(self, t):
        t = np.asarray(t, dtype=float)
        return self.d / (self.c + t) ** self.b

    def da(self, t):
        t = np.asarray(t, dtype=float)
        return -self.b * self.d / (self.c + t) ** (self.b + 1.0)

    def rate(self, t):
        """``|a'(t)| / a(t) = b / (c + t)``."""
        return self.b / (self.c + np.asarray(t, dtype=float))

    def as_coefficient(self) -> PowerLaw:
        return PowerLaw(self.d, self.c, self.b)


@dataclass(frozen=True)
class ScheduleParams:
    schedule: RegularizationSchedule
    lam: float
    q: float
    p: float

    def certificate(self) -> Certificate:
        """``mu(t) = lambda / a(t)**q`` as a closed-form certificate."""
        s = self.schedule
        return Certificate(PowerLaw(self.lam / s.d**self.q, s.c, -s.b * self.q))

    def bound(self, t):
        """``a(t) / lambda``, the bound on ``||u(t) - V(t)||``."""
        return self.schedule.a(t) / self.lam

    def to_dict(self) -> dict:
        s = self.schedule
        return {
            "lambda": self.lam,
            "q": self.q,
            "p": self.p,
            "b": s.b,
            "c": s.c,
            "d": s.d,
            "a0_over_lambda": float(s.a(0.0)) / self.lam,
        }


def _check_exponent(p):
    if not 1 < p < 2:
        raise ExponentOutOfRange(f"p must lie in (1, 2), got {p}")


def build_schedule(M_p: float, p: float, c1: float, g0: float) -> ScheduleParams:
    """Construct the schedule with the largest admissible decay exponent.

    Uses ``b = p - 1``, ``c = max(1, 2 b q)``, ``lambda = (4 M_p)**q`` (1 when
    ``M_p == 0``) and ``d = max(g0 lambda c**b + 1, (4 lambda c1 b)**(p-1))``.
    """
    _check_exponent(p)
    for name, value in (("M_p", M_p), ("c1", c1), ("g0", g0)):
        if not (np.isfinite(value) and value >= 0):
            raise DecayError(f"{name} must be finite and nonnegative, got {value}")
    q = 1.0 / (p - 1.0)
    b = p - 1.0
    c = max(1.0, 2.0 * b * q)
    lam = (4.0 * M_p) ** q if M_p > 0 else 1.0
    d = max(g0 * lam * c**b + 1.0, (4.0 * lam * c1 * b) ** (p - 1.0))
    return ScheduleParams(RegularizationSchedule(d=d, c=c, b=b), lam=lam, q=q, p=p)


def verify_schedule(params: ScheduleParams, M_p, c1, g0, grid=None, tol=1e-12) -> CertificateReport:
    """Check the three schedule conditions on ``grid`` (default: 2048 points on [0, 1000]).

    Rows carry the Hoelder-term and drift-term conditions, whichever is
    tighter at each point; the strict initial condition is reported in
    ``extras`` and enters ``worst_slack`` without tolerance.
    """
    if grid is None:
        grid = default_grid(0.0, 1e3)
    grid = np.asarray(grid, dtype=float).reshape(-1)
    if grid.size == 0:
        raise EmptyGrid("grid is empty")
    if np.any(grid < 0):
        raise DecayError("schedule grid must lie in [0, inf)")
    s, lam, q, p = params.schedule, params.lam, params.q, params.p
    a = s.a(grid)
    rate = np.abs(s.da(grid)) / a
    damp = 1.0 - q * rate

    lhs1 = M_p / a
    rhs1 = 0.5 * (lam / a**q) ** (p - 1.0) * damp
    lhs2 = c1 * rate
    rhs2 = a**q / (2.0 * lam) * damp
    slack1 = rhs1 - lhs1
    slack2 = rhs2 - lhs2

    use1 = slack1 <= slack2
    lhs = np.where(use1, lhs1, lhs2)
    rhs = np.where(use1, rhs1, rhs2)
    slack = rhs - lhs

    initial = 1.0 - g0 * lam / float(s.a(0.0))
    k = int(np.argmin(slack))
    worst, where = float(slack[k]), float(grid[k])
    if initial < worst:
        worst, where = initial, None
    passed = bool(slack1.min() >= -tol and slack2.min() >= -tol and initial > 0)
    return CertificateReport(
        passed=passed,
        worst_slack=worst,
        worst_location=where,
        rows=np.column_stack([grid, lhs, rhs, slack]),
        tolerance=tol,
        extras={
            "holder_pass": bool(slack1.min() >= -tol),
            "drift_pass": bool(slack2.min() >= -tol),
            "initial_pass": bool(initial > 0),
            "holder_worst_slack": float(slack1.min()),
            "drift_worst_slack": float(slack2.min()),
            "initial_slack": initial,
        },
    )
