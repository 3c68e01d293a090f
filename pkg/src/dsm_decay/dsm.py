"""Regularised Newton flow for monotone equations ``F(u) = f``.

The flow is

    u' = -(J(u) + a(t) I)^{-1} (F(u) + a(t) u - f),   u(0) = u0,

with the power-law schedule ``a(t)`` from :mod:`dsm_decay.schedule`. Its
distance ``g(t) = ||u(t) - V(t)||`` to the regularised solution
``F(V) + a V = f`` satisfies a decay inequality certified by
``mu = lambda / a**q``, giving ``g(t) < a(t) / lambda``.
"""

from __future__ import annotations

import io
import json
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import scipy.linalg

from .certificates import CertificateReport
from .errors import MissingDiagnostics, NoConvergence, SolveFailure
from .integrators import integrate
from .problems import MonotoneProblem, estimate_holder_constant
from .schedule import ScheduleParams, build_schedule

__all__ = [
    "DsmConfig",
    "DsmTrace",
    "shifted_solve",
    "dsm_rhs",
    "solve_regularized",
    "estimate_minimal_norm",
    "auto_schedule",
    "solve_dsm",
    "check_dsm_bound",
]

PIVOT_SLACK = 1e-8
BOUND_SLACK = 1e-9
CONFINEMENT_SLACK = 1e-6


@dataclass(frozen=True)
class DsmConfig:
    t_end: float = 50.0
    rel_tol: float = 1e-8
    abs_tol: float = 1e-10
    newton_tol: float = 1e-12
    newton_max_iter: int = 50
    sample_count: int = 256
    compute_V: bool = True

    def __post_init__(self):
        if not self.t_end > 0:
            raise ValueError("t_end must be positive")
        for name in ("rel_tol", "abs_tol", "newton_tol"):
            if not 0 < getattr(self, name) < 1:
                raise ValueError(f"{name} must lie in (0, 1)")
        if self.newton_max_iter < 1 or self.sample_count < 1:
            raise ValueError("counts must be >= 1")

    def to_dict(self):
        return dict(self.__dict__)


@dataclass
class DsmTrace:
    t: np.ndarray
    a: np.ndarray
    residual: np.ndarray
    u_norm: np.ndarray
    g: Optional[np.ndarray] = None
    bound: Optional[np.ndarray] = None
    err_y: Optional[np.ndarray] = None
    y_norm: Optional[float] = None
    metadata: dict = field(default_factory=dict)

    COLUMNS = ("t", "a", "residual", "u_norm", "g", "bound", "err_y")

    def _column(self, name):
        return getattr(self, name)

    def to_csv(self, path=None) -> str:
        buf = io.StringIO()
        buf.write(",".join(self.COLUMNS) + "\n")
        for i in range(self.t.size):
            cells = []
            for name in self.COLUMNS:
                col = self._column(name)
                cells.append("" if col is None else f"{col[i]:.17g}")
            buf.write(",".join(cells) + "\n")
        text = buf.getvalue()
        if path is not None:
            with open(path, "w", encoding="utf-8", newline="\n") as fh:
                fh.write(text)
        return text

    def to_json(self, path=None) -> str:
        obj = {name: (None if self._column(name) is None else self._column(name).tolist()) for name in self.COLUMNS}
        obj["y_norm"] = self.y_norm
        obj["metadata"] = self.metadata
        text = json.dumps(obj, indent=2)
        if path is not None:
            with open(path, "w", encoding="utf-8", newline="\n") as fh:
                fh.write(text + "\n")
        return text


def shifted_solve(Jm: np.ndarray, a: float, rhs: np.ndarray, symmetric: bool = True) -> np.ndarray:
    """Solve ``(Jm + a I) x = rhs``.

    Symmetric matrices go through Cholesky; if that fails the smallest
    eigenvalue decides between a monotonicity failure (below ``-1e-8 a``)
    and an LU fallback. Non-symmetric matrices use LU directly.
    """
    Aa = Jm + a * np.eye(Jm.shape[0])
    if symmetric:
        try:
            factor = scipy.linalg.cho_factor(Aa, check_finite=False)
            return scipy.linalg.cho_solve(factor, rhs, check_finite=False)
        except np.linalg.LinAlgError:
            lam_min = float(np.linalg.eigvalsh(0.5 * (Aa + Aa.T))[0])
            if lam_min < -PIVOT_SLACK * a:
                raise SolveFailure(
                    f"J + aI has eigenvalue {lam_min:.3e} < 0 at a={a:.3e}; operator is not monotone"
                ) from None
    try:
        lu = scipy.linalg.lu_factor(Aa, check_finite=False)
    except (np.linalg.LinAlgError, ValueError) as exc:
        raise SolveFailure(f"LU factorisation of J + aI failed: {exc}") from None
    if np.any(np.diag(lu[0]) == 0):
        raise SolveFailure("J + aI is singular")
    return scipy.linalg.lu_solve(lu, rhs, check_finite=False)


def dsm_rhs(problem: MonotoneProblem, u, t, schedule) -> np.ndarray:
    """``-(J(u) + a(t) I)^{-1} (F(u) + a(t) u - f)``.

    ``schedule`` may be a :class:`RegularizationSchedule` or
    :class:`ScheduleParams`; only ``a(t)`` enters.
    """
    sched = getattr(schedule, "schedule", schedule)
    a = float(sched.a(t))
    u = np.asarray(u, dtype=float)
    return -shifted_solve(problem.J(u), a, problem.F(u) + a * u - problem.f, problem.symmetric)


def solve_regularized(problem: MonotoneProblem, a: float, u_init=None, newton_tol=1e-12, max_iter=50) -> np.ndarray:
    """Damped Newton for ``F(V) + a V = f``.

    Stops once ``||F(V) + a V - f|| <= newton_tol (1 + ||f||)``. Each step is
    halved (at most 30 times) until the residual norm decreases.
    """
    if not a > 0:
        raise ValueError(f"a must be positive, got {a}")
    V = np.zeros(problem.dim) if u_init is None else np.array(u_init, dtype=float)
    target = newton_tol * (1.0 + float(np.linalg.norm(problem.f)))
    G = problem.residual(V, a)
    res = float(np.linalg.norm(G))
    for _ in range(max_iter):
        if res <= target:
            return V
        step = -shifted_solve(problem.J(V), a, G, problem.symmetric)
        lam = 1.0
        for _ in range(31):
            trial = V + lam * step
            G_trial = problem.residual(trial, a)
            res_trial = float(np.linalg.norm(G_trial))
            if res_trial < res:
                break
            lam *= 0.5
        else:
            # No decrease within 30 halvings: residual is at rounding level.
            if res <= 10 * target:
                return V
            raise NoConvergence(f"line search stalled at residual {res:.3e}", iterate=V, residual=res)
        V, G, res = trial, G_trial, res_trial
    if res <= target:
        return V
    raise NoConvergence(f"no convergence after {max_iter} iterations, residual {res:.3e}", iterate=V, residual=res)


def estimate_minimal_norm(
    problem: MonotoneProblem,
    a_start: float = 1.0,
    a_factor: float = 0.5,
    steps: int = 20,
    newton_tol: float = 1e-12,
    max_iter: int = 50,
    return_path: bool = False,
):
    """Continuation of ``V_a`` along ``a_k = a_start * a_factor**k``, warm-started.

    Returns the last ``V`` (and, with ``return_path``, the lists of ``a_k`` and
    ``V_k``).
    """
    if not a_start > 0 or not 0 < a_factor < 1 or steps < 1:
        raise ValueError("need a_start > 0, 0 < a_factor < 1, steps >= 1")
    V = np.zeros(problem.dim)
    alphas, path = [], []
    for k in range(steps):
        a = a_start * a_factor**k
        try:
            V = solve_regularized(problem, a, V, newton_tol, max_iter)
        except NoConvergence as exc:
            exc.index = k
            raise
        alphas.append(a)
        path.append(V.copy())
    if return_path:
        return V, alphas, path
    return V


def auto_schedule(
    problem: MonotoneProblem,
    u0=None,
    *,
    M_p="auto",
    p=None,
    c1="auto",
    g0="auto",
    newton_tol=1e-12,
    max_iter=50,
    seed=0,
):
    """Pick schedule inputs for ``problem`` and build the schedule.

    * ``c1`` defaults to ``||y_est||`` from a 20-step continuation from a = 1.
    * ``M_p`` defaults to ``problem.M_p``; if that is unknown it is probed on
      ``B(0, R)`` with ``R = a(0)/lambda + 2 ||y_est||``, refined until R stops
      growing.
    * ``g0`` defaults to ``||u0 - V_{a(0)}||``; since ``a(0)`` depends on
      ``g0`` the schedule is rebuilt until the two agree, starting from
      ``g0 = ||u0 - V_1||``.

    Returns ``(params, info)`` with the inputs used.
    """
    u0 = np.zeros(problem.dim) if u0 is None else np.asarray(u0, dtype=float)
    p = problem.p if p is None else p
    info = {}
    y_est = estimate_minimal_norm(problem, 1.0, 0.5, 20, newton_tol, max_iter)
    info["y_est_norm"] = float(np.linalg.norm(y_est))
    c1_val = info["y_est_norm"] if c1 == "auto" else float(c1)

    def distance(params):
        a0 = float(params.schedule.a(0.0))
        V0 = solve_regularized(problem, a0, u0, newton_tol, max_iter)
        return float(np.linalg.norm(u0 - V0))

    fixed_g0 = None if g0 == "auto" else float(g0)
    g0_val = fixed_g0
    if g0_val is None:
        V1 = solve_regularized(problem, 1.0, u0, newton_tol, max_iter)
        g0_val = float(np.linalg.norm(u0 - V1))

    if M_p != "auto":
        mp_val = float(M_p)
    elif problem.M_p is not None:
        mp_val = float(problem.M_p)
    else:
        mp_val = None

    probing = M_p == "auto" and problem.M_p is None
    radius = 2.0 * info["y_est_norm"] + 1.0
    for _ in range(20):
        if probing:
            mp_val = estimate_holder_constant(problem.F, problem.J, p, radius, problem.dim, seed=seed)
        params = build_schedule(mp_val, p, c1_val, g0_val)
        changed = False
        if probing:
            new_radius = float(params.schedule.a(0.0)) / params.lam + 2.0 * info["y_est_norm"]
            if new_radius > radius * (1 + 1e-9):
                radius = new_radius
                changed = True
        if fixed_g0 is None:
            actual = distance(params)
            if abs(actual - g0_val) > 1e-10 * max(1.0, g0_val):
                g0_val = actual
                changed = True
        if not changed:
            break
    if fixed_g0 is None:
        # The map g0 -> ||u0 - V_a(0)|| is decreasing; if the iteration has not
        # settled, fall back to the larger value so the strict bound holds.
        actual = distance(params)
        if actual * params.lam / float(params.schedule.a(0.0)) >= 1.0:
            g0_val = max(actual, g0_val)
            params = build_schedule(mp_val, p, c1_val, g0_val)
            actual = distance(params)
        info["g0_actual"] = actual
    info.update(M_p=mp_val, c1=c1_val, g0=g0_val, p=p, probe_radius=radius if probing else None)
    return params, info


def solve_dsm(problem: MonotoneProblem, params: ScheduleParams, config: DsmConfig = DsmConfig(), u0=None):
    """Integrate the regularised Newton flow on ``[0, t_end]``.

    Returns ``(u_final, trace)``. With ``config.compute_V`` every trace sample
    also solves for ``V(t)`` (warm-started along the samples) and records
    ``g(t) = ||u - V||`` and the bound ``a(t)/lambda``.
    """
    u0 = np.zeros(problem.dim) if u0 is None else np.array(u0, dtype=float)
    sched = params.schedule

    def rhs(t, u):
        return dsm_rhs(problem, u, t, sched)

    sol = integrate(rhs, 0.0, u0, config.t_end, config.rel_tol, config.abs_tol, blowup=np.inf)
    ts = np.linspace(0.0, config.t_end, max(config.sample_count, 2)) if config.sample_count > 1 else np.array([config.t_end])
    us = sol(ts)
    a_vals = sched.a(ts)
    residual = np.array([np.linalg.norm(problem.residual(u, a)) for u, a in zip(us, a_vals)])
    u_norm = np.linalg.norm(us, axis=1)

    g = bound = None
    if config.compute_V:
        g = np.empty(ts.size)
        V = u0.copy()
        for i, (u, a) in enumerate(zip(us, a_vals)):
            V = solve_regularized(problem, float(a), V, config.newton_tol, config.newton_max_iter)
            g[i] = np.linalg.norm(u - V)
        bound = a_vals / params.lam

    err_y = y_norm = None
    if problem.known_y is not None:
        err_y = np.linalg.norm(us - problem.known_y, axis=1)
        y_norm = float(np.linalg.norm(problem.known_y))

    trace = DsmTrace(
        t=ts,
        a=a_vals,
        residual=residual,
        u_norm=u_norm,
        g=g,
        bound=bound,
        err_y=err_y,
        y_norm=y_norm,
        metadata={
            "accepted_steps": sol.accepted,
            "rejected_steps": sol.rejected,
            "problem": problem.name,
            "schedule": params.to_dict(),
            "config": config.to_dict(),
        },
    )
    return sol.y_final.copy(), trace


def check_dsm_bound(trace: DsmTrace, params: ScheduleParams) -> CertificateReport:
    """Check ``g(t) < a(t)/lambda`` on every sample and the confinement radius.

    When the trace carries ``||u - y||`` the largest distance must not exceed
    ``a(0)/lambda + 2 ||y||`` (plus 1e-6).
    """
    if trace.g is None:
        raise MissingDiagnostics("trace was recorded without V(t); rerun with compute_V=True")
    bound = trace.a / params.lam
    slack = bound - trace.g
    ok = slack > -BOUND_SLACK
    k = int(np.argmin(slack))
    extras = {"bound_pass": bool(np.all(ok))}
    extras["first_violation_time"] = None if np.all(ok) else float(trace.t[np.argmax(~ok)])
    passed = bool(np.all(ok))
    if trace.err_y is not None:
        r_hat = float(np.max(trace.err_y))
        radius = float(params.schedule.a(0.0)) / params.lam + 2.0 * trace.y_norm
        confined = r_hat <= radius + CONFINEMENT_SLACK
        extras.update(R_hat=r_hat, R_radius=radius, confinement_pass=bool(confined))
        passed = passed and confined
    return CertificateReport(
        passed=passed,
        worst_slack=float(slack[k]),
        worst_location=float(trace.t[k]),
        rows=np.column_stack([trace.t, trace.g, bound, slack]),
        tolerance=BOUND_SLACK,
        extras=extras,
    )
