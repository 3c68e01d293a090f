"""Adaptive Dormand-Prince 5(4) integrator with PI step control.

Dense output uses the 4th-order continuous extension of the pair. The
integrator is used both for the scalar extremal solutions of the decay
inequality and for the vector-valued regularised Newton flow.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .errors import BlowUp, DecayError, StepUnderflow

__all__ = ["DenseSolution", "integrate"]

C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0])
A = [
    [0.0],
    [1 / 5],
    [3 / 40, 9 / 40],
    [44 / 45, -56 / 15, 32 / 9],
    [19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729],
    [9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656],
    [35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84],
]
A = [np.array(row) for row in A]
# 5th-order weights equal the last stage row (FSAL); E = b5 - b4.
E = np.array(
    [71 / 57600, 0.0, -71 / 16695, 71 / 1920, -17253 / 339200, 22 / 525, -1 / 40]
)
# Continuous extension: y(t + x h) = y + h K^T P [x, x^2, x^3, x^4].
P = np.array(
    [
        [1, -8048581381 / 2820520608, 8663915743 / 2820520608, -12715105075 / 11282082432],
        [0, 0, 0, 0],
        [0, 131558114200 / 32700410799, -68118460800 / 10900136933, 87487479700 / 32700410799],
        [0, -1754552775 / 470086768, 14199869525 / 1410260304, -10690763975 / 1880347072],
        [0, 127303824393 / 49829197408, -318862633887 / 49829197408, 701980252875 / 199316789632],
        [0, -282668133 / 205662961, 2019193451 / 616988883, -1453857185 / 822651844],
        [0, 40617522 / 29380423, -110615467 / 29380423, 69997945 / 29380423],
    ]
)

SAFETY = 0.9
MIN_FACTOR = 0.2
MAX_FACTOR = 10.0
# PI controller exponents (Hairer's DOPRI5 defaults).
BETA = 0.04
ALPHA = 0.2 - 0.75 * BETA


@dataclass
class DenseSolution:
    """Piecewise-polynomial solution over the accepted steps."""

    t_steps: np.ndarray
    y_steps: np.ndarray
    coeffs: np.ndarray  # (steps, 4, dim): h * K^T P per accepted step
    accepted: int = 0
    rejected: int = 0
    rtol: float = 0.0
    atol: float = 0.0
    status: str = "ok"
    message: str = ""
    extras: dict = field(default_factory=dict)

    @property
    def t_final(self) -> float:
        return float(self.t_steps[-1])

    @property
    def y_final(self) -> np.ndarray:
        return self.y_steps[-1]

    def __call__(self, t) -> np.ndarray:
        """Evaluate at times inside ``[t_steps[0], t_steps[-1]]``; returns (len(t), dim)."""
        t = np.atleast_1d(np.asarray(t, dtype=float))
        if self.coeffs.shape[0] == 0:
            return np.repeat(self.y_steps[:1], t.size, axis=0)
        lo, hi = self.t_steps[0], self.t_steps[-1]
        span = max(hi - lo, 1.0)
        if np.any(t < lo - 1e-12 * span) or np.any(t > hi + 1e-12 * span):
            raise DecayError("dense output queried outside the integrated range")
        k = np.clip(np.searchsorted(self.t_steps, t, side="right") - 1, 0, self.coeffs.shape[0] - 1)
        h = self.t_steps[k + 1] - self.t_steps[k]
        x = (t - self.t_steps[k]) / h
        powers = np.stack([x, x**2, x**3, x**4], axis=1)  # (m, 4)
        out = self.y_steps[k] + np.einsum("mj,mjd->md", powers, self.coeffs[k])
        # Exact node values where requested.
        at_end = t >= hi
        out[at_end] = self.y_steps[-1]
        return out


def _rms(x):
    return math.sqrt(float(np.mean(x * x)))


def _initial_step(fun, t0, y0, f0, span, rtol, atol):
    scale = atol + np.abs(y0) * rtol
    d0 = _rms(y0 / scale)
    d1 = _rms(f0 / scale)
    h0 = 1e-6 if (d0 < 1e-5 or d1 < 1e-5) else 0.01 * d0 / d1
    h0 = min(h0, span)
    f1 = fun(t0 + h0, y0 + h0 * f0)
    d2 = _rms((f1 - f0) / scale) / h0
    if d1 <= 1e-15 and d2 <= 1e-15:
        h1 = max(1e-6, h0 * 1e-3)
    else:
        h1 = (0.01 / max(d1, d2)) ** 0.2
    return min(100 * h0, h1, span)


def integrate(
    fun: Callable[[float, np.ndarray], np.ndarray],
    t0: float,
    y0,
    t_end: float,
    rtol: float = 1e-8,
    atol: float = 1e-12,
    *,
    project: Optional[Callable[[np.ndarray], np.ndarray]] = None,
    blowup: float = 1e12,
    step_floor: float = 1e-14,
    max_steps: int = 1_000_000,
    first_step: Optional[float] = None,
) -> DenseSolution:
    """Integrate ``y' = fun(t, y)`` from ``t0`` to ``t_end``.

    ``project`` is applied to every accepted state (e.g. clamping to the
    nonnegative orthant). Raises :class:`BlowUp` once ``max|y|`` exceeds
    ``blowup`` and :class:`StepUnderflow` when the step needed falls below
    ``step_floor * (t_end - t0)``; both carry the partial solution.
    """
    if not t_end > t0:
        raise DecayError(f"need t_end > t0, got t0={t0}, t_end={t_end}")
    y = np.array(y0, dtype=float).reshape(-1)
    span = t_end - t0
    h_min = step_floor * span

    f = np.asarray(fun(t0, y), dtype=float)
    h = first_step if first_step is not None else _initial_step(fun, t0, y, f, span, rtol, atol)

    ts = [t0]
    ys = [y.copy()]
    qs = []
    accepted = rejected = 0
    err_old = 1e-4
    just_rejected = False
    t = t0
    K = np.empty((7, y.size))

    def partial(status, message):
        return DenseSolution(
            np.array(ts),
            np.array(ys),
            np.array(qs).reshape(len(qs), 4, y.size),
            accepted,
            rejected,
            rtol,
            atol,
            status,
            message,
        )

    while t < t_end:
        if accepted + rejected >= max_steps:
            raise DecayError(f"exceeded {max_steps} steps at t={t}")
        last = False
        if t + h >= t_end or t_end - (t + h) < h_min:
            h = t_end - t
            last = True
        if h < h_min:
            sol = partial("underflow", f"step {h:.3e} below floor at t={t:.17g}")
            err = StepUnderflow(sol.message, t=t)
            err.solution = sol
            raise err

        K[0] = f
        for s in range(1, 7):
            K[s] = fun(t + C[s] * h, y + h * (A[s] @ K[:s]))
        y_new = y + h * (A[6] @ K[:6])
        scale = atol + rtol * np.maximum(np.abs(y), np.abs(y_new))
        err_est = _rms(h * (E @ K) / scale)

        if not math.isfinite(err_est) or not np.all(np.isfinite(y_new)):
            h *= MIN_FACTOR
            rejected += 1
            just_rejected = True
            continue

        if err_est <= 1.0:
            projected = y_new if project is None else project(y_new)
            qs.append(h * (K.T @ P).T)
            t = t_end if last else t + h
            if projected is y_new or np.array_equal(projected, y_new):
                f = K[6].copy()
            else:
                f = np.asarray(fun(t, projected), dtype=float)
            y = projected
            ts.append(t)
            ys.append(y.copy())
            accepted += 1
            if float(np.max(np.abs(y))) > blowup:
                sol = partial("blowup", f"|y| exceeded {blowup:g} at t={t:.17g}")
                raise BlowUp(sol.message, trajectory=sol, escape_time=t)
            e = max(err_est, 1e-10)
            factor = SAFETY * e**-ALPHA * err_old**BETA
            factor = min(MAX_FACTOR, max(MIN_FACTOR, factor))
            if just_rejected:
                factor = min(factor, 1.0)
            just_rejected = False
            err_old = e
            h *= factor
        else:
            factor = max(MIN_FACTOR, SAFETY * err_est**-0.2)
            h *= factor
            rejected += 1
            just_rejected = True

    return partial("ok", "")
