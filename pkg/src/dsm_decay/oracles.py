"""Brute-force oracles for the decay bounds.

Every solution of the differential inequality is dominated by the solution of
the equality case with the same initial value, so integrating

    g' = -gamma g + alpha g**p + beta

and comparing against ``1/mu`` checks the proved bound in its worst case.
The discrete recursion is iterated exactly in floating point.
"""

from __future__ import annotations

import io
import json
import math
from dataclasses import dataclass, field

import numpy as np

from .certificates import (
    Certificate,
    CertificateReport,
    ContinuousInequality,
    DiscreteCertificate,
    DiscreteInequality,
)
from .coefficients import Constant, Exponential, PowerLaw
from .errors import BlowUp, DecayError, DomainMismatch, Overflow, StepUnderflow
from .integrators import integrate

__all__ = [
    "Trajectory",
    "DiscreteRun",
    "integrate_extremal",
    "iterate_discrete",
    "verify_trajectory_bound",
    "generate_certified_instance",
    "generate_certified_discrete_instance",
]

BLOWUP_LEVEL = 1e12
OVERFLOW_LEVEL = 1e300
MIN_SAMPLES = 512


def _write(text, path):
    if path is not None:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
    return text


@dataclass
class Trajectory:
    times: np.ndarray
    values: np.ndarray
    accepted: int = 0
    rejected: int = 0
    rel_tol: float = 0.0
    abs_tol: float = 0.0
    metadata: dict = field(default_factory=dict)

    def __len__(self):
        return self.times.size

    def to_csv(self, path=None) -> str:
        lines = ["t,g"] + [f"{t:.17g},{g:.17g}" for t, g in zip(self.times, self.values)]
        return _write("\n".join(lines) + "\n", path)

    def to_json(self, path=None) -> str:
        obj = {
            "t": self.times.tolist(),
            "g": self.values.tolist(),
            "accepted_steps": self.accepted,
            "rejected_steps": self.rejected,
            "rel_tol": self.rel_tol,
            "abs_tol": self.abs_tol,
            "metadata": self.metadata,
        }
        return _write(json.dumps(obj, indent=2) + "\n", path)


@dataclass
class DiscreteRun:
    values: np.ndarray
    metadata: dict = field(default_factory=dict)

    def __len__(self):
        return self.values.size

    def to_csv(self, path=None) -> str:
        buf = io.StringIO()
        buf.write("n,g\n")
        for n, g in enumerate(self.values):
            buf.write(f"{n},{g:.17g}\n")
        return _write(buf.getvalue(), path)

    def to_json(self, path=None) -> str:
        obj = {"g": self.values.tolist(), "metadata": self.metadata}
        return _write(json.dumps(obj, indent=2) + "\n", path)


def _to_trajectory(sol, t0, t_stop, samples):
    times = np.linspace(t0, t_stop, samples)
    values = np.maximum(sol(times)[:, 0], 0.0)
    return Trajectory(times, values, sol.accepted, sol.rejected, sol.rtol, sol.atol)


def integrate_extremal(
    ineq: ContinuousInequality,
    g0: float,
    t_end: float,
    rel_tol: float = 1e-10,
    abs_tol: float = 1e-14,
    samples: int = MIN_SAMPLES,
) -> Trajectory:
    """Solve the equality case from ``g(t0) = g0`` on ``[t0, t_end]``.

    Negative states (possible only when ``beta < 0``) are clamped to zero.
    Raises :class:`BlowUp` carrying the partial trajectory and the escape
    time when ``g`` passes 1e12.
    """
    if g0 < 0:
        raise DecayError(f"g0 must be nonnegative, got {g0}")
    if not (0 < rel_tol < 1 and 0 < abs_tol < 1):
        raise DecayError("tolerances must lie in (0, 1)")
    samples = max(int(samples), MIN_SAMPLES)
    p = ineq.p
    gamma, alpha, beta = ineq.gamma, ineq.alpha, ineq.beta

    def rhs(t, y):
        g = max(y[0], 0.0)
        return np.array([-float(gamma(t)) * g + float(alpha(t)) * g**p + float(beta(t))])

    def clamp(y):
        return y if y[0] >= 0 else np.zeros_like(y)

    try:
        sol = integrate(rhs, ineq.t0, [g0], t_end, rel_tol, abs_tol, project=clamp, blowup=BLOWUP_LEVEL)
    except BlowUp as exc:
        part = exc.trajectory
        traj = _to_trajectory(part, ineq.t0, part.t_final, samples)
        traj.metadata["status"] = "blowup"
        traj.metadata["escape_time"] = exc.escape_time
        raise BlowUp(str(exc), trajectory=traj, escape_time=exc.escape_time) from None
    except StepUnderflow:
        raise
    traj = _to_trajectory(sol, ineq.t0, t_end, samples)
    traj.metadata["status"] = "ok"
    return traj


def iterate_discrete(dineq: DiscreteInequality, g0: float, N: int) -> DiscreteRun:
    """Run ``g[n+1] = g[n](1 - h gamma) + h alpha g[n]**p + h beta`` for ``n < N``."""
    if g0 < 0:
        raise DecayError(f"g0 must be nonnegative, got {g0}")
    if len(dineq) < N:
        raise DecayError(f"sequences have {len(dineq)} entries, need {N}")
    p = dineq.p
    gam = dineq.gamma.tolist()
    alp = dineq.alpha.tolist()
    bet = dineq.beta.tolist()
    hs = dineq.h.tolist()
    out = [float(g0)]
    g = float(g0)
    for n in range(N):
        h = hs[n]
        try:
            g = g * (1.0 - h * gam[n]) + alp[n] * h * g**p + h * bet[n]
        except OverflowError:
            g = math.inf
        if not g <= OVERFLOW_LEVEL:
            raise Overflow(f"g_{n + 1} = {g} exceeds {OVERFLOW_LEVEL:g}", index=n + 1, values=np.array(out))
        out.append(g)
    return DiscreteRun(np.array(out))


def verify_trajectory_bound(traj, cert, strict: bool = True, tol: float = 0.0) -> CertificateReport:
    """Check ``g mu < 1`` (``strict``) or ``g mu <= 1 + tol`` along a trajectory.

    Rows are ``(t or n, g, 1/mu, g*mu)``; ``worst_slack`` is ``1 - max(g mu)``.
    """
    if isinstance(traj, Trajectory) and isinstance(cert, Certificate):
        loc = traj.times
        try:
            mu = cert.positive_values(loc)
        except DomainMismatch:
            raise
        index_name = "t"
    elif isinstance(traj, DiscreteRun) and isinstance(cert, DiscreteCertificate):
        if len(cert) < len(traj):
            raise DomainMismatch(f"certificate covers {len(cert)} indices, run has {len(traj)}")
        loc = np.arange(len(traj), dtype=float)
        mu = cert.mu[: len(traj)]
        index_name = "n"
    else:
        raise DomainMismatch(
            f"cannot check {type(traj).__name__} against {type(cert).__name__}"
        )
    g = traj.values
    product = g * mu
    k = int(np.argmax(product))
    m = float(product[k])
    passed = m < 1.0 if strict else m <= 1.0 + tol
    return CertificateReport(
        passed=bool(passed),
        worst_slack=1.0 - m,
        worst_location=float(loc[k]),
        rows=np.column_stack([loc, g, 1.0 / mu, product]),
        columns=(index_name, "g", "bound", "product"),
        tolerance=tol,
        extras={"max_product": m, "strict": strict},
    )


def _certificate_family(rng):
    """Draw ``mu`` and its log-derivative ``mu'/mu`` as closed forms.

    Returns ``(kind, mu, log_rate, mu_power(e), params)`` where
    ``mu_power(e)`` builds ``mu**e`` as a closed form.
    """
    kind = rng.choice(["linear", "exp", "power"])
    if kind == "linear":
        kappa = rng.uniform(0.1, 2.0)
        c = 1.0 / kappa
        mu = PowerLaw(kappa, c, -1.0)  # 1 + kappa t
        log_rate = PowerLaw(1.0, c, 1.0)

        def power(e, scale=1.0):
            return PowerLaw(scale * kappa**e, c, -e)

        params = {"kappa": kappa}
    elif kind == "exp":
        kappa = rng.uniform(0.01, 0.3)
        mu = Exponential(1.0, kappa)
        log_rate = Constant(kappa)

        def power(e, scale=1.0):
            return Exponential(scale, kappa * e)

        params = {"kappa": kappa}
    else:
        lam = rng.uniform(0.5, 2.0)
        c = rng.uniform(1.0, 3.0)
        s = rng.uniform(0.2, 2.0)
        mu = PowerLaw(lam, c, -s)  # lam (c + t)**s
        log_rate = PowerLaw(s, c, 1.0)

        def power(e, scale=1.0):
            return PowerLaw(scale * lam**e, c, -s * e)

        params = {"lam": lam, "c": c, "exponent": s}
    return str(kind), mu, log_rate, power, params


def generate_certified_instance(seed: int, p: float, margin: float, *, r=None, theta=None):
    """Draw a random inequality together with a certificate that covers it.

    ``gamma = mu'/mu + G`` for a random constant gap ``G > 0``; then
    ``alpha = theta * margin * mu**(p-1) * G`` and
    ``beta = (1 - theta) * margin * G / mu``, so the certificate condition
    holds with slack ``(1 - margin) G / mu``. ``g0 = r / mu(t0)``.
    ``margin = r = 1`` gives the equality-tight boundary case where
    ``g = 1/mu`` solves the equality ODE exactly; there ``theta`` is drawn
    from ``(0, 1/p]`` so that this boundary solution is not repelling.

    Returns ``(ineq, cert, g0)``; ``cert.mu`` and all coefficients are closed
    forms, so :func:`instance_metadata` can record the draw.
    """
    if not 0 < margin <= 1:
        raise DecayError(f"margin must lie in (0, 1], got {margin}")
    if not p > 1:
        raise DecayError(f"p must exceed 1, got {p}")
    rng = np.random.default_rng(np.uint64(seed))
    t0 = rng.uniform(0.0, 2.0)
    kind, mu, log_rate, power, params = _certificate_family(rng)
    gap = rng.uniform(0.05, 1.0)
    if theta is not None:
        th = float(theta)
    elif margin < 1:
        th = rng.uniform(0.05, 0.95)
    else:
        # z = g mu obeys z' = G (-z + theta z**p + 1 - theta); the fixed point
        # z = 1 repels when p theta > 1, which no finite-precision oracle tracks.
        th = rng.uniform(0.05, 1.0 / p)
    ratio = rng.uniform(0.05, 0.95) if r is None else float(r)
    gamma = log_rate + Constant(gap)
    alpha = power(p - 1.0, th * margin * gap)
    beta = power(-1.0, (1.0 - th) * margin * gap)
    ineq = ContinuousInequality(t0=t0, p=p, gamma=gamma, alpha=alpha, beta=beta)
    cert = Certificate(mu)
    g0 = ratio / float(mu(t0))
    return ineq, cert, g0


def instance_metadata(seed: int, p: float, margin: float, ineq: ContinuousInequality, g0: float) -> dict:
    return {"seed": int(seed), "p": p, "margin": margin, "g0": g0, "inequality": ineq.to_dict()}


def generate_certified_discrete_instance(seed: int, p: float, N: int, margin: float, *, r=None, theta=None):
    """Discrete counterpart of :func:`generate_certified_instance`.

    ``mu[n] = m0 (1 + kappa n)**s`` grows polynomially (so ``N = 10**4`` stays
    finite). Steps ``h[n]`` are either all one or drawn from ``[0.2, 1]``.
    The gap ``G[n] = gamma[n] - (mu[n+1] - mu[n]) / (mu[n] h[n])`` is set to
    ``u (1 - growth[n]) / h[n]`` so ``h[n] gamma[n] < 1``.

    Returns ``(dineq, dcert, g0)`` with sequences of length ``N + 1``.
    """
    if not 0 < margin <= 1:
        raise DecayError(f"margin must lie in (0, 1], got {margin}")
    rng = np.random.default_rng(np.uint64(seed))
    m0 = rng.uniform(0.5, 2.0)
    kappa = rng.uniform(1e-3, 0.1)
    s = rng.uniform(0.2, 2.0)
    u = rng.uniform(0.05, 0.9)
    th = rng.uniform(0.05, 0.95) if theta is None else float(theta)
    ratio = rng.uniform(0.05, 0.95) if r is None else float(r)
    n = np.arange(N + 2, dtype=float)
    mu_ext = m0 * (1.0 + kappa * n) ** s
    if rng.random() < 0.5:
        h = np.ones(N + 1)
    else:
        h = rng.uniform(0.2, 1.0, size=N + 1)
    growth = mu_ext[1:] / mu_ext[:-1] - 1.0  # = h * (mu[n+1]-mu[n])/(mu[n] h)
    mu = mu_ext[:-1]
    gap = u * (1.0 - growth) / h
    gamma = growth / h + gap
    alpha = th * margin * mu ** (p - 1.0) * gap
    beta = (1.0 - th) * margin * gap / mu
    dineq = DiscreteInequality(p=p, gamma=gamma, alpha=alpha, beta=beta, h=h)
    dcert = DiscreteCertificate(mu)
    g0 = ratio / mu[0]
    return dineq, dcert, g0
