"""Monotone test problems with independently computed minimal-norm solutions."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .errors import DecayError, ExponentOutOfRange, RankOutOfRange

__all__ = [
    "MonotoneProblem",
    "ProblemSpec",
    "make_scalar_linear",
    "make_singular_linear",
    "make_power_monotone",
    "make_cubic_monotone",
    "build_problem",
    "estimate_holder_constant",
    "random_ball_points",
]

PROBLEM_NAMES = ("scalar_linear", "singular_linear", "power_monotone", "cubic_monotone")


@dataclass(frozen=True)
class MonotoneProblem:
    """``F(u) = f`` on R^n with ``F`` monotone and Jacobian ``J``.

    ``M_p`` is the constant of ``||F(v) - F(u) - J(u)(v - u)|| <= M_p ||v - u||**p``
    (None when unknown), ``known_y`` the minimal-norm solution when available.
    """

    dim: int
    F: Callable[[np.ndarray], np.ndarray]
    J: Callable[[np.ndarray], np.ndarray]
    f: np.ndarray
    known_y: Optional[np.ndarray] = None
    M_p: Optional[float] = None
    p: float = 1.5
    symmetric: bool = True
    name: str = "custom"
    params: dict = field(default_factory=dict)

    def residual(self, u, a=0.0):
        return self.F(u) + a * u - self.f

    def jacobian_psd_probe(self, n_probes=100, seed=0, scale=1.0) -> float:
        """Smallest ``<J(u) v, v> / ||v||**2`` over random ``u, v``."""
        rng = np.random.default_rng(seed)
        worst = np.inf
        for _ in range(n_probes):
            u = scale * rng.standard_normal(self.dim)
            v = rng.standard_normal(self.dim)
            worst = min(worst, float(v @ self.J(u) @ v) / float(v @ v))
        return worst

    def monotonicity_probe(self, n_pairs=1000, seed=0, scale=2.0) -> float:
        """Smallest ``<F(u) - F(v), u - v>`` over random pairs."""
        rng = np.random.default_rng(seed)
        worst = np.inf
        for _ in range(n_pairs):
            u = scale * rng.standard_normal(self.dim)
            v = scale * rng.standard_normal(self.dim)
            worst = min(worst, float((self.F(u) - self.F(v)) @ (u - v)))
        return worst


@dataclass(frozen=True)
class ProblemSpec:
    name: str
    params: dict = field(default_factory=dict)
    seed: int = 0

    def __post_init__(self):
        if self.name not in PROBLEM_NAMES:
            raise DecayError(f"unknown problem {self.name!r}; choose from {PROBLEM_NAMES}")

    def to_dict(self) -> dict:
        return {"name": self.name, "params": dict(self.params), "seed": int(self.seed)}

    @classmethod
    def from_dict(cls, obj: dict) -> "ProblemSpec":
        if not isinstance(obj, dict) or "name" not in obj:
            raise DecayError("problem spec needs a 'name'")
        return cls(obj["name"], dict(obj.get("params", {})), int(obj.get("seed", 0)))

    def build(self) -> MonotoneProblem:
        return build_problem(self)


def random_ball_points(rng, n_points, dim, radius):
    """Uniform samples from the closed Euclidean ball ``B(0, radius)``."""
    x = rng.standard_normal((n_points, dim))
    x /= np.linalg.norm(x, axis=1, keepdims=True)
    r = radius * rng.random(n_points) ** (1.0 / dim)
    return x * r[:, None]


def estimate_holder_constant(F, J, p, radius, dim, n_pairs=10_000, seed=0, safety=1.5):
    """Probe ``max ||F(v) - F(u) - J(u)(v - u)|| / ||v - u||**p`` on ``B(0, radius)``.

    Returns the largest observed ratio times ``safety``.
    """
    rng = np.random.default_rng(seed)
    us = random_ball_points(rng, n_pairs, dim, radius)
    vs = random_ball_points(rng, n_pairs, dim, radius)
    worst = 0.0
    for u, v in zip(us, vs):
        h = v - u
        dist = np.linalg.norm(h)
        if dist == 0:
            continue
        rem = F(v) - F(u) - J(u) @ h
        worst = max(worst, float(np.linalg.norm(rem)) / dist**p)
    return safety * worst


def make_scalar_linear(k: float, f: float, p: float = 1.5) -> MonotoneProblem:
    """``F(u) = k u`` in one dimension."""
    if not k > 0:
        raise DecayError(f"k must be positive, got {k}")
    kk = float(k)
    return MonotoneProblem(
        dim=1,
        F=lambda u: kk * np.asarray(u, dtype=float),
        J=lambda u: np.array([[kk]]),
        f=np.array([float(f)]),
        known_y=np.array([float(f) / kk]),
        M_p=0.0,
        p=p,
        name="scalar_linear",
        params={"k": kk, "f": float(f), "p": p},
    )


def _random_orthogonal(rng, n):
    q, r = np.linalg.qr(rng.standard_normal((n, n)))
    return q * np.sign(np.diag(r))


def make_singular_linear(n: int, rank: int, seed: int = 0, *, Q=None, spectrum=None, x0=None, p: float = 1.5):
    """``F(u) = B u`` with ``B = Q^T D Q`` of the given rank.

    ``D`` has ``rank`` entries drawn from ``[0.5, 2]`` followed by zeros and
    ``f = B x0`` for a standard normal ``x0``. ``Q``, ``spectrum`` and ``x0``
    may be fixed explicitly. The minimal-norm solution is the spectral
    pseudoinverse ``Q^T D^+ Q f``.
    """
    if not (1 <= rank < n):
        raise RankOutOfRange(f"need 1 <= rank < n, got rank={rank}, n={n}")
    rng = np.random.default_rng(np.uint64(seed))
    Q = _random_orthogonal(rng, n) if Q is None else np.asarray(Q, dtype=float)
    if spectrum is None:
        spectrum = rng.uniform(0.5, 2.0, size=rank)
    spectrum = np.asarray(spectrum, dtype=float)
    if spectrum.shape != (rank,):
        raise DecayError("spectrum must have exactly `rank` entries")
    x0 = rng.standard_normal(n) if x0 is None else np.asarray(x0, dtype=float)
    D = np.zeros(n)
    D[:rank] = spectrum
    B = Q.T @ (D[:, None] * Q)
    B = 0.5 * (B + B.T)
    f = B @ x0
    D_pinv = np.zeros(n)
    D_pinv[:rank] = 1.0 / spectrum
    y = Q.T @ (D_pinv * (Q @ f))
    B.setflags(write=False)
    return MonotoneProblem(
        dim=n,
        F=lambda u: B @ u,
        J=lambda u: B,
        f=f,
        known_y=y,
        M_p=0.0,
        p=p,
        name="singular_linear",
        params={"n": n, "rank": rank, "seed": int(seed), "B": B, "x0": x0, "Q": Q},
    )


def _bisect_increasing(phi, target, lo, hi, tol=1e-14, max_iter=200):
    """Componentwise bisection for ``phi(x) = target`` with ``phi`` increasing."""
    lo = np.array(lo, dtype=float)
    hi = np.array(hi, dtype=float)
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        value = phi(mid)
        below = value < target
        exact = value == target
        lo = np.where(below | exact, mid, lo)
        hi = np.where(below & ~exact, hi, mid)
        if np.all(hi - lo <= tol * np.maximum(1.0, np.abs(mid))):
            break
    return 0.5 * (lo + hi)


def make_power_monotone(n: int, p: float, kappa: float, seed: int = 0, *, f=None) -> MonotoneProblem:
    """Componentwise ``F_i(u) = u_i + kappa |u_i|**(p-1) u_i``.

    The derivative ``1 + kappa p |u|**(p-1)`` is Hoelder continuous with
    exponent ``p - 1``, so the Taylor remainder is bounded by
    ``2**(2-p) kappa ||h||**p``; ``M_p = 2 kappa`` is used as a safe constant.
    """
    if not 1 < p < 2:
        raise ExponentOutOfRange(f"p must lie in (1, 2), got {p}")
    if not kappa > 0:
        raise DecayError(f"kappa must be positive, got {kappa}")
    rng = np.random.default_rng(np.uint64(seed))
    f = rng.uniform(-1.0, 1.0, size=n) if f is None else np.asarray(f, dtype=float).reshape(-1)
    n = f.size

    def F(u):
        u = np.asarray(u, dtype=float)
        return u + kappa * np.abs(u) ** (p - 1.0) * u

    def J(u):
        return np.diag(1.0 + kappa * p * np.abs(np.asarray(u, dtype=float)) ** (p - 1.0))

    bracket = np.abs(f) + 1.0
    y = _bisect_increasing(F, f, -bracket, bracket)
    return MonotoneProblem(
        dim=n,
        F=F,
        J=J,
        f=f,
        known_y=y,
        M_p=2.0 * kappa,
        p=p,
        name="power_monotone",
        params={"n": n, "p": p, "kappa": kappa, "seed": int(seed)},
    )


def _solve_cubic(kappa, f):
    """Real root of ``kappa y**3 + y - f = 0`` (unique since the map increases)."""
    # Cardano: depressed cubic y**3 + P y + Qc = 0 with P = 1/kappa, Qc = -f/kappa.
    P = 1.0 / kappa
    Qc = -f / kappa
    disc = np.sqrt(Qc**2 / 4.0 + P**3 / 27.0)
    y = np.cbrt(-Qc / 2.0 + disc) + np.cbrt(-Qc / 2.0 - disc)
    # One Newton polish step against cancellation in the Cardano sum.
    y = y - (kappa * y**3 + y - f) / (3.0 * kappa * y**2 + 1.0)
    return y


def make_cubic_monotone(n: int, kappa: float, seed: int = 0, *, f=None, radius=None, p: float = 1.9):
    """Componentwise ``F_i(u) = u_i + kappa u_i**3``.

    ``M_p`` is probed on ``B(0, radius)`` (default ``2 ||y|| + 2``) with
    exponent ``p = 1.9``, which is valid locally for any C^2 map.
    """
    if not kappa > 0:
        raise DecayError(f"kappa must be positive, got {kappa}")
    rng = np.random.default_rng(np.uint64(seed))
    f = rng.uniform(-1.0, 1.0, size=n) if f is None else np.asarray(f, dtype=float).reshape(-1)
    n = f.size

    def F(u):
        u = np.asarray(u, dtype=float)
        return u + kappa * u**3

    def J(u):
        return np.diag(1.0 + 3.0 * kappa * np.asarray(u, dtype=float) ** 2)

    y = _solve_cubic(kappa, f)
    if radius is None:
        radius = 2.0 * float(np.linalg.norm(y)) + 2.0
    M_p = estimate_holder_constant(F, J, p, radius, n, seed=int(seed))
    return MonotoneProblem(
        dim=n,
        F=F,
        J=J,
        f=f,
        known_y=y,
        M_p=M_p,
        p=p,
        name="cubic_monotone",
        params={"n": n, "kappa": kappa, "seed": int(seed), "radius": radius},
    )


def build_problem(spec: ProblemSpec) -> MonotoneProblem:
    params = dict(spec.params)
    if spec.name == "scalar_linear":
        return make_scalar_linear(float(params.get("k", 1.0)), float(params.get("f", 0.0)), float(params.get("p", 1.5)))
    if spec.name == "singular_linear":
        return make_singular_linear(
            int(params.get("n", 2)),
            int(params.get("rank", 1)),
            spec.seed,
            p=float(params.get("p", 1.5)),
        )
    if spec.name == "power_monotone":
        return make_power_monotone(
            int(params.get("n", 10)),
            float(params.get("p", 1.5)),
            float(params.get("kappa", 1.0)),
            spec.seed,
        )
    if spec.name == "cubic_monotone":
        return make_cubic_monotone(int(params.get("n", 10)), float(params.get("kappa", 1.0)), spec.seed)
    raise DecayError(f"unknown problem {spec.name!r}")
