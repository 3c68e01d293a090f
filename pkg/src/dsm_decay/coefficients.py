"""Scalar time functions used as inequality coefficients and certificates.

Every function is vectorised: calling it with an array of times returns an
array of the same shape. Closed forms carry exact derivatives; tabulated
functions interpolate linearly and differentiate by finite differences.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import DecayError, DomainMismatch

__all__ = [
    "CoefficientFn",
    "Constant",
    "PowerLaw",
    "Exponential",
    "Tabulated",
    "Sum",
    "coefficient_from_dict",
]


class CoefficientFn:
    """Base class for ``t -> value`` maps on ``[t0, inf)``."""

    kind = "abstract"

    def __call__(self, t):
        raise NotImplementedError

    def derivative(self, t):
        raise NotImplementedError

    def check_domain(self, t0: float) -> None:
        """Raise if the function is not defined on ``[t0, inf)``."""

    def to_dict(self) -> dict:
        raise NotImplementedError

    def __add__(self, other: "CoefficientFn") -> "Sum":
        if not isinstance(other, CoefficientFn):
            other = Constant(float(other))
        return Sum((self, other))

    __radd__ = __add__


@dataclass(frozen=True)
class Constant(CoefficientFn):
    value: float
    kind = "constant"

    def __call__(self, t):
        return np.full_like(np.asarray(t, dtype=float), self.value)

    def derivative(self, t):
        return np.zeros_like(np.asarray(t, dtype=float))

    def to_dict(self):
        return {"kind": self.kind, "value": self.value}


@dataclass(frozen=True)
class PowerLaw(CoefficientFn):
    """``d / (c + t)**b``. Negative ``b`` gives a growing power."""

    d: float
    c: float
    b: float
    kind = "power"

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        return self.d / (self.c + t) ** self.b

    def derivative(self, t):
        t = np.asarray(t, dtype=float)
        return -self.b * self.d / (self.c + t) ** (self.b + 1.0)

    def check_domain(self, t0):
        if not self.c + t0 > 0:
            raise DecayError(f"power law needs c + t0 > 0, got c={self.c}, t0={t0}")

    def to_dict(self):
        return {"kind": self.kind, "d": self.d, "c": self.c, "b": self.b}


@dataclass(frozen=True)
class Exponential(CoefficientFn):
    """``A * exp(k t)``."""

    A: float
    k: float
    kind = "exp"

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        return self.A * np.exp(self.k * t)

    def derivative(self, t):
        t = np.asarray(t, dtype=float)
        return self.A * self.k * np.exp(self.k * t)

    def to_dict(self):
        return {"kind": self.kind, "A": self.A, "k": self.k}


class Tabulated(CoefficientFn):
    """Piecewise-linear interpolant of ``(t, value)`` samples.

    Outside the table the end values are held. The derivative uses central
    differences on interior nodes, one-sided differences at both ends, and is
    linearly interpolated between nodes; it is only defined inside the table.
    """

    kind = "table"

    def __init__(self, times: Sequence[float], values: Sequence[float]):
        times = np.asarray(times, dtype=float)
        values = np.asarray(values, dtype=float)
        if times.ndim != 1 or times.shape != values.shape or times.size < 2:
            raise DecayError("tabulated function needs two equal-length 1-D arrays of size >= 2")
        if np.any(np.diff(times) <= 0):
            raise DecayError("tabulated times must be strictly increasing")
        if not np.all(np.isfinite(values)):
            raise DecayError("tabulated values must be finite")
        self.times = times
        self.values = values
        self._slopes = np.gradient(values, times, edge_order=1)

    def __call__(self, t):
        return np.interp(np.asarray(t, dtype=float), self.times, self.values)

    def derivative(self, t):
        t = np.asarray(t, dtype=float)
        if np.any(t < self.times[0]) or np.any(t > self.times[-1]):
            raise DomainMismatch("derivative of a tabulated function queried outside its table")
        return np.interp(t, self.times, self._slopes)

    def check_domain(self, t0):
        if t0 < self.times[0]:
            raise DomainMismatch(f"table starts at {self.times[0]} > t0={t0}")

    def to_dict(self):
        return {"kind": self.kind, "t": self.times.tolist(), "values": self.values.tolist()}

    def __repr__(self):
        return f"Tabulated(n={self.times.size}, t=[{self.times[0]}, {self.times[-1]}])"


@dataclass(frozen=True)
class Sum(CoefficientFn):
    terms: tuple
    kind = "sum"

    def __call__(self, t):
        return sum(term(t) for term in self.terms)

    def derivative(self, t):
        return sum(term.derivative(t) for term in self.terms)

    def check_domain(self, t0):
        for term in self.terms:
            term.check_domain(t0)

    def to_dict(self):
        return {"kind": self.kind, "terms": [term.to_dict() for term in self.terms]}


def coefficient_from_dict(obj) -> CoefficientFn:
    """Build a coefficient from its JSON form; bare numbers mean constants."""
    if isinstance(obj, (int, float)):
        return Constant(float(obj))
    if not isinstance(obj, dict) or "kind" not in obj:
        raise DecayError(f"cannot parse coefficient {obj!r}")
    kind = obj["kind"]
    if kind == "constant":
        return Constant(float(obj["value"]))
    if kind == "power":
        return PowerLaw(float(obj["d"]), float(obj["c"]), float(obj["b"]))
    if kind == "exp":
        return Exponential(float(obj["A"]), float(obj["k"]))
    if kind == "table":
        return Tabulated(obj["t"], obj["values"])
    if kind == "sum":
        return Sum(tuple(coefficient_from_dict(term) for term in obj["terms"]))
    raise DecayError(f"unknown coefficient kind {kind!r}")
