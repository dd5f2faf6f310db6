"""Closed-form constants of the regional fractional Laplacian."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import gamma as _G
from scipy.special import gammaln

from .quadrature import DomainError, EndGrading, segment_rule


def _check_N(N) -> int:
    if isinstance(N, bool) or int(N) != N or N < 1:
        raise DomainError(f"dimension N must be a positive integer, got {N!r}")
    return int(N)


def _check_s(s, lo=0.0, hi=1.0) -> float:
    s = float(s)
    if not (lo < s < hi) or math.isnan(s):
        raise DomainError(f"order s must lie in ({lo}, {hi}), got {s}")
    return s


def c_frac(N: int, s: float) -> float:
    """c_{N,s} = s 4^s pi^{-N/2} Gamma(N/2+s) / Gamma(1-s)."""
    N = _check_N(N)
    s = _check_s(s)
    return s * 4.0**s * math.pi ** (-N / 2.0) * float(_G(N / 2.0 + s) / _G(1.0 - s))


def _angular(N: int, p: float) -> float:
    """Integral over R^{N-1} of (1+|z|^2)^{-p}, p > (N-1)/2."""
    if N == 1:
        return 1.0
    m = N - 1
    return math.pi ** (m / 2.0) * math.exp(gammaln(p - m / 2.0) - gammaln(p))


def a_frac(N: int, s: float) -> float:
    """a_{N,s} = int_{R^{N-1}} (1+|z|^2)^{-(N+2s)/2} dz; equals 1 for N = 1."""
    N = _check_N(N)
    s = _check_s(s)
    return _angular(N, (N + 2.0 * s) / 2.0)


def h_frac(N: int, s: float) -> float:
    """h_{N,s} = (N+2s) c_{N,s} / 2 * int_{R^{N-1}} (1+|z|^2)^{-(N+2s+1)/2} dz."""
    N = _check_N(N)
    s = _check_s(s, 0.5, 1.0)
    return (N + 2.0 * s) * c_frac(N, s) / 2.0 * _angular(N, (N + 2.0 * s + 1.0) / 2.0)


def gamma_alpha(alpha: float, s: float, order: int = 24) -> float:
    """gamma(alpha, s) = c_{1,s} int_0^1 (1-t^a)(1-t^{2s-1-a}) / (1-t)^{1+2s} dt.

    The factors are evaluated as -expm1(a*log t) with log t taken from the
    exact distance 1-t, so nothing cancels near t = 1, where the integrand
    behaves like (1-t)^{1-2s}.  Both ends get Gauss-Jacobi panels.
    """
    s = _check_s(s)
    alpha = float(alpha)
    if not (-1.0 < alpha < 2.0 * s):
        raise DomainError("alpha must lie in (-1, 2s)")
    b = 2.0 * s - 1.0 - alpha
    e0 = min(0.0, alpha, b)
    g = segment_rule(
        1.0,
        EndGrading(1e-15, e0 if e0 < 0 else None),
        EndGrading(1e-15, 1.0 - 2.0 * s),
        order=order,
        sigma=0.3,
    )
    t, tc = g.from_left, g.from_right
    with np.errstate(divide="ignore"):
        logt = np.where(t < 0.5, np.log(t), np.log1p(-tc))
    f = np.expm1(alpha * logt) * np.expm1(b * logt) / tc ** (1.0 + 2.0 * s)
    return c_frac(1, s) * float(np.dot(g.weights, f))


@dataclass(frozen=True)
class FracParams:
    """(N, s) with 1/2 < s < 1 and the derived constants."""

    N: int
    s: float
    c_ns: float
    a_ns: float
    h_ns: float

    @classmethod
    def make(cls, N: int, s: float) -> "FracParams":
        N = _check_N(N)
        s = _check_s(s, 0.5, 1.0)
        return cls(N, s, c_frac(N, s), a_frac(N, s), h_frac(N, s))

    def __post_init__(self):
        _check_N(self.N)
        _check_s(self.s, 0.5, 1.0)

    def as_dict(self) -> dict:
        return {"N": self.N, "s": self.s, "c_ns": self.c_ns, "a_ns": self.a_ns, "h_ns": self.h_ns}


def sphere_area(N: int) -> float:
    """|S^{N-1}| = 2 pi^{N/2} / Gamma(N/2); equals 2 for N = 1 (two boundary points)."""
    N = _check_N(N)
    return 2.0 * math.pi ** (N / 2.0) / float(_G(N / 2.0))
