"""One-dimensional half-line formulas for the boundary constant d_s(N).

With a cutoff pair (beta, xi = 1 - beta) and G(r) = r^{2s-1} xi(r):

    -e_s   = int_0^inf ((2s-1) xi^2 + r xi xi') (-Delta)^s_{R+} G dr
    f_{N,s} = h_{N,s} iint r^{2-2s} (G(r) - G(q))^2 |r-q|^{-1-2s} (r-q)(beta(r) - beta(q)) / |r-q|^2
    g_s    = c_{1,s} iint (G(t) - G(q))^2 |t-q|^{-1-2s} t^{2-2s} xi'(t)

and d_s(N, xi) = e_s + f_{N,s} + g_s.  All three are evaluated on (0, T) with
T = 4 by the pair rules of the quadrature module; the parts beyond T (where
only one argument is large and nothing is singular) use the substitution
q = T / v.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _backend
from .constants import FracParams, _check_s, c_frac
from .quadrature import (
    DomainError,
    EndGrading,
    QuadResult,
    QuadSpec,
    outer_rule,
    pair_rule,
    segment_rule,
)

T_CUT = 4.0
# pair rules on (0, T)^2 grow ~4x per level; deeper levels exhaust memory
MAX_LEVELS = 3
DEFAULT_SPEC = QuadSpec(rel_tol=1e-6, max_subdiv=MAX_LEVELS)


def _smooth_exp(x):
    with np.errstate(divide="ignore", over="ignore"):
        return np.where(x > 0, np.exp(-1.0 / np.where(x > 0, x, 1.0)), 0.0)


def _smooth_exp_d(x):
    with np.errstate(divide="ignore", over="ignore"):
        xs = np.where(x > 0, x, 1.0)
        return np.where(x > 0, np.exp(-1.0 / xs) / (xs * xs), 0.0)


@dataclass(frozen=True)
class CutoffProfile:
    """beta == 1 on [0, 1], == 0 on [2, inf), monotone in between; xi = 1 - beta.

    kind "exp" is the C-infinity smoothstep psi(2-t) / (psi(2-t) + psi(t-1))
    with psi(x) = exp(-1/x); kind "poly7" is the degree-7 smoothstep
    (C^3 at the joints).
    """

    kind: str = "exp"

    def __post_init__(self):
        if self.kind not in ("exp", "poly7"):
            raise DomainError(f"unknown cutoff kind {self.kind!r}")

    @property
    def name(self) -> str:
        return {"exp": "A", "poly7": "B"}[self.kind]

    def _step(self, t):
        """Value and derivative of xi on (1, 2), with tau = t - 1."""
        tau = np.clip(np.asarray(t, dtype=float) - 1.0, 0.0, 1.0)
        if self.kind == "poly7":
            v = tau**4 * (35.0 - 84.0 * tau + 70.0 * tau**2 - 20.0 * tau**3)
            dv = 140.0 * tau**3 * (1.0 - tau) ** 3
            return v, dv
        a, b = _smooth_exp(tau), _smooth_exp(1.0 - tau)
        da, db = _smooth_exp_d(tau), -_smooth_exp_d(1.0 - tau)
        den = a + b
        return a / den, (da * b - a * db) / (den * den)

    def xi(self, t):
        t = np.abs(np.asarray(t, dtype=float))
        return self._step(t)[0]

    def dxi(self, t):
        t = np.asarray(t, dtype=float)
        return np.sign(t) * self._step(np.abs(t))[1]

    def beta(self, t):
        return 1.0 - self.xi(t)

    def dbeta(self, t):
        return -self.dxi(t)

    def beta_small(self, t):
        """beta computed as the complementary step (accurate where beta is tiny)."""
        t = np.abs(np.asarray(t, dtype=float))
        if self.kind == "poly7":
            u = np.clip(2.0 - t, 0.0, 1.0)
            return u**4 * (35.0 - 84.0 * u + 70.0 * u**2 - 20.0 * u**3)
        tau = np.clip(t - 1.0, 0.0, 1.0)
        a, b = _smooth_exp(tau), _smooth_exp(1.0 - tau)
        return b / (a + b)


PROFILE_A = CutoffProfile("exp")
PROFILE_B = CutoffProfile("poly7")


def _G(prof: CutoffProfile, t, e):
    return np.asarray(t, dtype=float) ** e * prof.xi(t)


def _Gb(prof: CutoffProfile, t, e):
    return np.asarray(t, dtype=float) ** e * prof.beta_small(t)


def _dGb(prof: CutoffProfile, x, off, e):
    """t^e beta(t) at y = x + off minus its value at x, without cancellation."""
    y = x + off
    with np.errstate(divide="ignore"):
        dp = x**e * np.expm1(e * np.log1p(off / x))
    near_two = x > 1.5
    db = np.where(near_two, prof.beta_small(y) - prof.beta_small(x), prof.xi(x) - prof.xi(y))
    return dp * prof.beta_small(y) + x**e * db


def _halfline_op_beta(prof: CutoffProfile, r: np.ndarray, s: float, spec: QuadSpec,
                      to_two: np.ndarray | None = None) -> np.ndarray:
    """(-Delta)^s_{R+} (t^{2s-1} beta)(r) / c_{1,s} for 0 < r < 2 (beta supported in [0, 2]).

    ``to_two`` is 2 - r when known more accurately than the subtraction.
    """
    e = 2.0 * s - 1.0
    r = np.asarray(r, dtype=float)
    rr = 2.0 - r if to_two is None else np.asarray(to_two, dtype=float)
    owner, dl, dr, off, w = _backend.pv_rules(
        r, rr, (1.0,), 2.0, 1.0 - 2.0 * s, spec.order, spec.sigma, spec.max_panel, 1e-14
    )
    gr = _Gb(prof, r, e)
    vals = -w * _dGb(prof, r[owner], off, e) * np.abs(off) ** (-1.0 - 2.0 * s)
    inside = np.bincount(owner, weights=vals, minlength=r.size)
    # beyond 2 the function vanishes: int_2^inf g(r) (t - r)^{-1-2s} dt
    return inside + gr * rr ** (-2.0 * s) / (2.0 * s)


def _e_body(prof: CutoffProfile, s: float, sp: QuadSpec) -> float:
    e = 2.0 * s - 1.0
    # (1, 2): weight (2s-1) xi^2 + r xi xi' times the operator of r^e beta
    X, w = outer_rule(1.0, 2.0, sp, None, None, depth=1e-10)
    r = X.x
    xi, dxi = prof.xi(r), prof.dxi(r)
    weight = e * xi * xi + r * xi * dxi
    part1 = float(np.dot(w, weight * _halfline_op_beta(prof, r, s, sp, X.dr)))
    # (2, inf): xi = 1, the operator is -int_0^2 t^e beta(t) (r - t)^{-1-2s} dt;
    # integrating in r first leaves -int_0^2 t^e beta(t) (2 - t)^{-2s} / (2s) dt
    Y, wy = outer_rule(0.0, 2.0, sp, None, None, breaks=(1.0,), break_depth=1e-10)
    part2 = -e * float(np.dot(wy, _Gb(prof, Y.x, e) * Y.dr ** (-2.0 * s))) / (2.0 * s)
    return part1 + part2


def _tail_rule(sp: QuadSpec):
    """Nodes q in (T, inf) via q = T / v, weights include the Jacobian."""
    g = segment_rule(1.0, EndGrading(1e-14, None), None, order=sp.order, sigma=sp.sigma, max_panel=sp.max_panel)
    v = g.from_left
    return T_CUT / v, g.weights * T_CUT / (v * v)


def _f_body(prof: CutoffProfile, s: float, sp: QuadSpec) -> float:
    e = 2.0 * s - 1.0
    rule = pair_rule(
        0.0, T_CUT, sp, diag_alpha=1.0 - 2.0 * s, outer_alpha=(None, None), inner_alpha=(None, None),
        breaks=(1.0, 2.0), singular_lo=False,
    )
    X = rule.xpts()
    r, q, off = X.x, rule.inner.x, rule.offset
    dG = _G(prof, r, e) - _G(prof, q, e)
    db = prof.beta(r) - prof.beta(q)
    h = np.abs(off)
    # (r - q)(beta(r) - beta(q)) / |r - q|^{3+2s}, with r - q = -off
    vals = r ** (2.0 - 2.0 * s) * dG * dG * (-off) * db * h ** (-3.0 - 2.0 * s)
    core = float(np.dot(rule.w, vals))
    # one argument beyond T, the other in (0, 2)
    big, wb = _tail_rule(sp)
    Z, wz = outer_rule(0.0, 2.0, sp, None, None, breaks=(1.0,), grade_lo=False, break_depth=1e-10)
    z = Z.x[:, None]
    B, WB = big[None, :], wb[None, :]
    W = wz[:, None] * WB
    Gz, GB = _G(prof, z, e), _G(prof, B, e)
    bz = prof.beta(z)
    # r = z, q = B: (r - q)(beta(z) - 0) / |r-q|^{3+2s}
    t1 = z ** (2.0 - 2.0 * s) * (Gz - GB) ** 2 * (-(B - z) ** (-2.0 - 2.0 * s)) * bz
    # r = B, q = z: (B - z)(0 - beta(z))
    t2 = B ** (2.0 - 2.0 * s) * (Gz - GB) ** 2 * (-(B - z) ** (-2.0 - 2.0 * s)) * bz
    return core + float(np.sum(W * (t1 + t2)))


def _g_body(prof: CutoffProfile, s: float, sp: QuadSpec) -> float:
    e = 2.0 * s - 1.0
    X, wx = outer_rule(1.0, 2.0, sp, None, None, depth=1e-10)
    owner, dl, dr, off, w = _backend.inner_rules(
        X.dl + 1.0, T_CUT - X.x, (1.0, 2.0), T_CUT, 1.0 - 2.0 * s, None, None, False,
        sp.order, sp.sigma, sp.max_panel, 1e-14,
    )
    t = X.x[owner]
    q = dl
    dG = _G(prof, t, e) - _G(prof, q, e)
    outer_wt = t ** (2.0 - 2.0 * s) * prof.dxi(t)
    core = float(np.dot(w * wx[owner], dG * dG * np.abs(off) ** (-1.0 - 2.0 * s) * outer_wt))
    big, wb = _tail_rule(sp)
    tt = X.x[:, None]
    tail_vals = (_G(prof, tt, e) - _G(prof, big[None, :], e)) ** 2 * (big[None, :] - tt) ** (-1.0 - 2.0 * s)
    tail = float(np.sum((wx * X.x ** (2.0 - 2.0 * s) * prof.dxi(X.x))[:, None] * wb[None, :] * tail_vals))
    return core + tail


def _converge(body, spec: QuadSpec) -> QuadResult:
    history = [body(spec)]
    for level in range(1, min(spec.max_subdiv, MAX_LEVELS) + 1):
        history.append(body(spec.refined(level)))
        if abs(history[-1] - history[-2]) <= spec.tolerance(history[-1]):
            break
    err = abs(history[-1] - history[-2])
    return QuadResult(history[-1], err, err <= spec.tolerance(history[-1]), 0, history)


def e_s(xi: CutoffProfile, s: float, spec: QuadSpec = DEFAULT_SPEC) -> QuadResult:
    s = _check_s(s, 0.5, 1.0)
    c1 = c_frac(1, s)
    res = _converge(lambda sp: _e_body(xi, s, sp), spec)
    return QuadResult(c1 * res.value, c1 * res.error, res.converged, 0, [c1 * v for v in res.history])


def f_Ns(xi: CutoffProfile, params: FracParams, spec: QuadSpec = DEFAULT_SPEC) -> QuadResult:
    h = params.h_ns
    res = _converge(lambda sp: _f_body(xi, params.s, sp), spec)
    return QuadResult(h * res.value, h * res.error, res.converged, 0, [h * v for v in res.history])


def g_s(xi: CutoffProfile, s: float, spec: QuadSpec = DEFAULT_SPEC) -> QuadResult:
    s = _check_s(s, 0.5, 1.0)
    c1 = c_frac(1, s)
    res = _converge(lambda sp: _g_body(xi, s, sp), spec)
    return QuadResult(c1 * res.value, c1 * res.error, res.converged, 0, [c1 * v for v in res.history])


@dataclass(frozen=True)
class AnalyticConstant:
    profile: str
    e: float
    f: float
    g: float
    error: float

    @property
    def value(self) -> float:
        return self.e + self.f + self.g

    def as_dict(self) -> dict:
        return {"profile": self.profile, "e_s": self.e, "f_Ns": self.f, "g_s": self.g,
                "d_s": self.value, "error": self.error}


def d_s_components(params: FracParams, xi: CutoffProfile, spec: QuadSpec = DEFAULT_SPEC) -> AnalyticConstant:
    e = e_s(xi, params.s, spec)
    f = f_Ns(xi, params, spec)
    g = g_s(xi, params.s, spec)
    return AnalyticConstant(xi.name, e.value, f.value, g.value, e.error + f.error + g.error)


def d_s_analytic(params: FracParams, xi1: CutoffProfile = PROFILE_A, xi2: CutoffProfile = PROFILE_B,
                 spec: QuadSpec = DEFAULT_SPEC):
    """(d_s(N, xi1), d_s(N, xi2), spread) plus the per-profile breakdowns."""
    a = d_s_components(params, xi1, spec)
    b = a if xi2 == xi1 else d_s_components(params, xi2, spec)
    return a.value, b.value, abs(a.value - b.value), (a, b)
