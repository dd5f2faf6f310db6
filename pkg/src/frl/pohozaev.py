"""Assembly of the weighted Pohozaev-type identities.

For a solution u and D = delta^{2-2s} the linear identity reads

    -int D x.grad u L u dx = (N-2s)/2 [u]^2_D - d_s B + R[u] / 2

with [u]^2_w = (c/2) iint (u(x)-u(y))^2 |x-y|^{-N-2s} w(x) dx dy,
B = int_{boundary} (u/delta^{2s-1})^2 x.nu and
R[u] = (c/2) iint (u(x)-u(y))^2 |x-y|^{-N-2s} omega_s(x,y) dx dy.

The factor 1/2 in front of R is what the compact form -2 int Y_s.grad u L u
(Y_s = D x) gives after symmetrising omega_{Y_s} = omega_s + (N-2s)(D(x)+D(y))/2
on the diagonal-symmetric numerator; it is exposed as REMAINDER_COEFFICIENT
and the estimate with coefficient 1 is reported alongside.

For L u = f(u) with F' = f the same identity, after -int D x.grad F(u) is
integrated by parts and [u]^2_1 = int u f(u) is used, becomes

    int (2N F(u) + (2s-N) u f(u)) = -2 d_s B + R~[u],
    R~[u] = -2 int F(u) x.grad D - 2N int (D-1) F(u) + (N-2s) [u]^2_{D-1} + R[u].
"""
from __future__ import annotations

import hashlib
import json
import math
from dataclasses import asdict, dataclass, field
from typing import Callable, Sequence

import numpy as np

from .constants import FracParams
from .operator import (
    DomainGeometry,
    _check_params,
    energy_pairs,
    evaluate,
    frac_laplacian_at,
    omega_s_symmetric,
    pair_measure,
)
from .parallel import ordered_map
from .quadrature import DomainError, Points, QuadSpec, iterated_integral, outer_rule
from .solver import SpectralFunction, boundary_trace, solve_eigen, weighted_rule

REMAINDER_COEFFICIENT = 0.5
NONLINEAR_BOUNDARY_COEFFICIENT = 2.0


class TraceTooSmall(DomainError):
    """The boundary factor is below 10x the quadrature budget; d_s is not identifiable.

    The assembled report is attached as ``report``.
    """

    def __init__(self, message: str, report=None):
        super().__init__(message)
        self.report = report


# ---------------------------------------------------------------------------
# test functions and fields


@dataclass(frozen=True)
class Bump:
    """C-infinity bump exp(1 - 1/(1 - t^2)), t = (x - center)/radius; zero trace."""

    center: float = 0.0
    radius: float = 0.6
    height: float = 1.0

    def _t(self, x):
        return (np.asarray(x, dtype=float) - self.center) / self.radius

    def __call__(self, x):
        t = self._t(x)
        inside = np.abs(t) < 1.0
        ts = np.where(inside, t, 0.0)
        return np.where(inside, self.height * np.exp(1.0 - 1.0 / (1.0 - ts * ts)), 0.0)

    def derivative(self, x):
        t = self._t(x)
        inside = np.abs(t) < 1.0
        ts = np.where(inside, t, 0.0)
        den = 1.0 - ts * ts
        return np.where(inside, self(x) * (-2.0 * ts / (den * den)) / self.radius, 0.0)

    def eval_points(self, pts: Points):
        return self(pts.x)

    def derivative_points(self, pts: Points):
        return self.derivative(pts.x)

    @property
    def support(self) -> tuple:
        return (self.center - self.radius, self.center + self.radius)


@dataclass(frozen=True)
class VectorField:
    """Interval vector field Y with its divergence and boundary values (Y(-1), Y(1))."""

    name: str
    value: Callable
    div: Callable
    ends: tuple
    # exponent of |div Y| at the boundary (for the quadrature grading); None if bounded
    boundary_alpha: float | None = None


def field_constant(c: float = 1.0) -> VectorField:
    return VectorField("constant", lambda X: np.full(X.x.shape, c), lambda X: np.zeros(X.x.shape), (c, c))


def field_identity() -> VectorField:
    return VectorField("x", lambda X: X.x.copy(), lambda X: np.ones(X.x.shape), (-1.0, 1.0))


def field_Ys(s: float, dom: DomainGeometry = DomainGeometry()) -> VectorField:
    """Y = delta^{2-2s} x; Lipschitz away from the boundary, div ~ delta^{1-2s} at it."""
    p = 2.0 - 2.0 * s
    return VectorField(
        "delta^(2-2s) x",
        lambda X: dom.delta_pow(X, p) * X.x,
        lambda X: dom.delta_pow(X, p) + dom.x_grad_delta_pow(X, p),
        (0.0, 0.0),
        1.0 - 2.0 * s,
    )


# ---------------------------------------------------------------------------
# reports


@dataclass
class IdentityReport:
    lhs: float
    seminorm_term: float
    boundary_factor: float
    remainder: float
    ds_estimate: float
    quadrature_error_budget: float
    remainder_budget: float
    remainder_coefficient: float = REMAINDER_COEFFICIENT
    ds_estimate_unit_coefficient: float = float("nan")
    ds_error: float = float("inf")
    term_errors: dict = field(default_factory=dict)
    settings: dict = field(default_factory=dict)

    def residual(self, d: float) -> float:
        return self.lhs - (self.seminorm_term - d * self.boundary_factor + self.remainder_coefficient * self.remainder)

    def as_dict(self) -> dict:
        return _clean(asdict(self))


@dataclass
class NonlinearReport:
    lhs_nl: float
    boundary_factor: float
    remainder_tilde: float
    subterms: dict
    ds_estimate: float
    quadrature_error_budget: float
    ds_error: float = float("inf")
    boundary_coefficient: float = NONLINEAR_BOUNDARY_COEFFICIENT
    settings: dict = field(default_factory=dict)

    def as_dict(self) -> dict:
        return _clean(asdict(self))


def _clean(d):
    if isinstance(d, dict):
        return {k: _clean(v) for k, v in d.items()}
    if isinstance(d, (list, tuple)):
        return [_clean(v) for v in d]
    if isinstance(d, (np.floating, np.integer)):
        return d.item()
    if isinstance(d, float) and not math.isfinite(d):
        return None if math.isnan(d) else ("inf" if d > 0 else "-inf")
    return d


def settings_hash(settings: dict) -> str:
    blob = json.dumps(settings, sort_keys=True, default=str).encode()
    return hashlib.sha256(blob).hexdigest()[:16]


def _settings(u, params: FracParams, dom: DomainGeometry, spec: QuadSpec, levels: int) -> dict:
    st = {
        "N": params.N,
        "s": params.s,
        "delta_spec": dom.spec_dict(),
        "quadrature": asdict(spec),
        "levels": levels,
    }
    if isinstance(u, SpectralFunction):
        st["basis_degree"] = u.basis_degree
        st["coeffs_digest"] = hashlib.sha256(np.asarray(u.c, dtype=float).tobytes()).hexdigest()[:16]
    else:
        st["function"] = repr(u)
    st["hash"] = settings_hash(st)
    return st


# ---------------------------------------------------------------------------
# building blocks


def _trace_factor(u, dom: DomainGeometry) -> float:
    if not isinstance(u, SpectralFunction):
        return 0.0
    tr = boundary_trace(u)
    if dom.kind == "interval":
        # x.nu = 1 at both ends of (-1, 1)
        return float(np.sum(tr**2))
    return float(dom.boundary_measure() * tr[0] ** 2)


def _levels(fn: Callable[[QuadSpec], np.ndarray], spec: QuadSpec, levels: int):
    vals = [np.asarray(fn(spec.refined(k) if k else spec), dtype=float) for k in range(levels)]
    err = np.abs(vals[-1] - vals[-2]) if len(vals) > 1 else np.full(vals[-1].shape, np.inf)
    return vals[-1], err


def _outer_alpha_R(s: float) -> float:
    # u^2-type energy density ~ delta^{2s-2}; omega_s adds delta^{1-2s}
    return min(1.0 - 2.0 * s, 2.0 * s - 2.0)


def _remainder_level(u, params: FracParams, dom: DomainGeometry, sp: QuadSpec) -> float:
    s = params.s
    rule = energy_pairs(dom, s, sp, _outer_alpha_R(s), 1.0 - 2.0 * s)
    X = rule.xpts()
    du = evaluate(u, X, dom) - evaluate(u, rule.inner, dom)
    a, b = omega_s_symmetric(X, rule.inner, rule.offset, dom, s)
    m = pair_measure(rule, dom, s, X)
    m2 = pair_measure(rule, dom, s, X, extra=2.0)
    return params.c_ns / 2.0 * iterated_integral(rule, du * du * (a * m + b * m2))


def _seminorm_level(u, params: FracParams, dom: DomainGeometry, sp: QuadSpec, shift: float = 0.0) -> float:
    """[u]^2 with weight D - shift."""
    s = params.s
    rule = energy_pairs(dom, s, sp, 0.0 if shift == 0.0 else 2.0 * s - 2.0)
    X = rule.xpts()
    du = evaluate(u, X, dom) - evaluate(u, rule.inner, dom)
    w = dom.delta_pow(X, 2.0 - 2.0 * s) - shift
    return params.c_ns / 2.0 * iterated_integral(rule, du * du * pair_measure(rule, dom, s, X) * w)


def _lhs_level(u, params: FracParams, dom: DomainGeometry, sp: QuadSpec) -> float:
    s = params.s
    if isinstance(u, SpectralFunction):
        pts, w = weighted_rule(dom, sp, 0.0)
    else:
        pts, w = _support_rule(u, dom, sp)
    Lu = frac_laplacian_at(u, pts, params, dom, sp)
    grad = u.derivative_points(pts)
    return -float(np.sum(w * dom.delta_pow(pts, 2.0 - 2.0 * s) * pts.x * grad * Lu))


def _support_rule(u, dom: DomainGeometry, sp: QuadSpec):
    lo, hi = u.support
    Xs, w = outer_rule(lo, hi, sp, None, None)
    pts = dom.points(Xs.x)
    return pts, w * dom.volume_weight(pts)


# ---------------------------------------------------------------------------
# public operations


def operator_pairing(u, v: Bump, params: FracParams, domain: DomainGeometry = DomainGeometry(),
                     spec: QuadSpec = QuadSpec(), levels: int = 3):
    """int v L u over the support of the bump v; returns (value, error estimate).

    Against the energy form E(u, v) this is the self-adjointness check.
    """
    _check_params(params, domain)

    def level(sp):
        pts, w = _support_rule(v, domain, sp)
        return float(np.sum(w * v.eval_points(pts) * frac_laplacian_at(u, pts, params, domain, sp)))

    val, err = _levels(level, spec, levels)
    return float(val), float(err)


def remainder_R(u, params: FracParams, domain: DomainGeometry | None = None, spec: QuadSpec = QuadSpec(),
                levels: int = 2):
    """R[u] with the symmetrised omega_s weight; returns (value, error estimate)."""
    dom = u.domain if domain is None else domain
    _check_params(params, dom)
    v, e = _levels(lambda sp: _remainder_level(u, params, dom, sp), spec, levels)
    return float(v), float(e)


def remainder_budget(u, params: FracParams, domain: DomainGeometry | None = None, rhs_sup: float | None = None,
                     samples: int = 2001, spec: QuadSpec = QuadSpec()) -> float:
    """||u||_inf^2 + ||u/delta^{2s-1}||_inf (||L u||_inf + ||u||_2).

    ``rhs_sup`` replaces ||L u||_inf by the known sup of the right-hand side
    (e.g. 1 for torsion, lambda ||u||_inf for eigenfunctions); otherwise
    L u is sampled on interior points.
    """
    dom = u.domain if domain is None else domain
    if dom.kind == "interval":
        x = np.cos(np.pi * (np.arange(samples) + 0.5) / samples)
    else:
        x = 0.5 * (1.0 + np.cos(np.pi * (np.arange(samples) + 0.5) / samples))
    X = dom.points(x)
    uu = evaluate(u, X, dom)
    usup = float(np.max(np.abs(uu)))
    if usup == 0.0:
        return 0.0
    if isinstance(u, SpectralFunction):
        tsup = float(max(np.max(np.abs(u.quotient(X))), np.max(np.abs(boundary_trace(u)))))
    else:
        tsup = float(np.max(np.abs(uu / dom.delta_of(X) ** (2.0 * params.s - 1.0))))
    if rhs_sup is None:
        xi = x[np.abs(x) <= 0.95] if dom.kind == "interval" else x[x <= 0.95]
        xi = xi[:: max(1, xi.size // 64)]
        rhs_sup = float(np.max(np.abs(frac_laplacian_at(u, dom.points(xi), params, dom, spec))))
    pts, w = weighted_rule(dom, spec, 4.0 * params.s - 2.0)
    l2 = math.sqrt(float(np.sum(w * evaluate(u, pts, dom) ** 2)))
    return usup**2 + tsup * (rhs_sup + l2)


def identity_terms(u, params: FracParams, domain: DomainGeometry | None = None, spec: QuadSpec = QuadSpec(),
                   levels: int = 2, rhs_sup: float | None = None, strict: bool = True) -> IdentityReport:
    """All terms of the linear identity for u, with d_s solved from it.

    Each term is computed at ``levels`` successive quadrature refinements;
    the last is reported and the last difference is its error.  With
    ``strict`` a boundary factor below 10x the total quadrature budget
    raises :class:`TraceTooSmall` (the report is attached).
    """
    dom = u.domain if domain is None else domain
    _check_params(params, dom)
    N, s = params.N, params.s

    def level(sp):
        return np.array([
            _lhs_level(u, params, dom, sp),
            (N - 2.0 * s) / 2.0 * _seminorm_level(u, params, dom, sp),
            _remainder_level(u, params, dom, sp),
        ])

    (lhs, semi, R), (el, es, eR) = _levels(level, spec, levels)
    B = _trace_factor(u, dom)
    budget = float(el + es + REMAINDER_COEFFICIENT * eR)
    rb = remainder_budget(u, params, dom, rhs_sup=rhs_sup)
    rep = IdentityReport(
        lhs=float(lhs), seminorm_term=float(semi), boundary_factor=B, remainder=float(R),
        ds_estimate=float("nan"), quadrature_error_budget=budget, remainder_budget=rb,
        term_errors={"lhs": float(el), "seminorm_term": float(es), "remainder": float(eR)},
        settings=_settings(u, params, dom, spec, levels),
    )
    if abs(B) < 10.0 * budget or B == 0.0:
        if strict:
            raise TraceTooSmall("trace too small to estimate d_s", rep)
        return rep
    rep.ds_estimate = float((semi + REMAINDER_COEFFICIENT * R - lhs) / B)
    rep.ds_estimate_unit_coefficient = float((semi + R - lhs) / B)
    rep.ds_error = budget / abs(B)
    return rep


@dataclass(frozen=True)
class RightHandSide:
    """f(u) = value (kind "constant") or value * u (kind "linear")."""

    kind: str
    value: float

    def __post_init__(self):
        if self.kind not in ("constant", "linear"):
            raise DomainError("right-hand side must be 'constant' or 'linear'")

    def f(self, u):
        return self.value * (np.ones_like(u) if self.kind == "constant" else u)

    def F(self, u):
        return self.value * (u if self.kind == "constant" else 0.5 * u * u)

    @property
    def sup_exponent(self) -> float:
        """Boundary exponent of F(u) in units of 2s-1."""
        return 1.0 if self.kind == "constant" else 2.0


def nonlinear_identity(u: SpectralFunction, f_spec: RightHandSide, params: FracParams,
                       domain: DomainGeometry | None = None, spec: QuadSpec = QuadSpec(),
                       levels: int = 2, strict: bool = True) -> NonlinearReport:
    """Terms of int (2N F + (2s-N) u f) = -2 d_s B + R~[u], sub-terms kept apart."""
    dom = u.domain if domain is None else domain
    _check_params(params, dom)
    N, s = params.N, params.s
    p = 2.0 - 2.0 * s
    kF = f_spec.sup_exponent * (2.0 * s - 1.0)

    def level(sp):
        pts, w = weighted_rule(dom, sp, kF)
        uu = evaluate(u, pts, dom)
        F = f_spec.F(uu)
        lhs = float(np.sum(w * (2.0 * N * F + (2.0 * s - N) * uu * f_spec.f(uu))))
        pts1, w1 = weighted_rule(dom, sp, kF + 1.0 - 2.0 * s)
        F1 = f_spec.F(evaluate(u, pts1, dom))
        t1 = -2.0 * float(np.sum(w1 * F1 * dom.x_grad_delta_pow(pts1, p)))
        t2 = -2.0 * N * float(np.sum(w * (dom.delta_pow(pts, p) - 1.0) * F))
        t3 = (N - 2.0 * s) * _seminorm_level(u, params, dom, sp, shift=1.0)
        t4 = _remainder_level(u, params, dom, sp)
        return np.array([lhs, t1, t2, t3, t4])

    vals, errs = _levels(level, spec, levels)
    lhs, t1, t2, t3, t4 = (float(v) for v in vals)
    Rt = t1 + t2 + t3 + t4
    B = _trace_factor(u, dom)
    budget = float(np.sum(errs))
    sub = {
        "drift": t1, "drift_error": float(errs[1]),
        "weight_shift": t2, "weight_shift_error": float(errs[2]),
        "seminorm_shifted": t3, "seminorm_shifted_error": float(errs[3]),
        "remainder_R": t4, "remainder_R_error": float(errs[4]),
    }
    rep = NonlinearReport(
        lhs_nl=lhs, boundary_factor=B, remainder_tilde=Rt, subterms=sub, ds_estimate=float("nan"),
        quadrature_error_budget=budget, settings=_settings(u, params, dom, spec, levels),
    )
    rep.settings["rhs"] = {"kind": f_spec.kind, "value": f_spec.value}
    if abs(B) < 10.0 * budget or B == 0.0:
        if strict:
            raise TraceTooSmall("trace too small to estimate d_s", rep)
        return rep
    rep.ds_estimate = (Rt - lhs) / (NONLINEAR_BOUNDARY_COEFFICIENT * B)
    rep.ds_error = budget / abs(NONLINEAR_BOUNDARY_COEFFICIENT * B)
    return rep


@dataclass
class Lemma27Result:
    lhs: float
    drift: float
    boundary_kernel: float
    residual: float
    relative_residual: float
    error_budget: float
    field: str

    @property
    def rhs(self) -> float:
        return self.drift + self.boundary_kernel

    def as_dict(self) -> dict:
        d = _clean(asdict(self))
        d["rhs"] = self.rhs
        return d


def lemma27_check(phi: Bump, Y: VectorField, params: FracParams, domain: DomainGeometry = DomainGeometry(),
                  spec: QuadSpec = QuadSpec(), levels: int = 2) -> Lemma27Result:
    """Both sides of the compact-support deformation identity on the interval.

    lhs = (c/2) iint (phi(x)-phi(y))^2 omega_Y(x,y) |x-y|^{-1-2s}
    rhs = -2 int Y phi' L phi + c int phi(x)^2 sum_{ends} Y nu |x - end|^{-1-2s}

    The relative residual is taken against the largest of the terms and of
    the plain energy [phi]^2.
    """
    dom = domain
    _check_params(params, dom)
    if dom.kind != "interval":
        raise DomainError("lemma27_check is implemented on the interval")
    lo, hi = phi.support
    if lo <= -1.0 + 1e-12 or hi >= 1.0 - 1e-12:
        raise DomainError("the support of phi must stay inside the domain")
    s = params.s
    c = params.c_ns
    ya, yb = Y.ends

    def level(sp):
        al = Y.boundary_alpha
        rule = energy_pairs(dom, s, sp, al if al is not None else None, al)
        X, Yp, off = rule.xpts(), rule.inner, rule.offset
        dphi = phi.eval_points(X) - phi.eval_points(Yp)
        # (Y(x) - Y(y)).(x - y)/|x-y|^2 = (Y(x) - Y(y)) / (x - y), x - y = -off
        om = Y.div(X) + Y.div(Yp) - (1.0 + 2.0 * s) * (Y.value(X) - Y.value(Yp)) / (-off)
        m = pair_measure(rule, dom, s, X)
        lhs = c / 2.0 * iterated_integral(rule, dphi * dphi * om * m)
        energy = c / 2.0 * iterated_integral(rule, dphi * dphi * m)
        pts, w = _support_rule(phi, dom, sp)
        Lphi = frac_laplacian_at(phi, pts, params, dom, sp)
        drift = -2.0 * float(np.sum(w * Y.value(pts) * phi.derivative_points(pts) * Lphi))
        ph2 = phi.eval_points(pts) ** 2
        kern = yb * pts.dr ** (-1.0 - 2.0 * s) - ya * pts.dl ** (-1.0 - 2.0 * s)
        bk = c * float(np.sum(w * ph2 * kern))
        return np.array([lhs, drift, bk, energy])

    (lhs, drift, bk, energy), errs = _levels(level, spec, levels)
    errs = errs[:3]
    res = float(lhs - (drift + bk))
    # both sides vanish for some fields (Y constant, phi even); [phi]^2 sets the scale then
    scale = max(abs(lhs), abs(drift), abs(bk), abs(energy))
    return Lemma27Result(float(lhs), float(drift), float(bk), res, abs(res) / scale if scale > 0 else 0.0,
                         float(np.sum(errs)), Y.name)


def combine_estimates(values: Sequence[float], errors: Sequence[float], floor: float = 1e-14):
    """Inverse-variance weighted mean and its standard error."""
    v = np.asarray(values, dtype=float)
    e = np.maximum(np.asarray(errors, dtype=float), floor)
    w = 1.0 / e**2
    mean = float(np.sum(w * v) / np.sum(w))
    err = float(1.0 / math.sqrt(np.sum(w)))
    return mean, err


@dataclass
class ProbeRow:
    s: float
    lam: float
    l2_norm: float
    remainder: float
    remainder_error: float
    bracket: float
    bracket_error: float
    error: str | None = None

    def as_dict(self) -> dict:
        return _clean(asdict(self))


def _bracket_level(u: SpectralFunction, lam: float, params: FracParams, dom: DomainGeometry, sp: QuadSpec) -> float:
    s, N = params.s, params.N
    pts, w = weighted_rule(dom, sp, 2.0 * s - 2.0)
    u2 = evaluate(u, pts, dom) ** 2
    rho = dom.rho(pts)
    hardy = (1.0 - s) * lam * float(np.sum(w * u2 * rho ** (-2.0 * s)))
    shift = N * lam * float(np.sum(w * (rho ** (2.0 - 2.0 * s) - 1.0) * u2))
    return hardy - shift


def probe_row(s: float, N: int = 1, n: int = 24, spec: QuadSpec = QuadSpec(), levels: int = 2) -> ProbeRow:
    """One row of the open-question probe on the unit ball (the interval for N = 1)."""
    params = FracParams.make(N, s)
    dom = DomainGeometry("interval" if N == 1 else "ball", N, "rho")
    try:
        ep = solve_eigen(params, dom, n, 1, spec)[0]
        u = ep.eigenfunction
        pts, w = weighted_rule(dom, spec, 4.0 * s - 2.0)
        l2 = math.sqrt(float(np.sum(w * evaluate(u, pts, dom) ** 2)))
        R, eR = remainder_R(u, params, dom, spec, levels)
        b, eb = _levels(lambda sp: np.array(_bracket_level(u, ep.lam, params, dom, sp)), spec, levels)
        return ProbeRow(s, ep.lam, l2, R, eR, float(b), float(eb))
    except Exception as exc:  # recorded per row; the sweep continues
        nan = float("nan")
        return ProbeRow(s, nan, nan, nan, nan, nan, nan, f"{type(exc).__name__}: {exc}")


def probe_open_question(s_grid: Sequence[float], N: int = 1, n: int = 24, spec: QuadSpec = QuadSpec(),
                        levels: int = 2) -> list[ProbeRow]:
    """Exploratory table (s, lambda_s, R[u_s], Hardy bracket); carries no verdict."""
    for s in s_grid:
        if not 0.55 <= s <= 0.97:
            raise DomainError("probe grid must lie within [0.55, 0.97]")
    return ordered_map(lambda s: probe_row(s, N, n, spec, levels), list(s_grid))
