"""The regional fractional Laplacian on (-1, 1) and on radial unit balls.

Functions can be plain callables (evaluated at coordinates) or objects with an
``eval_points(pts)`` method, which receive :class:`~frl.quadrature.Points` and
can therefore use exact boundary distances.  Ball mode works in the radial
variable r in (0, 1) with the angular factor integrated out analytically.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.special import gamma as _G
from scipy.special import hyp2f1, rgamma

from . import _backend
from .constants import FracParams, c_frac, sphere_area
from .quadrature import (
    DomainError,
    DivergenceError,
    EndGrading,
    PairRule,
    Points,
    QuadResult,
    QuadSpec,
    iterated_integral,
    outer_rule,
    pair_rule,
    segment_rule,
)

COLLAR = 0.25
_JOINT = 1.0 - COLLAR


# ---------------------------------------------------------------------------
# geometry


def _profile(a):
    """Even quartic on |x| <= 3/4 matching 1-|x| to second order at 3/4."""
    a2 = a * a
    return 23.0 / 32.0 - a2 + (8.0 / 27.0) * a2 * a2


def _collar_gap(a):
    """_profile(a) - (1 - a) written in t = 3/4 - a."""
    t = 0.75 - a
    return t**3 * (-8.0 / 9.0 + (8.0 / 27.0) * t)


def _profile_d(a):
    return -2.0 * a + (32.0 / 27.0) * a**3


def _profile_d2(a):
    return -2.0 + (32.0 / 9.0) * a * a


@dataclass(frozen=True)
class DomainGeometry:
    """Interval (-1, 1) (N = 1) or the radial unit ball in dimension N >= 2.

    ``delta`` selects the boundary-distance surrogate: "blended" is the C^2
    function equal to the distance within the collar 1/4 of the boundary and
    an even quartic inside; "rho" is the exact 1 - |x|.
    """

    kind: str = "interval"
    N: int = 1
    delta: str = "blended"
    depth: float = 1e-14

    def __post_init__(self):
        if self.kind not in ("interval", "ball"):
            raise DomainError("kind must be 'interval' or 'ball'")
        if self.delta not in ("blended", "rho"):
            raise DomainError("delta must be 'blended' or 'rho'")
        if self.kind == "interval" and self.N != 1:
            raise DomainError("the interval domain has N = 1")
        if self.kind == "ball" and self.N < 2:
            raise DomainError("radial balls need N >= 2; use the interval for N = 1")

    # coordinates -------------------------------------------------------
    @property
    def lo(self) -> float:
        return -1.0 if self.kind == "interval" else 0.0

    @property
    def hi(self) -> float:
        return 1.0

    @property
    def breaks(self) -> tuple:
        if self.kind == "interval":
            return (-_JOINT, 0.0, _JOINT)
        return (_JOINT,)

    @property
    def collar(self) -> float:
        return COLLAR

    def points(self, x) -> Points:
        x = np.atleast_1d(np.asarray(x, dtype=float))
        return Points(x, x - self.lo, self.hi - x)

    def check_interior(self, x, tol: float = 1e-12):
        x = np.atleast_1d(np.asarray(x, dtype=float))
        lo = self.lo if self.kind == "interval" else -np.inf
        if np.any(x - lo <= tol) or np.any(self.hi - x <= tol):
            raise DomainError("point lies on or within 1e-12 of the boundary")

    def spec_dict(self) -> dict:
        d = {"kind": self.kind, "N": self.N, "delta": self.delta, "collar": COLLAR}
        if self.delta == "blended":
            d["interior_profile"] = "23/32 - a^2 + (8/27) a^4 for a = |x| <= 3/4"
        return d

    # distance functions -----------------------------------------------
    def rho(self, pts: Points) -> np.ndarray:
        if self.kind == "interval":
            return np.minimum(pts.dl, pts.dr)
        return pts.dr

    def _abs(self, pts: Points) -> np.ndarray:
        return np.abs(pts.x) if self.kind == "interval" else pts.x

    def _blend_mask(self, pts: Points) -> np.ndarray:
        return self.rho(pts) >= COLLAR

    def delta_of(self, pts: Points) -> np.ndarray:
        r = self.rho(pts)
        if self.delta == "rho":
            return r
        m = r >= COLLAR
        if np.any(m):
            r = r.copy()
            r[m] = _profile(self._abs(pts)[m])
        return r

    def delta_diff(self, X: Points, Y: Points, off: np.ndarray) -> np.ndarray:
        """delta(y) - delta(x) from the exact offset y - x where the formula allows."""
        out = self.delta_of(Y) - self.delta_of(X)
        ax, ay = self._abs(X), self._abs(Y)
        if self.kind == "interval":
            same = np.sign(X.x) == np.sign(Y.x)
            db = np.where(same, np.where(X.x >= 0, off, -off), ay - ax)
        else:
            same = np.ones(off.shape, dtype=bool)
            db = off
        if self.delta == "rho":
            return np.where(same, -db, out)
        cx, cy = self._blend_mask(X), self._blend_mask(Y)
        # delta = 1 - a - _collar_gap(a); the gap is O((3/4 - a)^3) and zero in the collar
        cross = same & ~(cx & cy)
        gap = np.where(cy, _collar_gap(ay), 0.0) - np.where(cx, _collar_gap(ax), 0.0)
        out = np.where(cross, -db + gap, out)
        prof = db * (ax + ay) * (-1.0 + (8.0 / 27.0) * (ax * ax + ay * ay))
        return np.where(cx & cy, prof, out)

    def collar_pair(self, X: Points, Y: Points) -> np.ndarray:
        """True where x and y lie in the same boundary collar (delta is the plain distance to it)."""
        inside = (self.rho(X) < COLLAR) & (self.rho(Y) < COLLAR)
        if self.kind == "interval":
            inside &= np.sign(X.x) == np.sign(Y.x)
        return inside

    def x_dot_grad_delta(self, pts: Points) -> np.ndarray:
        """x . grad(delta); -|x| in the collar (and everywhere for rho)."""
        a = self._abs(pts)
        out = -a.copy()
        if self.delta == "blended":
            m = self._blend_mask(pts)
            out[m] = a[m] * _profile_d(a[m])
        return out

    def grad_delta(self, pts: Points) -> np.ndarray:
        """d(delta)/dx on the interval, d(delta)/dr in ball mode."""
        sgn = np.sign(pts.x) if self.kind == "interval" else np.ones_like(pts.x)
        out = -sgn
        if self.delta == "blended":
            m = self._blend_mask(pts)
            a = self._abs(pts)
            out = out.astype(float)
            out[m] = sgn[m] * _profile_d(a[m])
        return out

    def delta_pow(self, pts: Points, p: float) -> np.ndarray:
        return self.delta_of(pts) ** p

    def x_grad_delta_pow(self, pts: Points, p: float) -> np.ndarray:
        """x . grad(delta^p) = p delta^{p-1} x . grad(delta)."""
        return p * self.delta_of(pts) ** (p - 1.0) * self.x_dot_grad_delta(pts)

    def boundary_measure(self) -> float:
        """Integral of x . nu over the boundary: 2 (two endpoints) or |S^{N-1}|."""
        return 2.0 if self.kind == "interval" else sphere_area(self.N)

    def volume_weight(self, pts: Points) -> np.ndarray:
        """Measure density in the working coordinate (|S^{N-1}| r^{N-1} for balls)."""
        if self.kind == "interval":
            return np.ones_like(pts.x)
        return sphere_area(self.N) * pts.x ** (self.N - 1)


# ---------------------------------------------------------------------------
# radial kernel


@dataclass(frozen=True)
class RadialKernel:
    """Angular factor A_p(r, t) = int_{S^{N-1}} |r e_1 - t theta|^{-p} dsigma.

    With p = N + 2s this is the radial reduction of |x - y|^{-N-2s}; p =
    N + 2s + 2 is used for the deformation weights.  Evaluated through
    2F1(p/2, p/2 - N/2 + 1; N/2; z), z = (min/max)^2, switching to the
    connection formula at 1 - z with 1 - z formed from exact differences.
    """

    N: int
    s: float

    def A(self, r, t, diff=None, p: float | None = None) -> np.ndarray:
        r = np.asarray(r, dtype=float)
        t = np.asarray(t, dtype=float)
        if p is None:
            p = self.N + 2.0 * self.s
        if diff is None:
            diff = np.abs(r - t)
        diff = np.abs(np.asarray(diff, dtype=float))
        M = np.maximum(r, t)
        m = np.minimum(r, t)
        N = self.N
        a = p / 2.0
        b = a - N / 2.0 + 1.0
        c = N / 2.0
        with np.errstate(divide="ignore", invalid="ignore"):
            z = (m / M) ** 2
            omz = diff * (M + m) / (M * M)
        out = np.empty(np.broadcast(r, t).shape)
        z = np.broadcast_to(z, out.shape)
        omz = np.broadcast_to(omz, out.shape)
        near = z > 0.5
        if np.any(~near):
            out[~near] = hyp2f1(a, b, c, z[~near])
        if np.any(near):
            w = omz[near]
            e = c - a - b
            g1 = _G(c) * _G(e) * rgamma(c - a) * rgamma(c - b)
            g2 = _G(c) * _G(-e) * rgamma(a) * rgamma(b)
            out[near] = g1 * hyp2f1(a, b, 1.0 - e, w) + w**e * g2 * hyp2f1(c - a, c - b, e + 1.0, w)
        return sphere_area(N) * np.broadcast_to(M, out.shape) ** (-p) * out

    def K(self, r, t, diff=None, p: float | None = None) -> np.ndarray:
        """t^{N-1} A_p(r, t): kernel against dt in the radial variable."""
        return np.asarray(t, dtype=float) ** (self.N - 1) * self.A(r, t, diff, p)


def _kernel(dom: DomainGeometry, s: float, X: Points, Y: Points, off: np.ndarray, extra: float = 0.0):
    """Kernel |x-y|^{-N-2s-extra} reduced to the working coordinate."""
    if dom.kind == "interval":
        return np.abs(off) ** (-(1.0 + 2.0 * s + extra))
    rk = RadialKernel(dom.N, s)
    return rk.K(X.x, Y.x, off, dom.N + 2.0 * s + extra)


# ---------------------------------------------------------------------------
# function evaluation


def evaluate(u, pts: Points, dom: DomainGeometry | None = None) -> np.ndarray:
    """Evaluate a function given either as a callable or as a Points-aware object."""
    if hasattr(u, "eval_points"):
        return np.asarray(u.eval_points(pts), dtype=float)
    val = u(pts.x)
    return np.broadcast_to(np.asarray(val, dtype=float), pts.x.shape).copy()


def _sub(p: Points, idx) -> Points:
    return Points(p.x[idx], p.dl[idx], p.dr[idx])


# ---------------------------------------------------------------------------
# pointwise operator


@dataclass(frozen=True)
class PVRule:
    """Nodes for principal values at many points: L u(x_i) = sum w (u(x_i) - u(y)) K."""

    owner: np.ndarray
    inner: Points
    offset: np.ndarray
    w: np.ndarray
    n_outer: int


def pv_rule(dom: DomainGeometry, s: float, X: Points, spec: QuadSpec) -> PVRule:
    """Symmetric-pairing rules for the p.v. integral at every point of X."""
    owner, dl, dr, off, w = _backend.pv_rules(
        X.dl, X.dr, tuple(b - dom.lo for b in dom.breaks), dom.hi - dom.lo,
        1.0 - 2.0 * s, spec.order, spec.sigma, spec.max_panel, dom.depth,
    )
    x = 0.5 * ((dom.lo + dl) + (dom.hi - dr))
    return PVRule(owner, Points(x, dl, dr), off, w, X.x.size)


def _pv_rules_py(odl, odr, breaks, L, diag_alpha, order, sigma, max_panel, depth):
    from .quadrature import _segment_rule_py

    owners, dls, drs, offs, ws = [], [], [], [], []
    for i in range(odl.size):
        dlx, drx = float(odl[i]), float(odr[i])
        r = min(dlx, drx)
        # pairing window (0, r); the ends x +- r touch the boundary when r = dlx or drx
        hb = sorted({abs(b - dlx) for b in breaks if 0 < abs(b - dlx) < r})
        g = _segment_rule_py(
            r, EndGrading(r * sigma, diag_alpha), EndGrading(r * depth, None), hb, order, sigma, max_panel
        )
        h = g.from_left
        for sgn in (1.0, -1.0):
            owners.append(np.full(h.size, i))
            if sgn > 0:
                dls.append(dlx + h)
                drs.append((drx - r) + g.from_right)
            else:
                dls.append((dlx - r) + g.from_right)
                drs.append(drx + h)
            offs.append(sgn * h)
            ws.append(g.weights)
        rest = abs(drx - dlx)
        if rest > 0:
            near = EndGrading(min(r, rest), None)
            far = EndGrading(rest * depth, None)
            if drx > dlx:
                br = [b - (dlx + r) for b in breaks if dlx + r < b < L]
                q = _segment_rule_py(rest, near, far, tuple(br), order, sigma, max_panel)
                owners.append(np.full(q.weights.size, i))
                dls.append(dlx + r + q.from_left)
                drs.append(q.from_right)
                offs.append(r + q.from_left)
            else:
                br = [b for b in breaks if 0 < b < rest]
                q = _segment_rule_py(rest, far, near, tuple(br), order, sigma, max_panel)
                owners.append(np.full(q.weights.size, i))
                dls.append(q.from_left)
                drs.append(drx + r + q.from_right)
                offs.append(-(r + q.from_right))
            ws.append(q.weights)
    return (
        np.concatenate(owners),
        np.concatenate(dls),
        np.concatenate(drs),
        np.concatenate(offs),
        np.concatenate(ws),
    )


def _frac_laplacian_values(u, X: Points, params: FracParams, dom: DomainGeometry, spec: QuadSpec) -> np.ndarray:
    rule = pv_rule(dom, params.s, X, spec)
    if hasattr(u, "quotient_diff"):
        return _structured_values(u, rule, X, params, dom)
    ux = evaluate(u, X, dom)
    uy = evaluate(u, rule.inner, dom)
    diff = _taylor_near_diagonal(u, X, dom, rule, ux[rule.owner] - uy)
    Xo = _sub(X, rule.owner)
    k = _kernel(dom, params.s, Xo, rule.inner, rule.offset)
    return params.c_ns * np.bincount(rule.owner, weights=rule.w * k * diff, minlength=rule.n_outer)


TAYLOR_WINDOW = 1e-2


def _taylor_near_diagonal(u, X: Points, dom: DomainGeometry, rule: PVRule, diff: np.ndarray) -> np.ndarray:
    """Replace u(x) - u(x+h) for |h| < hc by a quartic Taylor model.

    For a plain callable the difference loses all digits as h -> 0 while the
    kernel grows like h^{-1-2s}; the model's coefficients come from central
    differences at hc and 2 hc, hc = TAYLOR_WINDOW times the distance to the
    boundary, where roundoff is still harmless.
    """
    hc = TAYLOR_WINDOW * np.minimum(X.dl, X.dr)
    o = rule.owner
    small = np.abs(rule.offset) < hc[o]
    if not np.any(small):
        return diff
    f = lambda h: evaluate(u, dom.points(X.x + h), dom)
    u0 = evaluate(u, X, dom)
    p1, m1, p2, m2 = f(hc), f(-hc), f(2 * hc), f(-2 * hc)
    with np.errstate(divide="ignore", invalid="ignore"):
        # D1(h) = a1 + a3 h^2, D2(h) = 2 a2 + 2 a4 h^2
        d1a, d1b = (p1 - m1) / (2 * hc), (p2 - m2) / (4 * hc)
        d2a, d2b = (p1 + m1 - 2 * u0) / hc**2, (p2 + m2 - 2 * u0) / (4 * hc**2)
        a3 = (d1b - d1a) / (3 * hc**2)
        a1 = d1a - a3 * hc**2
        a4 = (d2b - d2a) / (6 * hc**2)
        a2 = d2a / 2 - a4 * hc**2
    h = rule.offset[small]
    oi = o[small]
    out = diff.copy()
    out[small] = -h * (a1[oi] + h * (a2[oi] + h * (a3[oi] + h * a4[oi])))
    return out


def _interval_power_operator(a, b, s, length):
    """p.v. int_Omega (V(x) - V(y)) |x-y|^{-1-2s} dy for V = (distance to one end)^{2s-1}.

    ``b`` is the distance of x to that end and ``a`` to the other one
    (a + b = length).  Uses harmonicity of the power on the half-line, which
    leaves only the integral over the exterior beyond the far end.
    """
    e = 2.0 * s - 1.0
    # (length^{2s} - a^{2s}) / b without cancellation
    ratio = -(length ** (2.0 * s)) * np.expm1(2.0 * s * np.log1p(-b / length)) / b
    return -(a ** (-2.0 * s)) * (b**e - ratio) / (2.0 * s)


def _series_minus_one(al, be, ga, w, terms=80):
    """2F1(al, be; ga; w) - 1 summed directly (no cancellation), |w| <= 1/2."""
    term = np.ones_like(w)
    out = np.zeros_like(w)
    for k in range(terms):
        term = term * (al + k) * (be + k) / ((ga + k) * (k + 1.0)) * w
        out += term
        if np.all(np.abs(term) <= 1e-17 * np.abs(out)):
            break
    return out


def radial_kernel_excess(r, t, off, N: int, s: float) -> np.ndarray:
    """t^{N-1} A(r,t) - a_{N,s} |r-t|^{-1-2s}, accurate next to the diagonal."""
    from .constants import a_frac

    rk = RadialKernel(N, s)
    aNs = a_frac(N, s)
    h = np.abs(off)
    out = np.empty(np.broadcast(r, t).shape)
    M = np.maximum(r, t)
    m = np.minimum(r, t)
    z = (m / M) ** 2
    near = z > 0.5
    far = ~near
    if np.any(far):
        out[far] = rk.K(r[far], t[far], h[far]) - aNs * h[far] ** (-1.0 - 2.0 * s)
    if np.any(near):
        rr, tt, hh, oo, MM, mm = r[near], t[near], h[near], off[near], M[near], m[near]
        p = N + 2.0 * s
        A_, B_, C_ = p / 2.0, p / 2.0 - N / 2.0 + 1.0, N / 2.0
        e = C_ - A_ - B_
        g1 = _G(C_) * _G(e) * rgamma(C_ - A_) * rgamma(C_ - B_)
        g2 = _G(C_) * _G(-e) * rgamma(A_) * rgamma(B_)
        w = hh * (MM + mm) / (MM * MM)
        S = sphere_area(N)
        regular = tt ** (N - 1) * S * MM ** (-p) * g1 * hyp2f1(A_, B_, 1.0 - e, w)
        G0 = S * g2 * 2.0**e
        # G(r,t)/G0 - 1 through logarithms of ratios close to one
        lg = (N - 1) * np.log1p(oo / rr) + (2.0 + 2.0 * s - N) * np.log1p(np.maximum(oo, 0.0) / rr) \
            + e * np.log1p(oo / (2.0 * rr))
        G = G0 * np.exp(lg)
        F2m1 = _series_minus_one(C_ - A_, C_ - B_, e + 1.0, w)
        out[near] = regular + G * hh**e * F2m1 + G0 * np.expm1(lg) * hh**e + (G0 - aNs) * hh**e
    return out


def _power_diff(d0, dd, p0, p1, e):
    """(d0 + dd)^e - d0^e; relative form for small steps, direct difference otherwise."""
    small = np.abs(dd) < 0.5 * d0
    rel = d0**e * np.expm1(e * np.log1p(np.where(small, dd / d0, 0.0)))
    return np.where(small, rel, p1 - p0)


def _structured_values(u, rule: PVRule, X: Points, params: FracParams, dom: DomainGeometry) -> np.ndarray:
    """L u for u = W q with W ~ distance^{2s-1} near the boundary.

    The pure boundary power V (distance to the nearer end, or to the sphere)
    times q(x) is removed before quadrature and its operator added back in
    closed form; what remains has no O(1/delta) cancellation.  All
    differences u(y) - u(x) are formed from the exact offsets, so the result
    stays accurate arbitrarily close to the boundary and to the diagonal.
    """
    s = params.s
    e = 2.0 * s - 1.0
    o = rule.owner
    Y = rule.inner
    off = rule.offset
    Xo = _sub(X, o)
    qx = u.quotient(X)
    Wx = u.weight_points(X)
    Wy = u.weight_points(Y)
    dq = u.quotient_diff(Xo, Y, off)
    bd = u.weight_geometry() if hasattr(u, "weight_geometry") else dom
    dx = bd.delta_of(X)[o]
    dW = _power_diff(dx, bd.delta_diff(Xo, Y, off), Wx[o], Wy, e)
    if dom.kind == "interval":
        right = X.dr <= X.dl
        near_x = np.where(right, X.dr, X.dl)
        far_x = np.where(right, X.dl, X.dr)
        drho = np.where(right[o], -off, off)
        near_y = np.where(right[o], Y.dr, Y.dl)
        use = np.ones(X.x.size, dtype=bool)
    else:
        near_x, far_x = X.dr, X.dl
        drho = -off
        near_y = Y.dr
        use = X.x > 0.5
    rx = near_x[o]
    dV = _power_diff(rx, drho, rx**e, near_y**e, e)
    uo = use[o]
    qxo = qx[o]
    # u(x) - u(y) minus, where used, q(x) (V(x) - V(y))
    # V coincides with the weight inside a collar; keep that difference exactly zero
    dWV = np.where(uo, np.where(bd.collar_pair(Xo, Y), 0.0, dV - dW), -dW)
    vals = -dq * Wy + qxo * dWV
    k = _kernel(dom, s, Xo, Y, off)
    out = np.bincount(o, weights=rule.w * k * vals, minlength=rule.n_outer)
    if dom.kind == "interval":
        LV = _interval_power_operator(far_x, near_x, s, 2.0)
    else:
        LV = np.zeros(X.x.size)
        if np.any(use):
            from .constants import a_frac

            LV[use] = a_frac(dom.N, s) * _interval_power_operator(X.dl[use], X.dr[use], s, 1.0)
            sel = uo
            ex = radial_kernel_excess(Xo.x[sel], Y.x[sel], off[sel], dom.N, s)
            LV += np.bincount(o[sel], weights=rule.w[sel] * ex * (-dV[sel]), minlength=rule.n_outer)
    out = out + np.where(use, qx * LV, 0.0)
    return params.c_ns * out


def frac_laplacian_at(u, X: Points, params: FracParams, dom: DomainGeometry, spec: QuadSpec = QuadSpec(),
                      with_error: bool = False):
    """Vectorised L u at the points X (exact distances honoured)."""
    v = _frac_laplacian_values(u, X, params, dom, spec)
    if not with_error:
        return v
    v2 = _frac_laplacian_values(u, X, params, dom, spec.refined())
    return v2, np.abs(v2 - v)


def regional_frac_laplacian(u, x: float, params: FracParams, domain: DomainGeometry,
                            spec: QuadSpec = QuadSpec()) -> QuadResult:
    """c_{N,s} p.v. int_Omega (u(x) - u(y)) |x - y|^{-N-2s} dy at an interior point.

    In ball mode ``u`` is the radial profile and ``x`` the radius.
    """
    _check_params(params, domain)
    domain.check_interior(x)
    X = domain.points([x])
    history = []
    for level in range(spec.max_subdiv + 1):
        sp = spec.refined(level) if level else spec
        history.append(float(_frac_laplacian_values(u, X, params, domain, sp)[0]))
        if len(history) > 1 and abs(history[-1] - history[-2]) <= sp.tolerance(history[-1]):
            return QuadResult(history[-1], abs(history[-1] - history[-2]), True, 0, history)
    return QuadResult(history[-1], abs(history[-1] - history[-2]), False, 0, history)


def _check_params(params: FracParams, dom: DomainGeometry):
    if params.N != dom.N:
        raise DomainError(f"params.N = {params.N} does not match domain N = {dom.N}")


# ---------------------------------------------------------------------------
# half-line operator


def halfline_frac_laplacian(g: Callable, r: float, s: float, spec: QuadSpec = QuadSpec(), T: float = 50.0,
                            growth: float | None = None) -> QuadResult:
    """c_{1,s} p.v. int_0^inf (g(r) - g(t)) |r - t|^{-1-2s} dt.

    The integral is taken over (0, T) by symmetric pairing; beyond T the
    function is assumed to be ~ C t^growth and the tail is added in closed
    form, its size being reported as error.  Without ``growth`` the exponent
    is fitted from g(T/2) and g(T) (falling back to 2s-1 on a sign change).
    ``g`` receives coordinates t (and may use them near 0 freely).
    """
    if not 0.5 < s < 1:
        raise DomainError("s must lie in (1/2, 1)")
    if not 0 < r < T:
        raise DomainError("need 0 < r < T")
    c1 = c_frac(1, s)
    gr = float(np.asarray(g(np.array([r])))[0])
    gT = float(np.asarray(g(np.array([T])))[0])
    fitted = growth is None
    if fitted:
        # power law through g(T/2) and g(T); constants and r^{2s-1} are reproduced exactly
        gh = float(np.asarray(g(np.array([T / 2.0])))[0])
        p = math.log2(gT / gh) if gT * gh > 0 else 2.0 * s - 1.0
        if abs(p - (2.0 * s - 1.0)) < 1e-12:
            p = 2.0 * s - 1.0
    else:
        p = growth
    if p >= 2.0 * s:
        raise DivergenceError("growth exponent >= 2s: tail integral does not converge")

    def body(sp: QuadSpec):
        rw = min(r, T - r)
        tot = 0.0
        # paired window
        q = segment_rule(rw, EndGrading(rw * sp.sigma, 1.0 - 2.0 * s),
                         EndGrading(rw * 1e-14, None), order=sp.order, sigma=sp.sigma, max_panel=sp.max_panel)
        h = q.from_left
        tot += np.sum(q.weights * (2.0 * gr - g(r + h) - g(r - h)) * h ** (-1.0 - 2.0 * s))
        # unpaired part
        if r < T - r:
            L = T - 2.0 * r
            q = segment_rule(L, EndGrading(min(r, L), None), None, order=sp.order, sigma=sp.sigma,
                             max_panel=max(sp.max_panel, 1.0))
            t = 2.0 * r + q.from_left
            tot += np.sum(q.weights * (gr - g(t)) * (t - r) ** (-1.0 - 2.0 * s))
        else:
            L = 2.0 * r - T
            q = segment_rule(L, EndGrading(L * 1e-14, None), EndGrading(min(T - r, L), None), order=sp.order,
                             sigma=sp.sigma, max_panel=sp.max_panel)
            t = q.from_left
            tot += np.sum(q.weights * (gr - g(t)) * (r - t) ** (-1.0 - 2.0 * s))
        return float(tot)

    # tail beyond T: g(t) ~ C t^p; int_T^inf (g(r) - C t^p)(t - r)^{-1-2s} dt via series in r/t
    C = gT / T**p
    tail_pts = segment_rule(1.0, EndGrading(1e-14, None), EndGrading(1e-14, 2.0 * s - 1.0 - p), order=24)
    v = tail_pts.from_left  # v = T/t
    tt = T / v
    integrand = (gr - C * tt**p) * (tt - r) ** (-1.0 - 2.0 * s) * T / v**2
    tail = float(np.sum(tail_pts.weights * integrand))
    history = []
    for level in range(spec.max_subdiv + 1):
        sp = spec.refined(level) if level else spec
        history.append(c1 * (body(sp) + tail))
        if len(history) > 1 and abs(history[-1] - history[-2]) <= sp.tolerance(history[-1]):
            break
    err = abs(history[-1] - history[-2]) if len(history) > 1 else float("inf")
    # the tail model error: the next term of the expansion of g at infinity is unknown;
    # bound it by the relative size of the tail
    err += 1e-3 * abs(c1 * tail) if fitted else 0.0
    return QuadResult(history[-1], err, err <= spec.tolerance(history[-1]) or len(history) > 1, 0, history)


# ---------------------------------------------------------------------------
# killing term


def killing_term(x, params: FracParams, domain: DomainGeometry, order: int = 24) -> np.ndarray | float:
    """kappa(x) = c_{N,s} int_{R^N minus Omega} |x - y|^{-N-2s} dy."""
    _check_params(params, domain)
    scalar = np.ndim(x) == 0
    domain.check_interior(x)
    X = domain.points(x)
    out = killing_points(X, params, domain, order)
    return float(out[0]) if scalar else out


def killing_points(X: Points, params: FracParams, dom: DomainGeometry, order: int = 24) -> np.ndarray:
    s = params.s
    if dom.kind == "interval":
        c1 = c_frac(1, s)
        return c1 / (2.0 * s) * (X.dl ** (-2.0 * s) + X.dr ** (-2.0 * s))
    # ball: c int_1^inf t^{N-1} A(r,t) dt with t = 1/v
    rk = RadialKernel(dom.N, s)
    out = np.empty(X.x.size)
    for i in range(X.x.size):
        r, dr = float(X.x[i]), float(X.dr[i])
        g = segment_rule(1.0, EndGrading(1e-15, 2.0 * s - 1.0), EndGrading(max(dr, 1e-300) * 0.3, None),
                         order=order, sigma=0.3)
        v, omv = g.from_left, g.from_right
        t = 1.0 / v
        diff = (omv + dr * v) / v  # t - r computed exactly: (1 - v)/v + (1 - r)
        out[i] = params.c_ns * np.sum(g.weights * rk.K(r, t, diff) / v**2)
    return out


# ---------------------------------------------------------------------------
# weights


def omega_weight_Y(x, y, Y: Callable, divY: Callable, params: FracParams):
    """div Y(x) + div Y(y) - (N + 2s)(Y(x) - Y(y)).(x - y)/|x - y|^2 (interval form)."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if np.any(x == y):
        raise DomainError("omega_Y is undefined on the diagonal")
    N, s = params.N, params.s
    if N != 1:
        raise DomainError("pointwise omega_Y is provided for the interval")
    return divY(x) + divY(y) - (N + 2.0 * s) * (Y(x) - Y(y)) / (x - y)


def omega_weight_s(x, y, params: FracParams, domain: DomainGeometry):
    """x.grad D(x) + y.grad D(y) - (N+2s)(D(x) - D(y)) y.(x-y)/|x-y|^2, D = delta^{2-2s}."""
    _check_params(params, domain)
    if domain.kind != "interval":
        raise DomainError("pointwise omega_s is provided for the interval; balls use the symmetrised form")
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if np.any(x == y):
        raise DomainError("omega_s is undefined on the diagonal")
    domain.check_interior(x)
    domain.check_interior(y)
    p = 2.0 - 2.0 * params.s
    X, Yp = domain.points(x), domain.points(y)
    DX, DY = domain.delta_pow(X, p), domain.delta_pow(Yp, p)
    val = domain.x_grad_delta_pow(X, p) + domain.x_grad_delta_pow(Yp, p) - (1.0 + 2.0 * params.s) * (DX - DY) * Yp.x / (
        X.x - Yp.x
    )
    return val if val.size > 1 else float(val[0])


def omega_s_symmetric(X: Points, Y: Points, off: np.ndarray, dom: DomainGeometry, s: float):
    """Symmetric part of omega_s, the only part an energy with symmetric numerator sees.

    Returns (a, b): the weight is a + b |x - y|^{-2}; in ball mode b multiplies
    the kernel with the extra power so the caller integrates both pieces.
    """
    p = 2.0 - 2.0 * s
    N = dom.N
    a = dom.x_grad_delta_pow(X, p) + dom.x_grad_delta_pow(Y, p)
    DX, DY = dom.delta_pow(X, p), dom.delta_pow(Y, p)
    # (x+y).(x-y) = |x|^2 - |y|^2 = -(x + y) * off in both coordinates
    b = (N + 2.0 * s) * (DX - DY) * (X.x + Y.x) * off / 2.0
    return a, b


# ---------------------------------------------------------------------------
# energies


def energy_pairs(dom: DomainGeometry, s: float, spec: QuadSpec, outer_alpha: float, inner_alpha=None) -> PairRule:
    lo_alpha = outer_alpha if dom.kind == "interval" else None
    return pair_rule(
        dom.lo, dom.hi, spec,
        diag_alpha=1.0 - 2.0 * s,
        outer_alpha=(lo_alpha, outer_alpha),
        inner_alpha=(inner_alpha if dom.kind == "interval" else None, inner_alpha),
        breaks=dom.breaks,
        singular_lo=dom.kind == "interval",
        depth=dom.depth,
    )


def pair_measure(rule: PairRule, dom: DomainGeometry, s: float, X: Points | None = None, extra: float = 0.0):
    """Kernel times volume weight of x for every pair (weights excluded)."""
    if X is None:
        X = rule.xpts()
    k = _kernel(dom, s, X, rule.inner, rule.offset, extra)
    if dom.kind == "ball":
        k = k * sphere_area(dom.N) * X.x ** (dom.N - 1)
    return k


def bilinear_form(u, v, params: FracParams, domain: DomainGeometry, weight=None,
                  spec: QuadSpec = QuadSpec(), outer_alpha: float | None = None) -> QuadResult:
    """(c/2) int int (u(x)-u(y))(v(x)-v(y)) |x-y|^{-N-2s} w(x) dx dy.

    ``weight`` is None (w = 1), a callable of Points, or one of the strings
    "D" (delta^{2-2s}), "D-1" and "delta^(1-2s)".  The outer integral is
    graded toward the boundary with a Jacobi panel for the leading power
    ``outer_alpha`` (chosen from the weight when not given).
    """
    _check_params(params, domain)
    s = params.s
    wfun, alpha = _weight(weight, domain, s)
    if outer_alpha is not None:
        alpha = outer_alpha

    def level(sp):
        rule = energy_pairs(domain, s, sp, alpha)
        X = rule.xpts()
        du = evaluate(u, X, domain) - evaluate(u, rule.inner, domain)
        dv = du if v is u else evaluate(v, X, domain) - evaluate(v, rule.inner, domain)
        vals = du * dv * pair_measure(rule, domain, s, X)
        if wfun is not None:
            vals = vals * wfun(X)
        return params.c_ns / 2.0 * iterated_integral(rule, vals)

    return _refine(level, spec, divergence=weight == "delta^(1-2s)")


def _weight(weight, dom: DomainGeometry, s: float):
    base = 2.0 * s - 2.0
    if weight is None:
        return None, base
    if callable(weight):
        return weight, base
    p = 2.0 - 2.0 * s
    if weight == "D":
        return (lambda X: dom.delta_pow(X, p)), 0.0
    if weight == "D-1":
        return (lambda X: dom.delta_pow(X, p) - 1.0), base
    if weight == "delta^(1-2s)":
        return (lambda X: dom.delta_pow(X, 1.0 - 2.0 * s)), -1.0 + 1e-9
    raise DomainError(f"unknown weight {weight!r}")


def _refine(level: Callable[[QuadSpec], float], spec: QuadSpec, divergence: bool = False,
            levels: int | None = None) -> QuadResult:
    history = []
    nmax = spec.max_subdiv if levels is None else levels
    for k in range(nmax + 1):
        sp = spec.refined(k) if k else spec
        history.append(level(sp))
        if len(history) > 1 and levels is None:
            if abs(history[-1] - history[-2]) <= sp.tolerance(history[-1]):
                break
    err = abs(history[-1] - history[-2]) if len(history) > 1 else float("inf")
    conv = err <= spec.tolerance(history[-1])
    if divergence and not conv and len(history) >= 3:
        d = np.abs(np.diff(history))
        if d[-1] > 0.5 * d[-2]:
            raise DivergenceError("weighted energy keeps growing under refinement", history)
    return QuadResult(history[-1], err, conv, 0, history)


def depth_study(u, params: FracParams, domain: DomainGeometry, weight, depths=(1e-4, 1e-6, 1e-8, 1e-10, 1e-12),
                spec: QuadSpec = QuadSpec()) -> list[float]:
    """Weighted energies with the integration region cut at distance eps from the boundary.

    A bounded integral settles as eps -> 0; a logarithmic divergence grows
    linearly in log(1/eps).
    """
    s = params.s
    wfun, alpha = _weight(weight, domain, s)
    out = []
    for eps in depths:
        dom = DomainGeometry(domain.kind, domain.N, domain.delta, depth=eps)
        rule = energy_pairs(dom, s, spec, None)
        X = rule.xpts()
        du = evaluate(u, X, dom) - evaluate(u, rule.inner, dom)
        vals = du * du * pair_measure(rule, dom, s, X)
        if wfun is not None:
            vals = vals * wfun(X)
        # drop the innermost outer panels that reach below eps
        keep = np.minimum(X.dl, X.dr) >= eps if dom.kind == "interval" else X.dr >= eps
        out.append(params.c_ns / 2.0 * float(np.dot(rule.w[keep], vals[keep])))
    return out
