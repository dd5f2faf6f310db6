"""Weighted Galerkin solver: u = delta^{2s-1} * sum_k c_k P_k.

On the interval P_k are Legendre polynomials in x; on radial balls they are
Legendre polynomials in 2r^2 - 1 (even, hence smooth at the centre).  The
weight always uses the blended distance: it equals 1 - |x| in the boundary
collar, so the trace u/delta^{2s-1} = sum c_k P_k(boundary) is the same for
either choice of delta in the identities, while the basis stays smooth
across the centre.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
import scipy.linalg as sla
from numpy.polynomial import legendre as npleg

from .constants import FracParams
from .operator import (
    DomainGeometry,
    _check_params,
    energy_pairs,
    evaluate,
    frac_laplacian_at,
    pair_measure,
)
from .parallel import ordered_sum
from .quadrature import DomainError, Points, QuadSpec, outer_rule

CHUNK = 200_000


class AssemblyError(RuntimeError):
    """Stiffness matrix failed the positive-definiteness check."""


class EigenError(RuntimeError):
    pass


def basis_geometry(dom: DomainGeometry) -> DomainGeometry:
    return DomainGeometry(dom.kind, dom.N, "blended", dom.depth)


def _var(pts: Points, dom: DomainGeometry) -> np.ndarray:
    """Polynomial variable: x on the interval, 2r^2 - 1 on balls."""
    if dom.kind == "interval":
        return pts.x
    return 2.0 * pts.x**2 - 1.0


def _dvar(pts: Points, dom: DomainGeometry) -> np.ndarray:
    return np.ones_like(pts.x) if dom.kind == "interval" else 4.0 * pts.x


def basis_values(n: int, pts: Points, dom: DomainGeometry, s: float) -> np.ndarray:
    """Matrix (len(pts), n) of phi_k = delta^{2s-1} P_k."""
    bd = basis_geometry(dom)
    w = bd.delta_of(pts) ** (2.0 * s - 1.0)
    return npleg.legvander(_var(pts, dom), n - 1) * w[:, None]


def legendre_diff(c: np.ndarray, x: np.ndarray, h: np.ndarray) -> np.ndarray:
    """sum_k c_k (P_k(x + h) - P_k(x)) by running the three-term recurrence on differences."""
    y = x + h
    p_prev, p = np.ones_like(x), x.copy()
    d_prev, d = np.zeros_like(x), h.copy()
    out = np.zeros_like(x)
    if c.size > 1:
        out = out + c[1] * d
    for k in range(1, c.size - 1):
        d_next = ((2 * k + 1) * (y * d + h * p) - k * d_prev) / (k + 1)
        p_next = ((2 * k + 1) * x * p - k * p_prev) / (k + 1)
        out = out + c[k + 1] * d_next
        d_prev, d = d, d_next
        p_prev, p = p, p_next
    return out


@dataclass(frozen=True)
class SpectralFunction:
    coeffs: tuple
    s: float
    domain: DomainGeometry
    diagnostics: dict = field(default_factory=dict, compare=False, hash=False)

    @property
    def basis_degree(self) -> int:
        return len(self.coeffs)

    @property
    def c(self) -> np.ndarray:
        return np.asarray(self.coeffs, dtype=float)

    def quotient(self, pts: Points) -> np.ndarray:
        """u / delta^{2s-1}: the polynomial part."""
        return npleg.legval(_var(pts, self.domain), self.c)

    def weight_geometry(self) -> DomainGeometry:
        return basis_geometry(self.domain)

    def weight_points(self, pts: Points) -> np.ndarray:
        return basis_geometry(self.domain).delta_of(pts) ** (2.0 * self.s - 1.0)

    def quotient_diff(self, X: Points, Y: Points, off: np.ndarray) -> np.ndarray:
        """q(y) - q(x) evaluated from the exact offset y - x (no cancellation)."""
        if self.domain.kind == "interval":
            zx, h = X.x, off
        else:
            zx, h = 2.0 * X.x**2 - 1.0, 2.0 * off * (X.x + Y.x)
        return legendre_diff(self.c, zx, h)

    def eval_points(self, pts: Points) -> np.ndarray:
        bd = basis_geometry(self.domain)
        return bd.delta_of(pts) ** (2.0 * self.s - 1.0) * self.quotient(pts)

    def __call__(self, x) -> np.ndarray:
        return self.eval_points(self.domain.points(x))

    def derivative_points(self, pts: Points) -> np.ndarray:
        """du/dx (interval) or du/dr (ball), differentiated analytically."""
        bd = basis_geometry(self.domain)
        d = bd.delta_of(pts)
        q = self.quotient(pts)
        dq = npleg.legval(_var(pts, self.domain), npleg.legder(self.c)) * _dvar(pts, self.domain)
        return (2.0 * self.s - 1.0) * d ** (2.0 * self.s - 2.0) * bd.grad_delta(pts) * q + d ** (2.0 * self.s - 1.0) * dq

    def scaled(self, a: float) -> "SpectralFunction":
        return SpectralFunction(tuple(a * self.c), self.s, self.domain, dict(self.diagnostics))

    def to_dict(self, kind: str = "solution") -> dict:
        return {
            "schema": 1,
            "kind": kind,
            "N": self.domain.N,
            "s": self.s,
            "basis_degree": self.basis_degree,
            "coeffs": [float(v) for v in self.c],
            "delta_spec": self.domain.spec_dict(),
            "diagnostics": self.diagnostics,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SpectralFunction":
        ds = d["delta_spec"]
        dom = DomainGeometry(ds["kind"], int(d["N"]), ds["delta"])
        return cls(tuple(d["coeffs"]), float(d["s"]), dom, d.get("diagnostics", {}))

    def to_json(self, kind: str = "solution") -> str:
        return json.dumps(self.to_dict(kind), indent=2, sort_keys=True)


@dataclass(frozen=True)
class EigenPair:
    lam: float
    eigenfunction: SpectralFunction

    @property
    def lambda_(self) -> float:
        return self.lam


# ---------------------------------------------------------------------------
# assembly


def weighted_rule(dom: DomainGeometry, spec: QuadSpec, alpha: float):
    """Outer rule for int_Omega g dx with g ~ delta^alpha at the boundary; volume weight included."""
    pts, w = outer_rule(dom.lo, dom.hi, spec, alpha, alpha, breaks=dom.breaks, depth=dom.depth,
                        grade_lo=dom.kind == "interval", break_depth=1e-10)
    return pts, w * dom.volume_weight(pts)


def mass_matrix(params: FracParams, dom: DomainGeometry, n: int, spec: QuadSpec = QuadSpec()) -> np.ndarray:
    pts, w = weighted_rule(dom, spec, 4.0 * params.s - 2.0)
    B = basis_values(n, pts, dom, params.s)
    M = (B * w[:, None]).T @ B
    return 0.5 * (M + M.T)


def load_vector(rhs: Callable, params: FracParams, dom: DomainGeometry, n: int, spec: QuadSpec = QuadSpec()):
    pts, w = weighted_rule(dom, spec, 2.0 * params.s - 1.0)
    B = basis_values(n, pts, dom, params.s)
    f = evaluate(rhs, pts, dom)
    return B.T @ (w * f)


def _stiffness_raw(params: FracParams, dom: DomainGeometry, n: int, spec: QuadSpec) -> np.ndarray:
    s = params.s
    rule = energy_pairs(dom, s, spec, 2.0 * s - 2.0)
    X = rule.outer
    Bx = basis_values(n, X, dom, s)
    Xp = rule.xpts()
    meas = pair_measure(rule, dom, s, Xp) * rule.w

    def chunk(a):
        sl = slice(a, a + CHUNK)
        inner = Points(rule.inner.x[sl], rule.inner.dl[sl], rule.inner.dr[sl])
        Dl = Bx[rule.owner[sl]] - basis_values(n, inner, dom, s)
        return (Dl * meas[sl, None]).T @ Dl

    # chunks may run on several threads; the sum is always taken in chunk order
    K = ordered_sum(chunk, range(0, rule.size, CHUNK))
    return params.c_ns / 2.0 * K


def assemble_stiffness(params: FracParams, dom: DomainGeometry, n: int, spec: QuadSpec = QuadSpec(),
                       return_info: bool = False):
    """Symmetric positive-definite matrix of the H^s(Omega) form on the basis."""
    _check_params(params, dom)
    if n < 1:
        raise DomainError("basis size n must be >= 1")
    K = _stiffness_raw(params, dom, n, spec)
    asym = float(np.max(np.abs(K - K.T)) / max(np.max(np.abs(K)), 1e-300))
    K = 0.5 * (K + K.T)
    try:
        np.linalg.cholesky(K)
    except np.linalg.LinAlgError as exc:
        raise AssemblyError("stiffness matrix is not positive definite; quadrature accuracy insufficient") from exc
    if not return_info:
        return K
    info = {"asymmetry": asym, "condition": float(np.linalg.cond(K))}
    return K, info


# ---------------------------------------------------------------------------
# solves


def _default_points(dom: DomainGeometry) -> np.ndarray:
    if dom.kind == "interval":
        m = 9
        return np.concatenate([[0.0, -0.5, 0.5], np.cos(np.pi * (np.arange(m) + 0.5) / m)])
    return np.concatenate([[0.0, 0.5], 0.5 + 0.45 * np.cos(np.pi * (np.arange(6) + 0.5) / 6)])


def interior_residuals(u: SpectralFunction, rhs: Callable, params: FracParams, points=None,
                       spec: QuadSpec = QuadSpec()) -> dict:
    """|L u - f| at interior collocation points (pointwise operator of the discrete u)."""
    dom = u.domain
    x = _default_points(dom) if points is None else np.asarray(points, dtype=float)
    X = dom.points(x)
    Lu = frac_laplacian_at(u, X, params, dom, spec)
    f = evaluate(rhs, X, dom)
    return {"points": [float(v) for v in x], "residual": [float(v) for v in np.abs(Lu - f)]}


def solve_dirichlet(rhs: Callable, params: FracParams, dom: DomainGeometry, n: int,
                    spec: QuadSpec = QuadSpec(), stiffness: np.ndarray | None = None,
                    residuals: bool = True) -> SpectralFunction:
    """Galerkin solution of L u = f, u = 0 on the boundary."""
    K = assemble_stiffness(params, dom, n, spec) if stiffness is None else stiffness
    b = load_vector(rhs, params, dom, n, spec)
    c = sla.cho_solve(sla.cho_factor(K), b)
    u = SpectralFunction(tuple(float(v) for v in c), params.s, dom)
    diag = {"tolerances": {"rel_tol": spec.rel_tol, "abs_tol": spec.abs_tol, "order": spec.order,
                           "sigma": spec.sigma, "max_panel": spec.max_panel}}
    if residuals:
        diag["residuals"] = interior_residuals(u, rhs, params, spec=spec)
    diag["energy"] = float(c @ K @ c)
    diag["load_pairing"] = float(c @ b)
    return SpectralFunction(u.coeffs, u.s, dom, diag)


def l2_norm(u, params: FracParams, dom: DomainGeometry, spec: QuadSpec = QuadSpec()) -> float:
    pts, w = weighted_rule(dom, spec, 4.0 * params.s - 2.0)
    return math.sqrt(float(np.sum(w * evaluate(u, pts, dom) ** 2)))


def centroid(dom: DomainGeometry) -> float:
    return 0.0


def solve_eigen(params: FracParams, dom: DomainGeometry, n: int, k: int = 1, spec: QuadSpec = QuadSpec(),
                stiffness: np.ndarray | None = None) -> list[EigenPair]:
    """k smallest eigenpairs of K c = lambda M c, L2-normalised."""
    if k > n:
        raise DomainError("k must not exceed n")
    K = assemble_stiffness(params, dom, n, spec) if stiffness is None else stiffness
    M = mass_matrix(params, dom, n, spec)
    try:
        lam, V = sla.eigh(K, M, subset_by_index=[0, k - 1])
    except (np.linalg.LinAlgError, ValueError) as exc:
        raise EigenError(f"generalized eigensolver failed: {exc}") from exc
    out = []
    X0 = dom.points([0.0])
    for j in range(k):
        v = V[:, j]
        v = v / math.sqrt(float(v @ M @ v))
        u = SpectralFunction(tuple(float(t) for t in v), params.s, dom)
        val = float(u.eval_points(X0)[0])
        if val < 0 or (val == 0 and v[np.argmax(np.abs(v))] < 0):
            v = -v
        diag = {"tolerances": {"rel_tol": spec.rel_tol, "order": spec.order, "sigma": spec.sigma,
                               "max_panel": spec.max_panel}, "lambda": float(lam[j])}
        out.append(EigenPair(float(lam[j]), SpectralFunction(tuple(float(t) for t in v), params.s, dom, diag)))
    return out


def boundary_trace(u: SpectralFunction) -> np.ndarray:
    """u/delta^{2s-1} on the boundary: [at -1, at +1] on the interval, [at r = 1] on balls."""
    if u.domain.kind == "interval":
        return npleg.legval(np.array([-1.0, 1.0]), u.c)
    return npleg.legval(np.array([1.0]), u.c)


def gradient_term(u: SpectralFunction, x) -> np.ndarray | float:
    """x . grad u at interior points (r u'(r) in ball mode)."""
    scalar = np.ndim(x) == 0
    u.domain.check_interior(x)
    X = u.domain.points(x)
    val = X.x * u.derivative_points(X)
    return float(val[0]) if scalar else val
