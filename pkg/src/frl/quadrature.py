"""Singular-integral engines.

Everything here is built on composite Gauss rules over geometrically graded
panels.  Nodes are always carried as a pair of distances (to the left and to
the right end of their segment) so that points lying 1e-30 away from a
boundary or from the diagonal keep full relative precision.  Integrands that
care about that precision receive the distances, not just the coordinate.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, NamedTuple, Sequence

import numpy as np
from scipy.special import roots_jacobi, roots_legendre

from . import _backend


class DomainError(ValueError):
    """Raised for arguments outside the mathematical domain of an operation."""


class DivergenceError(ArithmeticError):
    """Raised when refinement shows an integral does not settle.

    ``history`` holds the successive estimates that revealed the problem.
    """

    def __init__(self, message: str, history: Sequence[float] = ()):
        super().__init__(message)
        self.history = list(history)


@dataclass(frozen=True)
class QuadSpec:
    """Accuracy request shared by every engine.

    ``order`` is the number of Gauss points per panel and ``sigma`` the
    geometric grading ratio; both are raised automatically during refinement.
    """

    rel_tol: float = 1e-10
    abs_tol: float = 1e-14
    max_subdiv: int = 4
    singular_exponent: float = 0.0
    order: int = 12
    sigma: float = 0.3
    max_panel: float = 0.25

    def __post_init__(self):
        if not (self.rel_tol > 0 and self.abs_tol > 0):
            raise DomainError("rel_tol and abs_tol must be positive")
        if self.max_subdiv < 1:
            raise DomainError("max_subdiv must be >= 1")
        if self.singular_exponent <= -1:
            raise DomainError("singular_exponent must be > -1 (integrability)")
        if not 0 < self.sigma < 1:
            raise DomainError("sigma must lie in (0, 1)")
        if self.order < 2:
            raise DomainError("order must be >= 2")

    def refined(self, level: int = 1) -> "QuadSpec":
        """Spec one refinement step finer: more points, finer panels."""
        return QuadSpec(
            rel_tol=self.rel_tol,
            abs_tol=self.abs_tol,
            max_subdiv=self.max_subdiv,
            singular_exponent=self.singular_exponent,
            order=self.order + 4 * level,
            sigma=self.sigma,
            max_panel=self.max_panel / (2**level),
        )

    def tolerance(self, value: float) -> float:
        return max(self.abs_tol, self.rel_tol * abs(value))


@dataclass
class QuadResult:
    value: float
    error: float
    converged: bool = True
    n_evals: int = 0
    history: list = field(default_factory=list)

    def __float__(self) -> float:
        return float(self.value)


# ---------------------------------------------------------------------------
# reference rules


@lru_cache(maxsize=None)
def _legendre01(q: int):
    x, w = roots_legendre(q)
    # nodes on (0, 1) together with their complements, both accurate
    return (1.0 + x) / 2.0, (1.0 - x) / 2.0, w / 2.0


@lru_cache(maxsize=None)
def _jacobi01(q: int, alpha: float, at_left: bool):
    """Rule on (0, 1) for integrands ~ t**alpha (at_left) or (1-t)**alpha.

    The returned weights already divide out the power, so they apply to the
    full integrand.
    """
    if at_left:
        x, w = roots_jacobi(q, 0.0, alpha)
        t = (1.0 + x) / 2.0
        tc = (1.0 - x) / 2.0
        wt = w * 0.5 ** (1.0 + alpha) / t**alpha
    else:
        x, w = roots_jacobi(q, alpha, 0.0)
        t = (1.0 + x) / 2.0
        tc = (1.0 - x) / 2.0
        wt = w * 0.5 ** (1.0 + alpha) / tc**alpha
    return t, tc, wt


class EndGrading(NamedTuple):
    """How to treat one end of a segment.

    ``hmin`` is the size of the innermost panel; ``alpha`` (optional) is the
    power law of the integrand at that end, used for a Gauss-Jacobi rule on
    the innermost panel.
    """

    hmin: float
    alpha: float | None = None


class SegmentRule(NamedTuple):
    from_left: np.ndarray
    from_right: np.ndarray
    weights: np.ndarray


def _graded_half(length: float, hmin: float, sigma: float) -> list[float]:
    """Edges (as distances from the graded end) of a geometric grading."""
    if hmin >= length:
        return [0.0, length]
    k = int(math.ceil(math.log(hmin / length) / math.log(sigma)))
    edges = [0.0] + [length * sigma**j for j in range(k, 0, -1)] + [length]
    return edges


def _split_long(edges: list[float], max_panel: float) -> list[float]:
    out = [edges[0]]
    for a, b in zip(edges[:-1], edges[1:]):
        m = int(math.ceil((b - a) / max_panel - 1e-12))
        if m > 1:
            out.extend(a + (b - a) * j / m for j in range(1, m))
        out.append(b)
    return out


def segment_rule(
    length: float,
    left: EndGrading | None = None,
    right: EndGrading | None = None,
    breaks: Sequence[float] = (),
    order: int = 12,
    sigma: float = 0.3,
    max_panel: float = 0.25,
    break_depth: float = 0.0,
) -> SegmentRule:
    """Composite rule on (0, length) graded toward singular ends.

    Breaks are interior points where the integrand is only piecewise smooth;
    pieces next to a graded end are additionally graded toward any break that
    sits closer to the singular point than the piece is long.  With
    ``break_depth > 0`` every piece is also graded toward its break ends,
    down to ``break_depth`` times its length (for cusps at the breaks).
    """
    return _backend.segment_rule(length, left, right, tuple(breaks), order, sigma, max_panel, break_depth)


def _segment_rule_py(length, left, right, breaks, order, sigma, max_panel, break_depth=0.0):
    if length <= 0:
        return SegmentRule(np.empty(0), np.empty(0), np.empty(0))
    cuts = sorted(b for b in breaks if 0.0 < b < length)
    pieces = list(zip([0.0] + cuts, cuts + [length]))
    tl_all, tr_all, w_all = [], [], []
    for ip, (p0, p1) in enumerate(pieces):
        plen = p1 - p0
        # distances of this piece's ends to the singular ends of the segment
        gl = gr = None
        if left is not None:
            if ip == 0:
                gl = left
            elif p0 < plen:
                gl = EndGrading(p0, None)
        if right is not None:
            dist = length - p1
            if ip == len(pieces) - 1:
                gr = right
            elif dist < plen:
                gr = EndGrading(dist, None)
        if break_depth > 0.0:
            hb = plen * break_depth
            if ip > 0:
                gl = EndGrading(hb if gl is None else min(gl.hmin, hb), None)
            if ip < len(pieces) - 1:
                gr = EndGrading(hb if gr is None else min(gr.hmin, hb), None)
        # the two halves of the piece, each as edges measured from its own end
        if gl is not None and gr is not None:
            half = plen / 2.0
            el = _split_long(_graded_half(half, gl.hmin, sigma), max_panel)
            er = _split_long(_graded_half(half, gr.hmin, sigma), max_panel)
            halves = [(el, "L", gl), (er, "R", gr)]
        elif gl is not None:
            halves = [(_split_long(_graded_half(plen, gl.hmin, sigma), max_panel), "L", gl)]
        elif gr is not None:
            halves = [(_split_long(_graded_half(plen, gr.hmin, sigma), max_panel), "R", gr)]
        else:
            halves = [(_split_long([0.0, plen], max_panel), "L", None)]
        pr = length - p1  # distance of the piece's right end to the segment end
        for edges, side, g in halves:
            for j in range(len(edges) - 1):
                a, b = edges[j], edges[j + 1]
                h = b - a
                if j == 0 and g is not None and g.alpha is not None and a == 0.0:
                    t, tc, w = _jacobi01(order, float(g.alpha), True)
                else:
                    t, tc, w = _legendre01(order)
                if side == "L":
                    # local distances from the piece's left end
                    loc_l = a + h * t
                    tl = p0 + loc_l
                    tr = pr + (plen - b) + h * tc
                else:
                    # edges measured from the piece's right end; t runs leftward
                    loc_r = a + h * t
                    tr = pr + loc_r
                    tl = p0 + (plen - b) + h * tc
                tl_all.append(tl)
                tr_all.append(tr)
                w_all.append(h * w)
    return SegmentRule(np.concatenate(tl_all), np.concatenate(tr_all), np.concatenate(w_all))


# ---------------------------------------------------------------------------
# one-dimensional engines


def _refine_loop(compute: Callable[[QuadSpec], tuple[float, int]], spec: QuadSpec) -> QuadResult:
    history = []
    evals = 0
    prev = None
    for level in range(spec.max_subdiv + 1):
        val, n = compute(spec.refined(level) if level else spec)
        evals += n
        history.append(val)
        if prev is not None:
            err = abs(val - prev)
            if err <= spec.tolerance(val):
                return QuadResult(val, err, True, evals, history)
        prev = val
    err = abs(history[-1] - history[-2]) if len(history) > 1 else float("inf")
    return QuadResult(history[-1], err, False, evals, history)


def pv_integral(
    f: Callable[[np.ndarray], np.ndarray],
    x0: float,
    s: float,
    a: float = -1.0,
    b: float = 1.0,
    spec: QuadSpec = QuadSpec(),
) -> QuadResult:
    """Cauchy principal value of ``f`` over (a, b) about the interior point x0.

    ``f(y) * |y - x0|**(1 + 2s)`` must extend smoothly across x0.  The value is
    obtained by symmetric pairing: the even part f(x0+h) + f(x0-h), which
    behaves like h**(1-2s), is integrated over the largest symmetric window
    and the unpaired remainder is added separately.  ``spec.singular_exponent``
    describes the behaviour of ``f`` at the ends of (a, b).
    """
    if not a < x0 < b:
        raise DomainError("x0 must lie strictly inside (a, b)")
    left, right = x0 - a, b - x0
    r = min(left, right)
    alpha_pair = 1.0 - 2.0 * s
    ends = spec.singular_exponent

    def compute(sp: QuadSpec):
        hmin_end = r * 1e-12
        g = segment_rule(
            r,
            EndGrading(r * sp.sigma**2, alpha_pair),
            EndGrading(hmin_end, ends if ends else None),
            order=sp.order,
            sigma=sp.sigma,
            max_panel=sp.max_panel,
        )
        h = g.from_left
        total = np.sum(g.weights * (f(x0 + h) + f(x0 - h)))
        n = 2 * h.size
        rest = abs(right - left)
        if rest > 0:
            far = EndGrading(rest * 1e-12, ends if ends else None)
            near = EndGrading(min(r, rest) * sp.sigma, None)
            if right > left:
                q = segment_rule(rest, near, far, order=sp.order, sigma=sp.sigma, max_panel=sp.max_panel)
                y = x0 + r + q.from_left
            else:
                q = segment_rule(rest, far, near, order=sp.order, sigma=sp.sigma, max_panel=sp.max_panel)
                y = x0 - r - q.from_right
            total += np.sum(q.weights * f(y))
            n += y.size
        return float(total), n

    return _refine_loop(compute, spec)


def weighted_endpoint_integral(
    f: Callable[[np.ndarray], np.ndarray],
    exponent_left: float,
    exponent_right: float,
    a: float = -1.0,
    b: float = 1.0,
    spec: QuadSpec = QuadSpec(),
) -> QuadResult:
    """Integral of f(x) (x-a)**exponent_left (b-x)**exponent_right over (a, b).

    A single Gauss-Jacobi rule is tried first (exact for polynomial f); if it
    does not settle, a composite rule graded toward both ends takes over.
    """
    if exponent_left <= -1 or exponent_right <= -1:
        raise DomainError("endpoint exponents must exceed -1 (integrability)")
    if not b > a:
        raise DomainError("need a < b")
    L = b - a
    scale = (L / 2.0) ** (1.0 + exponent_left + exponent_right)
    history = []
    prev = None
    for q in (spec.order, 2 * spec.order, 4 * spec.order):
        xj, wj = roots_jacobi(q, exponent_right, exponent_left)
        val = float(scale * np.sum(wj * f(a + L * (1.0 + xj) / 2.0)))
        history.append(val)
        if prev is not None and abs(val - prev) <= spec.tolerance(val):
            return QuadResult(val, abs(val - prev), True, 7 * spec.order, history)
        prev = val

    def compute(sp: QuadSpec):
        g = segment_rule(
            L,
            EndGrading(L * 1e-14, exponent_left),
            EndGrading(L * 1e-14, exponent_right),
            order=sp.order,
            sigma=sp.sigma,
            max_panel=sp.max_panel,
        )
        x = a + g.from_left
        wt = g.weights * g.from_left**exponent_left * g.from_right**exponent_right
        return float(np.sum(wt * f(x))), x.size

    res = _refine_loop(compute, spec)
    res.history = history + res.history
    return res


# ---------------------------------------------------------------------------
# iterated double integrals on an interval


class Points(NamedTuple):
    """Points of an interval (lo, hi) with accurate distances to both ends."""

    x: np.ndarray
    dl: np.ndarray
    dr: np.ndarray


@dataclass(frozen=True)
class PairRule:
    """Flattened tensor of (outer x, inner y) nodes for an iterated integral.

    ``offset`` is y - x computed without cancellation; ``owner`` maps every
    pair to its outer node.
    """

    outer: Points
    outer_w: np.ndarray
    owner: np.ndarray
    inner: Points
    offset: np.ndarray
    w: np.ndarray  # inner weight times outer weight

    @property
    def size(self) -> int:
        return int(self.w.size)

    def xpts(self) -> Points:
        o = self.owner
        return Points(self.outer.x[o], self.outer.dl[o], self.outer.dr[o])


def outer_rule(
    lo: float,
    hi: float,
    spec: QuadSpec,
    alpha_lo: float | None,
    alpha_hi: float | None,
    breaks: Sequence[float] = (),
    depth: float = 1e-14,
    grade_lo: bool = True,
    grade_hi: bool = True,
    break_depth: float = 0.0,
) -> tuple[Points, np.ndarray]:
    """Rule over (lo, hi) graded toward the flagged ends.

    ``alpha_*`` is the leading power of the integrand at that end (None for
    plain Gauss-Legendre on the innermost panel).  ``break_depth`` grades
    toward the breaks as well (see ``segment_rule``).
    """
    L = hi - lo
    g = segment_rule(
        L,
        EndGrading(L * depth, alpha_lo) if grade_lo else None,
        EndGrading(L * depth, alpha_hi) if grade_hi else None,
        breaks=[b - lo for b in breaks],
        order=spec.order,
        sigma=spec.sigma,
        max_panel=spec.max_panel,
        break_depth=break_depth,
    )
    x = 0.5 * ((lo + g.from_left) + (hi - g.from_right))
    return Points(x, g.from_left, g.from_right), g.weights


def pair_rule(
    lo: float,
    hi: float,
    spec: QuadSpec,
    *,
    diag_alpha: float,
    outer_alpha: tuple[float | None, float | None],
    inner_alpha: tuple[float | None, float | None],
    breaks: Sequence[float] = (),
    singular_lo: bool = True,
    depth: float = 1e-14,
) -> PairRule:
    """Build the node set for an iterated integral over (lo, hi)^2.

    The inner rule of every outer node x is split at x and graded toward it
    with a Gauss-Jacobi panel of exponent ``diag_alpha``; it is also graded
    toward the ends of the interval.  ``singular_lo=False`` means the lower
    end is a regular point (e.g. the centre in radial coordinates).
    """
    if not diag_alpha > -1.0:
        raise DomainError("diag_alpha must exceed -1: the integrand is not integrable across the diagonal")
    outer, ow = outer_rule(lo, hi, spec, *outer_alpha, breaks=breaks, depth=depth, grade_lo=singular_lo)
    data = _backend.inner_rules(
        outer.dl,
        outer.dr,
        tuple(b - lo for b in breaks),
        hi - lo,
        float(diag_alpha),
        inner_alpha[0],
        inner_alpha[1],
        bool(singular_lo),
        spec.order,
        spec.sigma,
        spec.max_panel,
        depth,
    )
    owner, dl, dr, off, w = data
    x = 0.5 * ((lo + dl) + (hi - dr))
    return PairRule(outer, ow, owner, Points(x, dl, dr), off, w * ow[owner])


def _inner_rules_py(odl, odr, breaks, L, diag_alpha, alpha_lo, alpha_hi, singular_lo, order, sigma, max_panel, depth):
    owners, dls, drs, offs, ws = [], [], [], [], []
    for i in range(odl.size):
        dlx, drx = float(odl[i]), float(odr[i])
        hdiag = max(min(dlx, drx) * sigma, 1e-300)
        # segment (lo, x): left end is the domain end, right end is the diagonal
        if dlx > 0:
            left_g = EndGrading(dlx * depth, alpha_lo) if singular_lo else None
            br = [b for b in breaks if 0 < b < dlx]
            g = _segment_rule_py(dlx, left_g, EndGrading(min(hdiag, dlx), diag_alpha), br, order, sigma, max_panel)
            owners.append(np.full(g.weights.size, i))
            dls.append(g.from_left)
            drs.append(drx + g.from_right)
            offs.append(-g.from_right)
            ws.append(g.weights)
        if drx > 0:
            br = [b - dlx for b in breaks if dlx < b < L]
            g = _segment_rule_py(
                drx,
                EndGrading(min(hdiag, drx), diag_alpha),
                EndGrading(drx * depth, alpha_hi),
                br,
                order,
                sigma,
                max_panel,
            )
            owners.append(np.full(g.weights.size, i))
            dls.append(dlx + g.from_left)
            drs.append(g.from_right)
            offs.append(g.from_left)
            ws.append(g.weights)
    return (
        np.concatenate(owners),
        np.concatenate(dls),
        np.concatenate(drs),
        np.concatenate(offs),
        np.concatenate(ws),
    )


def iterated_integral(rule: PairRule, values: np.ndarray) -> float:
    """Sum of pair values against the pair weights (fixed order, deterministic)."""
    return float(np.dot(rule.w, values))


def double_singular_integral(
    F: Callable[[Points, Points, np.ndarray], np.ndarray],
    s: float,
    domain,
    spec: QuadSpec = QuadSpec(),
    *,
    outer_alpha: float | None = None,
    inner_alpha: float | None = None,
    diag_alpha: float | None = None,
    divergence_check: bool = True,
) -> QuadResult:
    """Integral of F(x, y, y-x) over the domain squared, kernel included.

    ``F`` receives the outer points, the inner points and the accurate offset
    y - x, and must return the full integrand (numerator times kernel times
    any weight).  On the interval both ends are singular; in radial mode the
    centre is regular.  Refinement runs until two successive levels agree to
    the requested tolerance.  If successive differences grow instead of
    shrinking the integral is declared divergent.
    """
    if diag_alpha is None:
        diag_alpha = 1.0 - 2.0 * s
    lo, hi = domain.lo, domain.hi
    singular_lo = domain.kind == "interval"
    oa = outer_alpha if outer_alpha is not None else 0.0

    def compute(sp: QuadSpec):
        rule = pair_rule(
            lo,
            hi,
            sp,
            diag_alpha=diag_alpha,
            outer_alpha=(oa, oa),
            inner_alpha=(inner_alpha, inner_alpha),
            breaks=domain.breaks,
            singular_lo=singular_lo,
            depth=domain.depth,
        )
        vals = F(rule.xpts(), rule.inner, rule.offset)
        return iterated_integral(rule, vals), rule.size

    res = _refine_loop(compute, spec)
    if divergence_check and len(res.history) >= 3:
        d = np.abs(np.diff(res.history))
        h = np.abs(res.history)
        growing = np.all(d[1:] > 1.5 * d[:-1]) and d[-1] > 1e-6 * h[-1]
        # or magnitudes still climbing with O(1) relative steps
        climbing = np.all(np.diff(h[-3:]) > 0) and d[-1] > 0.1 * h[-1]
        if not res.converged and (growing or climbing):
            raise DivergenceError("double integral does not settle under refinement", res.history)
    return res
