# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
# distutils: language = c++
"""Compiled rule builders.

Same panels, same reference rules and the same floating-point operations in
the same order as the pure-Python builders, so results agree bit for bit.
The build disables FMA contraction for that reason.
"""
from libc.math cimport ceil, log, pow, fabs
from libcpp.vector cimport vector

import numpy as np

cdef double NO_ALPHA = 1e300


cdef struct Grading:
    bint on
    double hmin
    bint has_alpha
    double alpha


cdef struct RefRule:
    const double* t
    const double* tc
    const double* w


cdef class _Rules:
    """Reference rules on (0, 1) for one order: Legendre plus Jacobi by exponent."""
    cdef int order
    cdef object keep
    cdef RefRule leg
    cdef vector[double] jac_alpha
    cdef vector[RefRule] jac

    def __init__(self, int order):
        from .quadrature import _legendre01

        self.order = order
        self.keep = []
        self.leg = self._wrap(_legendre01(order))

    cdef RefRule _wrap(self, tuple rule):
        cdef RefRule r
        cdef double[::1] a = np.ascontiguousarray(rule[0], dtype=np.float64)
        cdef double[::1] b = np.ascontiguousarray(rule[1], dtype=np.float64)
        cdef double[::1] c = np.ascontiguousarray(rule[2], dtype=np.float64)
        self.keep.append((a, b, c))
        r.t = &a[0]
        r.tc = &b[0]
        r.w = &c[0]
        return r

    cdef void add_alpha(self, double alpha):
        from .quadrature import _jacobi01

        cdef size_t k
        for k in range(self.jac_alpha.size()):
            if self.jac_alpha[k] == alpha:
                return
        self.jac_alpha.push_back(alpha)
        self.jac.push_back(self._wrap(_jacobi01(self.order, float(alpha), True)))

    cdef RefRule jacobi(self, double alpha):
        cdef size_t k
        for k in range(self.jac_alpha.size()):
            if self.jac_alpha[k] == alpha:
                return self.jac[k]
        return self.leg


cdef struct Out:
    vector[double] tl
    vector[double] tr
    vector[double] w


cdef Grading _grading(object g):
    cdef Grading r
    r.on = g is not None
    r.hmin = 0.0
    r.has_alpha = False
    r.alpha = NO_ALPHA
    if g is not None:
        r.hmin = float(g[0])
        if g[1] is not None:
            r.has_alpha = True
            r.alpha = float(g[1])
    return r


cdef Grading _plain(double hmin):
    cdef Grading r
    r.on = True
    r.hmin = hmin
    r.has_alpha = False
    r.alpha = NO_ALPHA
    return r


cdef Grading _with_alpha(double hmin, object alpha):
    cdef Grading r = _plain(hmin)
    if alpha is not None:
        r.has_alpha = True
        r.alpha = float(alpha)
    return r


cdef Grading _none():
    cdef Grading r
    r.on = False
    r.hmin = 0.0
    r.has_alpha = False
    r.alpha = NO_ALPHA
    return r


cdef void _graded_split(double length, double hmin, double sigma, double max_panel, vector[double]& out):
    """_split_long(_graded_half(length, hmin, sigma), max_panel)."""
    cdef vector[double] edges
    cdef int k, j, m
    cdef double a, b
    edges.push_back(0.0)
    if hmin >= length:
        edges.push_back(length)
    else:
        k = <int>ceil(log(hmin / length) / log(sigma))
        j = k
        while j >= 1:
            edges.push_back(length * pow(sigma, j))
            j -= 1
        edges.push_back(length)
    out.clear()
    out.push_back(edges[0])
    for j in range(<int>edges.size() - 1):
        a = edges[j]
        b = edges[j + 1]
        m = <int>ceil((b - a) / max_panel - 1e-12)
        if m > 1:
            for k in range(1, m):
                out.push_back(a + (b - a) * <double>k / <double>m)
        out.push_back(b)


cdef void _plain_split(double plen, double max_panel, vector[double]& out):
    cdef int m, k
    out.clear()
    out.push_back(0.0)
    m = <int>ceil((plen - 0.0) / max_panel - 1e-12)
    if m > 1:
        for k in range(1, m):
            out.push_back(0.0 + (plen - 0.0) * <double>k / <double>m)
    out.push_back(plen)


cdef void _emit_half(vector[double]& edges, bint left_side, Grading g, double p0, double plen, double pr,
                     int order, _Rules rules, Out* out):
    cdef int j, q
    cdef double a, b, h, loc
    cdef RefRule rr
    for j in range(<int>edges.size() - 1):
        a = edges[j]
        b = edges[j + 1]
        h = b - a
        if j == 0 and g.on and g.has_alpha and a == 0.0:
            rr = rules.jacobi(g.alpha)
        else:
            rr = rules.leg
        for q in range(order):
            if left_side:
                loc = a + h * rr.t[q]
                out.tl.push_back(p0 + loc)
                out.tr.push_back(pr + (plen - b) + h * rr.tc[q])
            else:
                loc = a + h * rr.t[q]
                out.tr.push_back(pr + loc)
                out.tl.push_back(p0 + (plen - b) + h * rr.tc[q])
            out.w.push_back(h * rr.w[q])


cdef void _segment(double length, Grading left, Grading right, vector[double]& breaks, int order, double sigma,
                   double max_panel, double break_depth, _Rules rules, Out* out):
    cdef vector[double] cuts
    cdef vector[double] el, er
    cdef size_t i
    cdef int ip, npieces
    cdef double p0, p1, plen, dist, hb, half, pr
    cdef Grading gl, gr
    if length <= 0:
        return
    for i in range(breaks.size()):
        if 0.0 < breaks[i] < length:
            cuts.push_back(breaks[i])
    _sort(cuts)
    npieces = <int>cuts.size() + 1
    for ip in range(npieces):
        p0 = 0.0 if ip == 0 else cuts[ip - 1]
        p1 = length if ip == npieces - 1 else cuts[ip]
        plen = p1 - p0
        gl = _none()
        gr = _none()
        if left.on:
            if ip == 0:
                gl = left
            elif p0 < plen:
                gl = _plain(p0)
        if right.on:
            dist = length - p1
            if ip == npieces - 1:
                gr = right
            elif dist < plen:
                gr = _plain(dist)
        if break_depth > 0.0:
            hb = plen * break_depth
            if ip > 0:
                gl = _plain(hb if not gl.on else min(gl.hmin, hb))
            if ip < npieces - 1:
                gr = _plain(hb if not gr.on else min(gr.hmin, hb))
        pr = length - p1
        if gl.on and gr.on:
            half = plen / 2.0
            _graded_split(half, gl.hmin, sigma, max_panel, el)
            _graded_split(half, gr.hmin, sigma, max_panel, er)
            _emit_half(el, True, gl, p0, plen, pr, order, rules, out)
            _emit_half(er, False, gr, p0, plen, pr, order, rules, out)
        elif gl.on:
            _graded_split(plen, gl.hmin, sigma, max_panel, el)
            _emit_half(el, True, gl, p0, plen, pr, order, rules, out)
        elif gr.on:
            _graded_split(plen, gr.hmin, sigma, max_panel, er)
            _emit_half(er, False, gr, p0, plen, pr, order, rules, out)
        else:
            _plain_split(plen, max_panel, el)
            _emit_half(el, True, _none(), p0, plen, pr, order, rules, out)


cdef void _sort(vector[double]& v):
    # insertion sort: a handful of breaks at most
    cdef int i, j
    cdef double key
    for i in range(1, <int>v.size()):
        key = v[i]
        j = i - 1
        while j >= 0 and v[j] > key:
            v[j + 1] = v[j]
            j -= 1
        v[j + 1] = key


cdef object _arr(vector[double]& v):
    cdef Py_ssize_t n = v.size()
    a = np.empty(n, dtype=np.float64)
    cdef double[::1] av = a
    cdef Py_ssize_t i
    for i in range(n):
        av[i] = v[i]
    return a


def segment_rule(double length, left, right, breaks, int order, double sigma, double max_panel,
                 double break_depth=0.0):
    cdef _Rules rules = _Rules(order)
    cdef Grading gl = _grading(left)
    cdef Grading gr = _grading(right)
    if gl.has_alpha:
        rules.add_alpha(gl.alpha)
    if gr.has_alpha:
        rules.add_alpha(gr.alpha)
    cdef vector[double] br
    for b in breaks:
        br.push_back(float(b))
    cdef Out out
    _segment(length, gl, gr, br, order, sigma, max_panel, break_depth, rules, &out)
    return _arr(out.tl), _arr(out.tr), _arr(out.w)


cdef struct Pairs:
    vector[long long] owner
    vector[double] dl
    vector[double] dr
    vector[double] off
    vector[double] w


cdef object _pairs_out(Pairs* p):
    cdef Py_ssize_t n = p.owner.size()
    owner = np.empty(n, dtype=np.int64)
    cdef long long[::1] ov = owner
    cdef Py_ssize_t i
    for i in range(n):
        ov[i] = p.owner[i]
    return owner, _arr(p.dl), _arr(p.dr), _arr(p.off), _arr(p.w)


def inner_rules(odl, odr, breaks, double L, double diag_alpha, alpha_lo, alpha_hi, bint singular_lo, int order,
                double sigma, double max_panel, double depth):
    cdef double[::1] dlv = np.ascontiguousarray(odl, dtype=np.float64)
    cdef double[::1] drv = np.ascontiguousarray(odr, dtype=np.float64)
    cdef _Rules rules = _Rules(order)
    rules.add_alpha(diag_alpha)
    if alpha_lo is not None:
        rules.add_alpha(float(alpha_lo))
    if alpha_hi is not None:
        rules.add_alpha(float(alpha_hi))
    cdef vector[double] allb
    for b in breaks:
        allb.push_back(float(b))
    cdef Pairs P
    cdef Out seg
    cdef vector[double] br
    cdef Py_ssize_t i, k, n = dlv.shape[0]
    cdef size_t j
    cdef double dlx, drx, hdiag
    cdef Grading lg
    for i in range(n):
        dlx = dlv[i]
        drx = drv[i]
        hdiag = max(min(dlx, drx) * sigma, 1e-300)
        if dlx > 0:
            lg = _with_alpha(dlx * depth, alpha_lo) if singular_lo else _none()
            br.clear()
            for j in range(allb.size()):
                if 0 < allb[j] < dlx:
                    br.push_back(allb[j])
            seg.tl.clear(); seg.tr.clear(); seg.w.clear()
            _segment(dlx, lg, _with_alpha(min(hdiag, dlx), diag_alpha), br, order, sigma, max_panel, 0.0,
                     rules, &seg)
            for k in range(<Py_ssize_t>seg.w.size()):
                P.owner.push_back(i)
                P.dl.push_back(seg.tl[k])
                P.dr.push_back(drx + seg.tr[k])
                P.off.push_back(-seg.tr[k])
                P.w.push_back(seg.w[k])
        if drx > 0:
            br.clear()
            for j in range(allb.size()):
                if dlx < allb[j] < L:
                    br.push_back(allb[j] - dlx)
            seg.tl.clear(); seg.tr.clear(); seg.w.clear()
            _segment(drx, _with_alpha(min(hdiag, drx), diag_alpha), _with_alpha(drx * depth, alpha_hi), br, order,
                     sigma, max_panel, 0.0, rules, &seg)
            for k in range(<Py_ssize_t>seg.w.size()):
                P.owner.push_back(i)
                P.dl.push_back(dlx + seg.tl[k])
                P.dr.push_back(seg.tr[k])
                P.off.push_back(seg.tl[k])
                P.w.push_back(seg.w[k])
    return _pairs_out(&P)


def pv_rules(odl, odr, breaks, double L, double diag_alpha, int order, double sigma, double max_panel,
             double depth):
    cdef double[::1] dlv = np.ascontiguousarray(odl, dtype=np.float64)
    cdef double[::1] drv = np.ascontiguousarray(odr, dtype=np.float64)
    cdef _Rules rules = _Rules(order)
    rules.add_alpha(diag_alpha)
    cdef vector[double] allb
    for b in breaks:
        allb.push_back(float(b))
    cdef Pairs P
    cdef Out seg
    cdef vector[double] br
    cdef Py_ssize_t i, k, n = dlv.shape[0]
    cdef size_t j, m
    cdef double dlx, drx, r, rest, d, h
    cdef bint dup
    for i in range(n):
        dlx = dlv[i]
        drx = drv[i]
        r = min(dlx, drx)
        # distinct break distances inside the pairing window
        br.clear()
        for j in range(allb.size()):
            d = fabs(allb[j] - dlx)
            if 0 < d < r:
                dup = False
                for m in range(br.size()):
                    if br[m] == d:
                        dup = True
                if not dup:
                    br.push_back(d)
        seg.tl.clear(); seg.tr.clear(); seg.w.clear()
        _segment(r, _plain_alpha(r * sigma, diag_alpha), _plain(r * depth), br, order, sigma, max_panel, 0.0,
                 rules, &seg)
        for k in range(<Py_ssize_t>seg.w.size()):
            h = seg.tl[k]
            P.owner.push_back(i)
            P.dl.push_back(dlx + h)
            P.dr.push_back((drx - r) + seg.tr[k])
            P.off.push_back(h)
            P.w.push_back(seg.w[k])
        for k in range(<Py_ssize_t>seg.w.size()):
            h = seg.tl[k]
            P.owner.push_back(i)
            P.dl.push_back((dlx - r) + seg.tr[k])
            P.dr.push_back(drx + h)
            P.off.push_back(-h)
            P.w.push_back(seg.w[k])
        rest = fabs(drx - dlx)
        if rest > 0:
            br.clear()
            seg.tl.clear(); seg.tr.clear(); seg.w.clear()
            if drx > dlx:
                for j in range(allb.size()):
                    if dlx + r < allb[j] < L:
                        br.push_back(allb[j] - (dlx + r))
                _segment(rest, _plain(min(r, rest)), _plain(rest * depth), br, order, sigma, max_panel, 0.0,
                         rules, &seg)
                for k in range(<Py_ssize_t>seg.w.size()):
                    P.owner.push_back(i)
                    P.dl.push_back(dlx + r + seg.tl[k])
                    P.dr.push_back(seg.tr[k])
                    P.off.push_back(r + seg.tl[k])
                    P.w.push_back(seg.w[k])
            else:
                for j in range(allb.size()):
                    if 0 < allb[j] < rest:
                        br.push_back(allb[j])
                _segment(rest, _plain(rest * depth), _plain(min(r, rest)), br, order, sigma, max_panel, 0.0,
                         rules, &seg)
                for k in range(<Py_ssize_t>seg.w.size()):
                    P.owner.push_back(i)
                    P.dl.push_back(seg.tl[k])
                    P.dr.push_back(drx + r + seg.tr[k])
                    P.off.push_back(-(r + seg.tr[k]))
                    P.w.push_back(seg.w[k])
    return _pairs_out(&P)


cdef Grading _plain_alpha(double hmin, double alpha):
    cdef Grading r = _plain(hmin)
    r.has_alpha = True
    r.alpha = alpha
    return r
