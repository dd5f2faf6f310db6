"""Compiled vs pure-Python rule builders.

    python benchmarks/bench_kernels.py [--repeat 3]

Times the three builders on workloads of the size used by the solver and
the identity assembly, checks that both backends return identical arrays,
and times one stiffness assembly end to end with each backend.
"""
import argparse
import time

import numpy as np

from frl import _backend
from frl.constants import FracParams
from frl.operator import DomainGeometry, _pv_rules_py
from frl.quadrature import EndGrading, _inner_rules_py, _segment_rule_py
from frl.solver import assemble_stiffness


def best_of(fn, repeat):
    best = float("inf")
    out = None
    for _ in range(repeat):
        t = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t)
    return best, out


def identical(a, b):
    return all(np.array_equal(x, y) for x, y in zip(a, b))


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--n", type=int, default=16, help="basis size for the assembly timing")
    args = ap.parse_args()
    if _backend._impl is None:
        raise SystemExit("compiled kernels are not built; run pip install -e . --no-build-isolation")
    K = _backend._impl
    s = 0.75
    x = np.cos(np.pi * (np.arange(400) + 0.5) / 400)
    dl, dr = x + 1.0, 1.0 - x
    brk = (0.25, 1.0, 1.75)
    seg_args = (2.0, EndGrading(2e-14, 1.0 - 2 * s), EndGrading(2e-14, None), brk, 12, 0.3, 0.25, 1e-10)
    inner_args = (dl, dr, brk, 2.0, 1.0 - 2 * s, 1.0 - 2 * s, 1.0 - 2 * s, True, 12, 0.3, 0.25, 1e-14)
    pv_args = (dl, dr, brk, 2.0, 1.0 - 2 * s, 12, 0.3, 0.25, 1e-14)
    rows = []
    for name, py, cy, a in (
        ("segment_rule", lambda a: _segment_rule_py(*a), lambda a: K.segment_rule(*a), seg_args),
        ("inner_rules (400 outer nodes)", lambda a: _inner_rules_py(*a), lambda a: K.inner_rules(*a), inner_args),
        ("pv_rules (400 points)", lambda a: _pv_rules_py(*a), lambda a: K.pv_rules(*a), pv_args),
    ):
        tp, rp = best_of(lambda: py(a), args.repeat)
        tc, rc = best_of(lambda: cy(a), args.repeat)
        rows.append((name, tp, tc, identical(rp, rc)))

    P, dom = FracParams.make(1, s), DomainGeometry()
    tc, Kc = best_of(lambda: assemble_stiffness(P, dom, args.n), 1)
    saved = _backend._impl
    _backend._impl = None
    try:
        tp, Kp = best_of(lambda: assemble_stiffness(P, dom, args.n), 1)
    finally:
        _backend._impl = saved
    rows.append((f"assemble_stiffness n={args.n}", tp, tc, bool(np.array_equal(Kp, Kc))))

    print(f"{'workload':34s} {'python [s]':>11s} {'compiled [s]':>13s} {'speedup':>8s}  identical")
    for name, tp, tc, same in rows:
        print(f"{name:34s} {tp:11.4f} {tc:13.4f} {tp / tc:8.1f}  {same}")


if __name__ == "__main__":
    main()
