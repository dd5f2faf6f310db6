"""Kernel dispatch: compiled extension when importable, pure Python otherwise.

Set ``FRL_BACKEND=python`` to force the fallback.  Both paths produce the
same nodes and weights bit for bit (same arithmetic in the same order).
"""
from __future__ import annotations

import os

_impl = None
if os.environ.get("FRL_BACKEND", "").lower() != "python":
    try:
        from . import _kernels as _impl  # type: ignore[attr-defined,no-redef]
    except ImportError:  # pragma: no cover - depends on the build
        _impl = None

BACKEND = "compiled" if _impl is not None else "python"


def segment_rule(length, left, right, breaks, order, sigma, max_panel, break_depth=0.0):
    from .quadrature import SegmentRule, _segment_rule_py

    if _impl is not None:
        return SegmentRule(*_impl.segment_rule(length, left, right, breaks, order, sigma, max_panel, break_depth))
    return _segment_rule_py(length, left, right, breaks, order, sigma, max_panel, break_depth)


def inner_rules(odl, odr, breaks, L, diag_alpha, alpha_lo, alpha_hi, singular_lo, order, sigma, max_panel, depth):
    if _impl is not None:
        return _impl.inner_rules(
            odl, odr, breaks, L, diag_alpha, alpha_lo, alpha_hi, singular_lo, order, sigma, max_panel, depth
        )
    from .quadrature import _inner_rules_py

    return _inner_rules_py(odl, odr, breaks, L, diag_alpha, alpha_lo, alpha_hi, singular_lo, order, sigma, max_panel, depth)


def pv_rules(odl, odr, breaks, L, diag_alpha, order, sigma, max_panel, depth):
    if _impl is not None:
        return _impl.pv_rules(odl, odr, breaks, L, diag_alpha, order, sigma, max_panel, depth)
    from .operator import _pv_rules_py

    return _pv_rules_py(odl, odr, breaks, L, diag_alpha, order, sigma, max_panel, depth)
