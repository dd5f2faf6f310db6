import json
import os
import subprocess
import sys

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from numpy.polynomial import legendre as npleg

from frl.constants import FracParams
from frl.operator import DomainGeometry
from frl.quadrature import DomainError
from frl.solver import (
    SpectralFunction,
    assemble_stiffness,
    boundary_trace,
    gradient_term,
    interior_residuals,
    l2_norm,
    legendre_diff,
    mass_matrix,
    solve_dirichlet,
    solve_eigen,
)

from conftest import one


@pytest.fixture(scope="module")
def torsion16():
    P, dom = FracParams.make(1, 0.75), DomainGeometry()
    return P, solve_dirichlet(one, P, dom, 16)


def test_stiffness_and_mass_spd():
    P, dom = FracParams.make(1, 0.75), DomainGeometry()
    K, info = assemble_stiffness(P, dom, 10, return_info=True)
    M = mass_matrix(P, dom, 10)
    assert info["asymmetry"] < 1e-10
    assert np.all(np.linalg.eigvalsh(K) > 0)
    assert np.all(np.linalg.eigvalsh(M) > 0)


def test_stiffness_matches_energy_form():
    from frl.operator import bilinear_form

    P, dom = FracParams.make(1, 0.75), DomainGeometry()
    K = assemble_stiffness(P, dom, 4)
    c = np.array([0.3, -0.2, 0.5, 0.1])
    u = SpectralFunction(tuple(c), 0.75, dom)
    assert c @ K @ c == pytest.approx(bilinear_form(u, u, P, dom).value, rel=1e-8)


def test_torsion_residuals_and_symmetry(torsion16):
    P, u = torsion16
    res = u.diagnostics["residuals"]["residual"]
    assert max(res) < 1e-2
    # even right-hand side on a symmetric domain: odd coefficients vanish
    assert np.max(np.abs(u.c[1::2])) < 1e-10
    tr = boundary_trace(u)
    assert tr[0] == pytest.approx(tr[1], rel=1e-10) and tr[0] > 0


def test_torsion_residual_drops_with_n():
    P, dom = FracParams.make(1, 0.75), DomainGeometry()
    r = [max(interior_residuals(solve_dirichlet(one, P, dom, n, residuals=False), one, P, [0, -0.5, 0.5])
             ["residual"]) for n in (8, 24)]
    assert r[1] < r[0] / 2


def test_eigen_self_convergence():
    P, dom = FracParams.make(1, 0.75), DomainGeometry()
    l16 = solve_eigen(P, dom, 16)[0].lam
    l32 = solve_eigen(P, dom, 32)[0].lam
    assert abs(l16 - l32) / l32 <= 5e-3
    assert l32 == pytest.approx(0.80243, abs=1e-4)


def test_eigenpairs_normalised_and_ordered():
    P, dom = FracParams.make(1, 0.75), DomainGeometry()
    pairs = solve_eigen(P, dom, 12, 3)
    lams = [p.lam for p in pairs]
    assert lams == sorted(lams)
    for p in pairs:
        assert l2_norm(p.eigenfunction, P, dom) == pytest.approx(1.0, rel=1e-10)
    # first eigenfunction positive at the centre
    assert pairs[0].eigenfunction(0.0)[0] > 0
    with pytest.raises(DomainError):
        solve_eigen(P, dom, 3, 4)


def test_ball_eigenvalue_above_interval():
    # the unit ball in 2D has a larger first eigenvalue than the unit interval
    s = 0.75
    l1 = solve_eigen(FracParams.make(1, s), DomainGeometry(), 12)[0].lam
    l2 = solve_eigen(FracParams.make(2, s), DomainGeometry("ball", 2), 12)[0].lam
    assert l2 > l1 > 0


def test_dimension_mismatch_rejected():
    with pytest.raises(DomainError):
        assemble_stiffness(FracParams.make(2, 0.75), DomainGeometry(), 4)


def test_json_round_trip(torsion16):
    _, u = torsion16
    d = json.loads(u.to_json())
    assert d["schema"] == 1 and d["basis_degree"] == 16
    v = SpectralFunction.from_dict(d)
    x = np.linspace(-0.9, 0.9, 7)
    assert np.array_equal(u(x), v(x))


def test_gradient_term_against_finite_difference(torsion16):
    _, u = torsion16
    x = np.array([-0.6, 0.2, 0.5])
    h = 1e-6
    fd = x * (u(x + h) - u(x - h)) / (2 * h)
    assert np.allclose(gradient_term(u, x), fd, rtol=1e-6, atol=1e-9)


@settings(max_examples=40, deadline=None)
@given(c=st.lists(st.floats(-2, 2), min_size=1, max_size=12),
       x=st.floats(-0.99, 0.99), h=st.floats(-0.5, 0.5))
def test_legendre_diff_equals_difference(c, x, h):
    c = np.array(c)
    xa, ha = np.array([x]), np.array([h])
    direct = npleg.legval(x + h, c) - npleg.legval(x, c)
    assert legendre_diff(c, xa, ha)[0] == pytest.approx(direct, abs=1e-12 * (1 + np.sum(np.abs(c))))


def _stiffness_bytes(threads):
    code = ("import numpy as np, sys; from frl.constants import FracParams; from frl.operator import DomainGeometry;"
            "from frl.solver import assemble_stiffness;"
            "K = assemble_stiffness(FracParams.make(1, 0.75), DomainGeometry(), 8);"
            "sys.stdout.write(K.tobytes().hex())")
    env = dict(os.environ, FRL_THREADS=str(threads))
    return subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True).stdout


def test_threads_bit_identical(monkeypatch):
    import frl.solver as solver

    # small chunks so several threads actually share the work
    monkeypatch.setattr(solver, "CHUNK", 5000)
    P, dom = FracParams.make(1, 0.75), DomainGeometry()
    monkeypatch.setenv("FRL_THREADS", "1")
    K1 = assemble_stiffness(P, dom, 8)
    monkeypatch.setenv("FRL_THREADS", "4")
    K4 = assemble_stiffness(P, dom, 8)
    assert np.array_equal(K1, K4)


def test_threads_bit_identical_across_processes():
    assert _stiffness_bytes(1) == _stiffness_bytes(3)
