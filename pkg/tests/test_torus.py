from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from livsic.errors import (
    EigenvalueOnUnitCircle,
    NoConvergence,
    NotUnimodular,
    PerturbationTooLarge,
    PrecisionExhausted,
)
from livsic.torus import (
    TorusPoint,
    adapted_norm,
    apply,
    build_perturbed,
    build_toral,
    estimate_splitting,
    stable_projection,
    torus_distance,
)

unit = st.floats(0, 1, exclude_max=True, allow_nan=False)
points2 = st.tuples(unit, unit)


def test_cat_stable_rate(cat):
    # oracle: smaller root of x^2 - 3x + 1
    assert cat.lam == pytest.approx((3 - np.sqrt(5)) / 2, abs=1e-12)
    assert cat.dim_s == 1 and cat.dim_u == 1


def test_parabolic_rejected():
    with pytest.raises(EigenvalueOnUnitCircle):
        build_toral([[1, 1], [0, 1]])


def test_non_unimodular_rejected():
    with pytest.raises(NotUnimodular):
        build_toral([[2, 0], [0, 1]])


def test_adapted_metric_contracts(cat, diag4, conf4, rng):
    for sys in (cat, diag4, conf4):
        c = rng.standard_normal((1000, sys.dim_s))
        v = c @ sys.stable_basis.T
        v /= adapted_norm(sys, v)[:, None]
        assert np.all(adapted_norm(sys, v @ sys.A.T) <= sys.lam + 1e-12)
        c = rng.standard_normal((1000, sys.dim_u))
        w = c @ sys.unstable_basis.T
        w /= adapted_norm(sys, w)[:, None]
        assert np.all(adapted_norm(sys, w @ sys.A_inv.T) <= sys.lam + 1e-12)


def test_fixed_point_of_origin(cat):
    x = TorusPoint.rational([0, 0])
    assert apply(cat, x, 5) == x


def test_rational_step(cat):
    y = apply(cat, TorusPoint.rational([Fraction(1, 5), Fraction(2, 5)]), 1)
    assert y.exact == (Fraction(4, 5), Fraction(3, 5))


@given(points2, st.integers(-40, 40))
def test_roundtrip_rational(cat, xy, n):
    x = TorusPoint.from_float(xy)
    assert apply(cat, apply(cat, x, n), -n) == x


@given(points2, st.integers(-100, 100))
def test_roundtrip_fixed(cat, xy, n):
    x = TorusPoint.fixed(xy)
    assert apply(cat, apply(cat, x, n), -n) == x


def test_float_mirror_agrees(cat):
    x = TorusPoint.fixed([0.123456789, 0.987654321])
    y = apply(cat, x, 80)
    exact = np.array([float(v) for v in y.as_fractions()])
    assert np.all(np.abs(((exact - y.float) + 0.5) % 1 - 0.5) <= 2.0**-50)


def test_fixed_budget(cat):
    x = TorusPoint.fixed([0.1, 0.2], bits=256)
    n_ok = cat.usable_steps(256)
    apply(cat, x, n_ok)
    with pytest.raises(PrecisionExhausted):
        apply(cat, x, n_ok + 1)
    with pytest.raises(PrecisionExhausted):
        cat.orbit(x, n_ok + 1)


def test_fixed_orbit_reproducible(cat):
    x = TorusPoint.fixed([0.3, 0.7], bits=cat.bits_for(200))
    a = cat.orbit(x, 200)
    b = cat.orbit(x, 200)
    assert np.array_equal(a, b)
    assert TorusPoint.fixed([0.3, 0.7], bits=512) == TorusPoint.fixed([0.3, 0.7], bits=512)


def test_orbit_matches_apply(cat):
    x = TorusPoint.rational([Fraction(1, 7), Fraction(3, 11)])
    orb = cat.orbit(x, 10)
    for k in (0, 3, 10):
        assert np.allclose(orb[k], apply(cat, x, k).float, atol=1e-15)
    back = cat.orbit(x, 4, backward=True)
    assert np.allclose(back[4], apply(cat, x, -4).float, atol=1e-15)


def test_distance_wraparound():
    assert torus_distance([0.1, 0.0], [0.9, 0.0]) == pytest.approx(0.2)
    assert torus_distance([0.3, 0.4], [0.3, 0.4]) == 0.0


@given(points2, points2, points2)
def test_distance_metric(x, y, z):
    dxy = torus_distance(x, y)
    assert dxy == pytest.approx(torus_distance(y, x), abs=1e-15)
    assert dxy <= np.sqrt(2) / 2 + 1e-15
    assert dxy <= torus_distance(x, z) + torus_distance(z, y) + 1e-12


@given(points2, points2)
def test_distance_lipschitz(cat, x, y):
    fx, fy = cat.step_float(np.array(x)), cat.step_float(np.array(y))
    assert torus_distance(fx, fy) <= np.linalg.norm(cat.A, 2) * torus_distance(x, y) + 1e-12


def test_projection_of_stable_vector(cat):
    v = cat.stable_basis[:, 0] * 0.7
    vs, vu = stable_projection(cat, v)
    assert np.allclose(vs, v, atol=1e-15) and np.allclose(vu, 0, atol=1e-15)


def test_projection_of_e1(cat):
    # oracle: solve [u s] c = e1 directly
    M = np.column_stack([cat.unstable_basis[:, 0], cat.stable_basis[:, 0]])
    c = np.linalg.solve(M, [1.0, 0.0])
    vs, vu = stable_projection(cat, [1.0, 0.0])
    assert np.allclose(vu, c[0] * M[:, 0]) and np.allclose(vs, c[1] * M[:, 1])


@given(st.lists(st.floats(-5, 5), min_size=4, max_size=4))
def test_projection_idempotent(diag4, v):
    vs, vu = stable_projection(diag4, v)
    assert np.allclose(vs + vu, v, atol=1e-12)
    vs2, vu2 = stable_projection(diag4, vs)
    assert np.allclose(vs2, vs, atol=1e-12) and np.allclose(vu2, 0, atol=1e-12)


def test_splitting_linear_case(cat):
    est = estimate_splitting(cat, [0.2, 0.3], 5)
    assert np.allclose(np.abs(est.stable[:, 0]), np.abs(cat.stable_basis[:, 0]), atol=1e-12)
    assert np.allclose(np.abs(est.unstable[:, 0]), np.abs(cat.unstable_basis[:, 0]), atol=1e-12)


SIN_TERM = [{"freq": [1, 0], "amp": [1.0, 0.0]}, {"freq": [0, 1], "amp": [0.0, 1.0], "phase": 0.3}]


def test_splitting_geometric_decay(cat):
    pert = build_perturbed(cat, SIN_TERM, 1e-3)
    est = estimate_splitting(pert, [0.2, 0.3], 14, tol=1e-6)
    h = np.array(est.history[:10])
    ratio = np.exp(np.polyfit(np.arange(len(h)), np.log(h), 1)[0])
    assert ratio == pytest.approx(cat.lam**2, rel=0.15)


def test_splitting_invariance(cat, rng):
    pert = build_perturbed(cat, SIN_TERM, 1e-3)
    for x in rng.random((100, 2)):
        est = estimate_splitting(pert, x, 20, tol=1e-9)
        nxt = estimate_splitting(pert, pert.map(x), 20, tol=1e-9)
        img = pert.derivative(x) @ est.stable
        img /= np.linalg.norm(img)
        b = nxt.stable[:, 0]
        sin = np.linalg.norm(img[:, 0] - (img[:, 0] @ b) * b)
        assert sin <= 10 * max(est.residual, nxt.residual) + 1e-12


def test_splitting_no_convergence(cat):
    pert = build_perturbed(cat, SIN_TERM, 5e-3)
    with pytest.raises(NoConvergence):
        estimate_splitting(pert, [0.1, 0.1], 2, tol=1e-14)


def test_perturbation_too_large(cat):
    with pytest.raises(PerturbationTooLarge):
        build_perturbed(cat, SIN_TERM, 0.5)
