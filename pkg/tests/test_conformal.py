import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from livsic.conformal import (
    build_conformal_structure,
    distortion,
    distortion_growth,
    distortion_sampled,
    form_growth,
    metric_condition,
    metric_props_check,
    periodic_conformality_check,
    pushforward_form,
    random_orthogonal,
    random_spd,
    spd_distance,
    stable_modulus_ratio,
    subcocycle_check,
    uniform_distortion_experiment,
)
from livsic.errors import SingularRestriction
from livsic.fixtures import companion, search_conformal_quartics
from livsic.torus import build_perturbed


def rot(t):
    return np.array([[math.cos(t), -math.sin(t)], [math.sin(t), math.cos(t)]])


def test_distortion_trivial():
    assert distortion(3.0 * np.eye(3)) == pytest.approx(1.0)
    assert distortion(np.diag([2.0, 1.0])) == pytest.approx(2.0)
    assert distortion(np.diag([5.0, 2.0, 1.0]), E=np.eye(3)[:, 1:]) == pytest.approx(2.0)
    with pytest.raises(SingularRestriction):
        distortion(np.diag([1.0, 0.0]))


def test_distortion_matches_sampling(rng):
    for _ in range(20):
        A = rng.standard_normal((3, 3))
        g = random_spd(3, rng, 0.3)
        exact = distortion(A, g=g)
        sampled = distortion_sampled(A, g=g, n_dirs=200_000, rng=rng)
        assert sampled <= exact * (1 + 1e-12)
        assert sampled >= exact * 0.9


def test_distortion_reciprocity(rng):
    for _ in range(200):
        A = rng.standard_normal((3, 3))
        g = random_spd(3, rng, 0.5)
        h = random_spd(3, rng, 0.5)
        # K_g(f, x) with metrics g at x and h at f x equals K of the inverse with the roles swapped
        assert distortion(A, g=g, g_out=h) == pytest.approx(distortion(np.linalg.inv(A), g=h, g_out=g), rel=1e-9)


def test_metric_change_bound(rng):
    for _ in range(200):
        A = rng.standard_normal((2, 2))
        g1, g2 = random_spd(2, rng, 0.5), random_spd(2, rng, 0.5)
        C = metric_condition(g1, g2)
        k1, k2 = distortion(A, g=g1), distortion(A, g=g2)
        assert k2 / C <= k1 * (1 + 1e-10) and k1 <= C * k2 * (1 + 1e-10)


def test_props_examples():
    A = 3 * rot(0.7)
    Ah = A / abs(np.linalg.det(A)) ** 0.5
    assert np.abs(Ah.T @ Ah - np.eye(2)).max() <= 1e-12
    D = np.diag([2.0, 1.0])
    assert np.linalg.norm(D, 2) <= abs(np.linalg.det(D)) ** 0.5 * distortion(D)


def test_props_battery():
    rep = metric_props_check(2000, np.random.default_rng(11))
    assert rep["orthogonal_max_defect"] <= 1e-12
    assert rep["determinant_violations"] == 0


def test_pushforward_trivial(rng):
    g = random_spd(3, rng)
    assert np.allclose(pushforward_form(2.5 * np.eye(3), g), g, atol=1e-12)
    # an isometry of g: g^{-1/2} Q g^{1/2}
    w, V = np.linalg.eigh(g)
    gh = (V * np.sqrt(w)) @ V.T
    M = np.linalg.inv(gh) @ random_orthogonal(3, rng) @ gh
    assert np.allclose(pushforward_form(M, g), g, atol=1e-10)


def well_conditioned(rng, k, spread=1.0):
    # roundoff in f_# scales with the condition number, so draw Q diag(e^s) Q'
    return random_orthogonal(k, rng) @ np.diag(np.exp(rng.uniform(-spread, spread, k))) @ random_orthogonal(k, rng)


def test_pushforward_functorial(rng):
    for _ in range(50):
        A, B = well_conditioned(rng, 3), well_conditioned(rng, 3)
        g = random_spd(3, rng)
        two = pushforward_form(B, pushforward_form(A, g))
        one = pushforward_form(B @ A, g)
        assert spd_distance(one, two) <= 1e-10


def test_pushforward_keeps_det_one(conf4, rng):
    # fiber maps of bounded distortion: the conformal stable block and a near-isometry
    for M in (conf4.stable_block, well_conditioned(rng, 2, 0.01)):
        g = random_spd(2, rng)
        for _ in range(200):
            g = pushforward_form(M, g)
            assert abs(np.linalg.det(g) - 1) <= 1e-12


@given(st.integers(0, 10_000))
def test_spd_distance_affine_invariant(seed):
    rng = np.random.default_rng(seed)
    a, b = random_spd(3, rng), random_spd(3, rng)
    X = well_conditioned(rng, 3, spread=2.0)
    assert spd_distance(a, b) == pytest.approx(spd_distance(X.T @ a @ X, X.T @ b @ X), rel=1e-7, abs=1e-9)
    assert spd_distance(a, b) == pytest.approx(spd_distance(b, a), rel=1e-9)
    assert spd_distance(a, a) <= 1e-12


def test_conformal_quartic_search():
    hits = search_conformal_quartics()
    assert hits[0] == (-1, 3)
    roots = np.roots([1, -1, 3, -1, 1])
    stable = roots[np.abs(roots) < 1]
    assert len(stable) == 2 and abs(stable[0].imag) > 0


def test_one_dimensional_fiber(cat):
    rep = distortion_growth(cat, 10)
    assert rep.K_per_n == [1.0] * 10 and rep.slope == 0.0
    assert all(e["scalar_defect"] == 0 and e["conformality_defect"] == 0 for e in periodic_conformality_check(cat, 4))
    field = build_conformal_structure(cat, 8, 2000)
    assert np.all(field.grid_forms == 1.0) and field.grid_residual == 0.0
    exp = uniform_distortion_experiment(cat, 20)
    assert exp["slope"] == 0.0 and exp["bounded"]


def test_complex_pair_bounded_in_eigen_metric(conf4):
    rep = distortion_growth(conf4, 40, metric="eigen")
    assert max(rep.K_per_n) <= 1 + 1e-9
    bg = distortion_growth(conf4, 40, metric="background")
    # closed form: M^n = r^n R(n theta) in the eigen frame, so the background K is bounded
    # by the condition number of the frame metric
    G = conf4.stable_basis.T @ conf4.stable_basis
    w = np.linalg.eigvalsh(G)
    assert max(bg.K_per_n) <= w[-1] / w[0] * (1 + 1e-9)
    assert all(k >= 1 for k in bg.K_per_n) and bg.Kbar_estimate >= 1


def test_diag_kbar_matches_spectrum(diag4):
    rep = distortion_growth(diag4, 40)
    assert rep.Kbar_estimate == pytest.approx(stable_modulus_ratio(diag4), rel=0.05)
    assert rep.subcocycle_max_ratio <= 1 + 1e-10


def test_subcocycle_inequality(diag4, conf4, rng):
    for sys in (diag4, conf4):
        for _ in range(50):
            m, n = (int(v) for v in rng.integers(1, 20, size=2))
            lhs, rhs = subcocycle_check(sys, m, n, rng.random(4))
            assert lhs <= rhs * (1 + 1e-10)


def test_periodic_conformality(conf4, diag4):
    conf = periodic_conformality_check(conf4, 6)
    assert all(e["conformality_defect"] <= 1e-9 for e in conf)
    assert all(e["scalar_defect"] > 1e-6 for e in conf)
    diag = periodic_conformality_check(diag4, 4)
    assert all(e["conformality_defect"] > 0.1 for e in diag)
    assert sum(e["n_orbits"] * e["period"] for e in diag if e["period"] == 1) >= 1


def test_perturbed_distortion(cat):
    pert = build_perturbed(cat, [{"freq": [1, 0], "amp": [1.0, 0.0]}], 1e-3)
    rep = distortion_growth(pert, 5, grid_res=3)
    assert rep.K_per_n == [1.0] * 5


def test_eigen_seed_is_invariant(conf4):
    field = build_conformal_structure(conf4, 8, 3000)
    assert field.orbit_residual <= 1e-9
    assert field.grid_residual <= 1e-9
    for g in field.grid_forms:
        assert abs(np.linalg.det(g) - 1) <= 1e-10
        w = np.linalg.eigvalsh(g)
        assert w.min() >= 1e-8 and w.max() <= 1e8


def test_random_seed_distance_along_orbit(conf4, rng):
    # the stable block is an isometry of the form bundle for this system, so the
    # distance to the eigen metric stays constant rather than shrinking
    field = build_conformal_structure(conf4, 8, 3000, seed_form=random_spd(2, rng))
    track = np.array(field.seed_distance_track)
    assert np.ptp(track) <= 1e-9 * max(1.0, track[0])


def test_form_growth_rate(conf4, diag4):
    assert abs(form_growth(conf4.stable_block, 40)["slope"]) <= 1e-3
    assert form_growth(diag4.stable_block, 40)["slope"] > 0.3


def test_uniform_distortion_contrast(conf4, diag4):
    c = uniform_distortion_experiment(conf4, 40)
    d = uniform_distortion_experiment(diag4, 40)
    assert c["slope"] <= 0.01 and c["bounded"]
    assert d["slope"] == pytest.approx(d["predicted_slope"], rel=0.1)


def test_companion_matrix():
    assert companion([1, -1, 3, -1]) == [[0, 1, 0, 0], [0, 0, 1, 0], [0, 0, 0, 1], [-1, 1, -3, 1]]
