import warnings

import numpy as np
import pytest

from livsic.cocycles import SuspensionGenerator, TrigTerm, coboundary_from, constant, holder_kinked, trig_smooth
from livsic.errors import CoverageTooCoarse
from livsic.fixtures import sl2_potential, so3_potential
from livsic.lie_groups import MatrixGroup, rho_matrix_norm
from livsic.solver import (
    HyperbolicityWarning,
    check_obstruction,
    flow_recovery_error,
    grid_neighbours,
    grid_points,
    holder_slope,
    recovery_error,
    solve_transfer,
    solve_transfer_flow,
    uniqueness_gap,
)
from livsic.torus import TorusPoint

SL2 = MatrixGroup("SL", 2)


class Biased:
    """exp(c B) times another generator; breaks the periodic obstruction by c."""

    def __init__(self, gen, c, name="H"):
        self.gen = gen
        self.group = gen.group
        self.alpha = gen.alpha
        self.bias = self.group.exp(c * self.group.basis(name))

    def eval(self, X):
        return self.bias @ self.gen.eval(X)

    def eval_inv(self, X):
        return self.group.inv(self.eval(X))


@pytest.fixture(scope="module")
def psi():
    return sl2_potential()


@pytest.fixture(scope="module")
def eta(cat, psi):
    return coboundary_from(psi, cat)


def test_grid_helpers():
    pts = grid_points(2, 4)
    assert pts.shape == (16, 2) and pts.min() == 0.125
    a, b = grid_neighbours(2, 4)
    assert len(a) == 32
    assert np.allclose(np.abs(((pts[a] - pts[b]) + 0.5) % 1 - 0.5).sum(axis=1), 0.25)


def test_obstruction_vanishes_for_coboundary(cat, eta):
    rep = check_obstruction(cat, eta, 8)
    assert rep.vanishes and rep.max_defect <= 1e-9
    assert rep.max_defect == max(d for _, _, d in rep.per_orbit)
    assert rep.conjugation_defect <= 1e-9


def test_obstruction_flags_constant(cat):
    g = SL2.exp(0.3 * SL2.basis("E"))
    rep = check_obstruction(cat, constant(SL2, g), 4)
    assert not rep.vanishes
    fixed = [d for i, p, d in rep.per_orbit if p == 1][0]
    assert fixed == SL2.dist(g, np.eye(2))


def test_obstruction_bias_sweep(cat, eta):
    fixed = {}
    for c in (1e-3, 1e-2):
        rep = check_obstruction(cat, Biased(eta, c), 4)
        fixed[c] = rep.per_orbit[0][2]
        for _, period, d in rep.per_orbit:
            assert d <= 4 * period * c
    assert fixed[1e-2] / fixed[1e-3] == pytest.approx(10, rel=0.01)


def test_identity_generator_gives_identity(cat):
    sol = solve_transfer(cat, constant(SL2, np.eye(2)), 16, 400)
    assert np.array_equal(sol.grid_values, np.broadcast_to(np.eye(2), sol.grid_values.shape))
    assert sol.residual == 0.0


def test_propagation_identity(cat, eta):
    sol = solve_transfer(cat, eta, 32, 800, seed=3)
    assert sol.orbit_residual <= 1e-9
    assert len(sol.orbit_n) == 1601


def test_recovery_up_to_constant(cat, eta, psi):
    sol = solve_transfer(cat, eta, 32, 2000, seed=1)
    err, g = recovery_error(sol, psi)
    assert err <= 5 * sol.coverage_radius
    assert np.linalg.det(g) == pytest.approx(1.0)


def test_coverage_shrinks_with_length(cat, eta):
    covs = [solve_transfer(cat, eta, 32, L, seed=2).coverage_radius for L in (500, 1000, 2000, 4000)]
    assert all(b < a for a, b in zip(covs, covs[1:]))


def test_residual_improves_on_ladder(cat, eta):
    res = [solve_transfer(cat, eta, 32, L, seed=4).residual for L in (1000, 2000, 4000)]
    assert all(b <= 1.1 * a for a, b in zip(res, res[1:]))


def test_coverage_too_coarse(cat, eta):
    with pytest.raises(CoverageTooCoarse):
        solve_transfer(cat, eta, 64, 10)


def test_uniqueness_right_translation(cat, eta):
    h = SL2.exp(0.4 * SL2.basis("F"))
    s1 = solve_transfer(cat, eta, 32, 800, seed=5)
    s2 = solve_transfer(cat, eta, 32, 800, seed=5, base_value=h)
    g, gap = uniqueness_gap(s1, s2)
    assert np.allclose(g, h, atol=1e-12) and gap <= 1e-9


def test_uniqueness_independent_bases(cat, eta):
    s1 = solve_transfer(cat, eta, 32, 2000, seed=6)
    s2 = solve_transfer(cat, eta, 32, 2000, seed=7)
    _, gap = uniqueness_gap(s1, s2)
    assert gap <= 10 * (s1.coverage_radius + s2.coverage_radius)


def test_uniqueness_identity_generator(cat):
    gen = constant(SL2, np.eye(2))
    _, gap = uniqueness_gap(solve_transfer(cat, gen, 16, 300, seed=1), solve_transfer(cat, gen, 16, 300, seed=2))
    assert gap == 0.0


def test_obstruction_failure_blocks_convergence(cat):
    # compact target: a biased SL(2) cocycle grows too fast to propagate in floats
    eta = coboundary_from(so3_potential(), cat)
    biased = Biased(eta, 0.05, "Lz")
    res = [solve_transfer(cat, biased, 32, L, seed=1).residual for L in (1000, 4000)]
    assert res[1] > 0.5 * res[0] and res[1] > 0.02


def test_hyperbolicity_warning(cat):
    big = trig_smooth(SL2, [TrigTerm((1, 0), "E", 3.0), TrigTerm((0, 1), "F", 3.0)])
    with pytest.warns(HyperbolicityWarning):
        solve_transfer(cat, coboundary_from(big, cat), 16, 400)


def test_localization_matches_group_report(cat, eta):
    sol = solve_transfer(cat, eta, 16, 400)
    rep = rho_matrix_norm(eta, grid_points(2, 64), cat.lam)
    assert sol.localization["rho"] == rep.rho and sol.localization["margin"] == rep.margin


@pytest.mark.parametrize("alpha", [0.5, 0.75])
def test_holder_slope_diagnostic(cat, alpha):
    psi = holder_kinked(SL2, [TrigTerm((1, 0), "E", 0.3), TrigTerm((0, 1), "H", 0.2, 0.4)], alpha)
    sol = solve_transfer(cat, coboundary_from(psi, cat), 64, 16000, seed=1)
    assert holder_slope(sol) >= alpha - 0.15


def test_log_blend_option(cat, eta, psi):
    plain = solve_transfer(cat, eta, 32, 2000, seed=1)
    blended = solve_transfer(cat, eta, 32, 2000, seed=1, blend=True)
    assert recovery_error(blended, psi)[0] <= 1.5 * recovery_error(plain, psi)[0]


def test_flow_zero_generator(cat):
    sol = solve_transfer_flow(cat, SuspensionGenerator.zero(SL2), 8, 100, n_slices=2)
    assert np.array_equal(sol.grid_values, np.broadcast_to(np.eye(2), sol.grid_values.shape))


def test_flow_recovery(cat):
    psi = trig_smooth(SL2, [TrigTerm((1, 0), "E", 0.2), TrigTerm((0, 1), "F", 0.1)])
    sgen = SuspensionGenerator.flow_coboundary(cat, psi)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", HyperbolicityWarning)
        sol = solve_transfer_flow(cat, sgen, 16, 400, n_slices=2, dt=1e-2)
    assert sol.orbit_residual <= 1e-9
    assert flow_recovery_error(sol, sgen.potential) <= 5 * sol.coverage_radius
