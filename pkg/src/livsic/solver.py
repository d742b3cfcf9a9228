"""Periodic obstructions and the transfer-function solver.

The transfer function is built by propagating a base value along a two-sided
orbit of a base point x*,

    phi(f^n x*) = Phi(x*, n) phi(x*),

and extended to a grid by nearest orbit sample in the torus metric.  The
quality of the extension is measured, not assumed: the coverage radius is the
largest distance from a grid cell to its nearest sample.
"""

from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.spatial import cKDTree

from .circle import DiffGroup
from .cocycles import Generator, SuspensionGenerator, _flow_raw, flow_cocycle, flow_localization
from .errors import CoverageTooCoarse, PrecisionExhausted
from .lie_groups import MatrixGroup, rho_matrix_norm
from .periodic import enumerate_periodic
from .torus import ToralAutomorphism, TorusPoint, torus_distance

log = logging.getLogger(__name__)

OBSTRUCTION_TOL = 1e-8
COVERAGE_FACTOR = 8.0


class HyperbolicityWarning(UserWarning):
    pass


# ---------------------------------------------------------------------------
# obstruction
# ---------------------------------------------------------------------------
@dataclass
class ObstructionReport:
    n_max: int
    per_orbit: list
    max_defect: float
    tol: float
    verdict: str
    worst_orbit: int | None
    conjugation_defect: float

    @property
    def vanishes(self) -> bool:
        return self.verdict == "vanishes"

    def as_dict(self) -> dict:
        return {
            "n_max": self.n_max,
            "n_orbits": len(self.per_orbit),
            "max_defect": self.max_defect,
            "tol": self.tol,
            "verdict": self.verdict,
            "worst_orbit": self.worst_orbit,
            "conjugation_defect": self.conjugation_defect,
            "per_orbit": [{"id": i, "period": p, "defect": d} for i, p, d in self.per_orbit],
        }


def check_obstruction(sys: ToralAutomorphism, gen: Generator, n_max: int, tol: float = OBSTRUCTION_TOL, cap: int | None = None) -> ObstructionReport:
    """Phi(p, period) against the identity at one point of every periodic orbit up to n_max.

    Conjugation invariance Phi(f p, N) = eta(p) Phi(p, N) eta(p)^{-1} is
    spot-checked at the second point of each orbit.
    """
    orbits = enumerate_periodic(sys, n_max, **({"cap": cap} if cap else {}))
    g = gen.group
    per_orbit = []
    conj = 0.0
    e = g.identity()
    for i, orb in enumerate(orbits):
        pts = orb.floats()
        N = orb.period
        vals = gen.eval(pts)
        phi_p = g.chain(vals)[-1]
        defect = float(g.dist(phi_p, e))
        per_orbit.append((i, N, defect))
        if N > 1:
            rolled = [vals[(j + 1) % N] for j in range(N)] if isinstance(vals, list) else np.roll(vals, -1, axis=0)
            phi_fp = g.chain(rolled)[-1]
            expect = g.mul(g.mul(vals[0], phi_p), g.inv(vals[0]))
            conj = max(conj, float(g.dist(phi_fp, expect)))
    max_defect = max((d for _, _, d in per_orbit), default=0.0)
    worst = max(per_orbit, key=lambda t: t[2])[0] if per_orbit else None
    verdict = "vanishes" if max_defect <= tol else "fails"
    return ObstructionReport(n_max, per_orbit, max_defect, tol, verdict, worst if verdict == "fails" else None, conj)


# ---------------------------------------------------------------------------
# grids
# ---------------------------------------------------------------------------
def grid_points(dim: int, res: int) -> np.ndarray:
    """Cell centres of the res^dim grid, C order."""
    axis = (np.arange(res) + 0.5) / res
    return np.stack(np.meshgrid(*([axis] * dim), indexing="ij"), axis=-1).reshape(-1, dim)


def grid_neighbours(dim: int, res: int) -> tuple[np.ndarray, np.ndarray]:
    """Index pairs of axis-adjacent cells (periodic)."""
    idx = np.arange(res**dim).reshape((res,) * dim)
    a, b = [], []
    for ax in range(dim):
        a.append(idx.ravel())
        b.append(np.roll(idx, -1, axis=ax).ravel())
    return np.concatenate(a), np.concatenate(b)


def _take(vals, idx):
    if isinstance(vals, list):
        return [vals[i] for i in idx]
    return vals[idx]


def _concat(a, b):
    if isinstance(a, list):
        return a + b
    return np.concatenate([a, b])


# ---------------------------------------------------------------------------
# solution container
# ---------------------------------------------------------------------------
@dataclass
class TransferSolution:
    base_point: TorusPoint
    base_value: object
    orbit_n: np.ndarray
    orbit_points: np.ndarray
    orbit_values: object
    grid_res: int
    grid_points: np.ndarray
    grid_values: object
    cell_coverage: np.ndarray
    coverage_radius: float
    residual: float
    orbit_residual: float
    holder_quotient: float
    group: object
    alpha: float
    localization: dict
    metric: Callable
    gen: object = None
    sys: object = None
    extra: dict = field(default_factory=dict)
    _tree: cKDTree | None = None

    def evaluate(self, points: np.ndarray):
        """Nearest-orbit-sample value at arbitrary points."""
        _, idx = self._tree.query(np.atleast_2d(points) % 1.0)
        return _take(self.orbit_values, idx)

    def residual_with(self, metric: Callable) -> float:
        """Invariance residual over the grid measured with another metric."""
        return float(np.max(_invariance_defects(self, metric)))

    def summary(self) -> dict:
        out = {
            "base_point": [float(v) for v in self.base_point.float],
            "orbit_length": int(len(self.orbit_n)),
            "grid_res": self.grid_res,
            "coverage_radius": self.coverage_radius,
            "residual": self.residual,
            "orbit_residual": self.orbit_residual,
            "holder_quotient": self.holder_quotient,
            "alpha": self.alpha,
            "localization": self.localization,
        }
        out.update({k: v for k, v in self.extra.items() if isinstance(v, (int, float, str, bool, dict, list))})
        return out


def _invariance_defects(sol: TransferSolution, metric: Callable) -> np.ndarray:
    g = sol.group
    Y = sol.grid_points
    fY = (Y @ sol.sys.A.T) % 1.0
    lhs = sol.evaluate(fY)
    rhs = g.mul(sol.gen.eval(Y), sol.grid_values)
    return np.asarray(metric(lhs, rhs), dtype=float)


# ---------------------------------------------------------------------------
# solver
# ---------------------------------------------------------------------------
def default_base_point(dim: int, seed: int, bits: int) -> TorusPoint:
    rng = np.random.default_rng(seed)
    return TorusPoint.fixed(rng.random(dim), bits)


def _orbit_pair(sys: ToralAutomorphism, x: TorusPoint, L: int):
    fwd = sys.orbit(x, L)
    bwd = sys.orbit(x, L, backward=True)
    return fwd, bwd


def solve_transfer(
    sys: ToralAutomorphism,
    gen: Generator,
    grid_res: int,
    L: int,
    base_point: TorusPoint | None = None,
    base_value=None,
    seed: int = 0,
    precision_bits: int | None = None,
    metric: Callable | None = None,
    blend: bool = False,
    sample_res: int = 64,
) -> TransferSolution:
    """Two-sided propagation along the orbit of x*, nearest-sample extension to the grid."""
    g = gen.group
    metric = metric or g.dist
    bits = precision_bits or sys.bits_for(L)
    if base_point is None:
        base_point = default_base_point(sys.dim, seed, bits)
    elif base_point.mode == "fixed" and base_point.bits < bits and precision_bits is None:
        base_point = TorusPoint(tuple(k << (bits - base_point.bits) for k in base_point.exact), "fixed", bits)
    if base_point.mode == "fixed" and L * sys.bits_per_step > base_point.bits - 64:
        raise PrecisionExhausted(f"orbit length {L} needs more than {base_point.bits} bits")
    if base_value is None:
        base_value = g.identity()

    loc = _localization(sys, gen, sample_res)
    if not loc.get("holds_hyperbolicity", True):
        msg = f"hyperbolicity condition fails: margin {loc['margin']:.4g} >= 0; solving anyway"
        warnings.warn(msg, HyperbolicityWarning, stacklevel=2)

    fwd, bwd = _orbit_pair(sys, base_point, L)
    ftab = g.chain(gen.eval(fwd[:L]))
    btab = g.chain(gen.eval_inv(bwd[1:]))
    fvals = g.mul(ftab, _repeat(base_value, L + 1))
    bvals = g.mul(btab, _repeat(base_value, L + 1))
    # table order: n = -L..L
    n = np.arange(-L, L + 1)
    pts = np.concatenate([bwd[::-1], fwd[1:]])
    vals = _concat(_reverse(bvals), _take(fvals, range(1, L + 1)))

    # exact propagation identity along the table
    # exact propagation identity along the table (subsampled for list-valued groups)
    check = np.arange(2 * L)
    if isinstance(vals, list) and len(check) > 256:
        check = np.unique(np.linspace(0, 2 * L - 1, 256).astype(int))
    orbit_res = float(
        np.max(metric(_take(vals, check + 1), g.mul(gen.eval(pts[check]), _take(vals, check))))
    )

    tree = cKDTree(pts % 1.0, boxsize=1.0)
    Y = grid_points(sys.dim, grid_res)
    dist, idx = tree.query(Y)
    coverage = float(dist.max())
    cell_diam = math.sqrt(sys.dim) / grid_res
    if coverage > COVERAGE_FACTOR * cell_diam:
        raise CoverageTooCoarse(f"coverage radius {coverage:.3g} exceeds {COVERAGE_FACTOR:g} cell diameters ({cell_diam:.3g})")
    if blend and isinstance(g, MatrixGroup):
        grid_vals = _log_blend(g, tree, pts, vals, Y)
    else:
        grid_vals = _take(vals, idx)

    sol = TransferSolution(
        base_point=base_point,
        base_value=base_value,
        orbit_n=n,
        orbit_points=pts,
        orbit_values=vals,
        grid_res=grid_res,
        grid_points=Y,
        grid_values=grid_vals,
        cell_coverage=dist,
        coverage_radius=coverage,
        residual=0.0,
        orbit_residual=orbit_res,
        holder_quotient=0.0,
        group=g,
        alpha=gen.alpha,
        localization=loc,
        metric=metric,
        gen=gen,
        sys=sys,
        _tree=tree,
    )
    sol.residual = float(np.max(_invariance_defects(sol, metric)))
    sol.holder_quotient = holder_quotient(sol)
    return sol


def _repeat(v, n):
    if isinstance(v, np.ndarray):
        return np.broadcast_to(v, (n,) + v.shape)
    return [v] * n


def _reverse(vals):
    if isinstance(vals, list):
        return vals[::-1]
    return vals[::-1]


def _localization(sys, gen, res: int) -> dict:
    if isinstance(gen.group, MatrixGroup):
        return rho_matrix_norm(gen, grid_points(sys.dim, res if sys.dim == 2 else 6), sys.lam).as_dict()
    if isinstance(gen.group, DiffGroup):
        from .circle import diffeo_hyperbolicity

        etas = gen.eval(grid_points(sys.dim, 16 if sys.dim == 2 else 4))
        rho1 = max(1.0, max(max(e.sup_derivative(1), e.inverse.sup_derivative(1)) for e in etas))
        rep = diffeo_hyperbolicity(rho1, 0.0, sys.lam, gen.alpha, gen.group.dist_order + 3)
        return {"rho": rho1, "metric_kind": "diffeo", "margin": rep["discrete_margin"], "holds_hyperbolicity": rep["discrete_holds"], **rep}
    return {"rho": 1.0, "metric_kind": "commutative", "margin": -math.inf, "holds_hyperbolicity": True}


def _log_blend(g: MatrixGroup, tree, pts, vals, Y):
    d, idx = tree.query(Y, k=2)
    a, b = vals[idx[:, 0]], vals[idx[:, 1]]
    w = d[:, 0] / np.maximum(d[:, 0] + d[:, 1], 1e-300)
    step = g.log(g.mul(g.inv(a), b))
    return g.mul(a, g.exp(w[:, None, None] * step))


def holder_quotient(sol: TransferSolution) -> float:
    """sup over adjacent grid cells of d_G(phi(y), phi(y')) / d(y, y')^alpha."""
    a, b = grid_neighbours(sol.sys.dim, sol.grid_res)
    h = 1.0 / sol.grid_res
    d = np.asarray(sol.metric(_take(sol.grid_values, a), _take(sol.grid_values, b)), dtype=float)
    return float(np.max(d) / h**sol.alpha)


def holder_slope(sol: TransferSolution, n_scales: int = 6) -> float:
    """Log-log slope of the typical d_G(phi(y), phi(y')) against d(y, y') over grid offsets.

    A soft diagnostic for the Hölder exponent of the recovered function.
    """
    res = sol.grid_res
    dim = sol.sys.dim
    shape = (res,) * dim
    scales, vals = [], []
    for j in range(n_scales):
        step = 1 << j
        if step >= res // 2:
            break
        idx = np.arange(res**dim).reshape(shape)
        b = np.roll(idx, -step, axis=0).ravel()
        d = np.asarray(sol.metric(_take(sol.grid_values, idx.ravel()), _take(sol.grid_values, b)), dtype=float)
        scales.append(step / res)
        vals.append(np.quantile(d, 0.99) + 1e-300)
    return float(np.polyfit(np.log(scales), np.log(vals), 1)[0])


def recovery_error(sol: TransferSolution, psi: Generator) -> tuple[float, object]:
    """sup over the grid of d_G(phi(y), psi(y) g) with g = psi(x*)^{-1} phi(x*)."""
    g = sol.group
    x0 = sol.base_point.float[None]
    gconst = g.mul(g.inv(psi.eval(x0)), _stack1(sol.base_value, g))
    pv = psi.eval(sol.grid_points)
    target = g.mul(pv, _repeat(_unstack(gconst), len(sol.grid_points)))
    d = np.asarray(sol.metric(sol.grid_values, target), dtype=float)
    return float(d.max()), _unstack(gconst)


def _stack1(v, g):
    if isinstance(v, np.ndarray):
        return v[None]
    return [v]


def _unstack(v):
    return v[0]


def uniqueness_gap(sol1: TransferSolution, sol2: TransferSolution, cells: np.ndarray | None = None):
    """(g, gap): g = phi1(y0)^{-1} phi2(y0) at the best-covered cell, gap = sup d(phi1 g, phi2)."""
    if sol1.grid_res != sol2.grid_res:
        raise ValueError("solutions live on different grids")
    grp = sol1.group
    combined = sol1.cell_coverage + sol2.cell_coverage
    y0 = int(np.argmin(combined))
    g = grp.mul(grp.inv(_take(sol1.grid_values, [y0])), _take(sol2.grid_values, [y0]))
    g = _unstack(g)
    sel = np.arange(len(combined)) if cells is None else np.asarray(cells)
    left = grp.mul(_take(sol1.grid_values, sel), _repeat(g, len(sel)))
    d = np.asarray(sol1.metric(left, _take(sol2.grid_values, sel)), dtype=float)
    return g, float(d.max())


# ---------------------------------------------------------------------------
# flows
# ---------------------------------------------------------------------------
def solve_transfer_flow(
    sys: ToralAutomorphism,
    sgen: SuspensionGenerator,
    grid_res: int,
    L: int,
    n_slices: int = 4,
    dt: float = 1e-2,
    base_point: TorusPoint | None = None,
    seed: int = 0,
    tol: float = 1e-6,
    alpha: float | None = None,
) -> TransferSolution:
    """Transfer function on the unit-roof suspension.

    The orbit table holds phi(x_n, s_j) for the base orbit x_n = f^n x*,
    n in [-L, L], and fiber heights s_j = j / n_slices.  Each fiber is
    integrated by RK4 (batched over the orbit), and the time-1 maps chain the
    fibers together.  The residual is measured with the time-1 map from each
    grid cell (y, s_j).
    """
    g = sgen.group
    alpha = sgen.alpha if alpha is None else alpha
    bits = sys.bits_for(L)
    if base_point is None:
        base_point = default_base_point(sys.dim, seed, bits)
    loc = flow_localization(sgen, grid_points(sys.dim, 16), sys.lam)
    loc["alpha"] = alpha
    if not loc["holds_hyperbolicity"]:
        warnings.warn(f"flow hyperbolicity condition fails: margin {loc['margin']:.4g} >= 0; solving anyway", HyperbolicityWarning, stacklevel=2)

    fwd, bwd = _orbit_pair(sys, base_point, L)
    pts = np.concatenate([bwd[::-1], fwd[1:]])  # x_n for n = -L..L
    heights = np.arange(n_slices) / n_slices
    # partial fibers U_n(s_j) = Phi((x_n, 0), s_j) and the time-1 maps eta1(x_n)
    M = len(pts)
    U = np.empty((n_slices, M, g.n, g.n))
    U[0] = np.eye(g.n)
    for j in range(1, n_slices):
        U[j] = flow_cocycle(sys, sgen, (pts, np.zeros(M)), heights[j], dt, tol)
    eta1 = flow_cocycle(sys, sgen, (pts, np.zeros(M)), 1.0, dt, tol)
    base = np.empty((M, g.n, g.n))
    base[L] = np.eye(g.n)
    for k in range(L):
        base[L + k + 1] = eta1[L + k] @ base[L + k]
        base[L - k - 1] = g.inv(eta1[L - k - 1]) @ base[L - k]
        if g.tag in ("SL", "SO") and (k + 1) % 64 == 0:
            base[L + k + 1] = g.project(base[L + k + 1])
            base[L - k - 1] = g.project(base[L - k - 1])
    vals = np.einsum("jmab,mbc->jmac", U, base)
    orbit_res = float(np.max(g.dist(base[1:], eta1[:-1] @ base[:-1])))

    tree = cKDTree(pts % 1.0, boxsize=1.0)
    Y = grid_points(sys.dim, grid_res)
    dist, idx = tree.query(Y)
    coverage = float(dist.max())
    if coverage > COVERAGE_FACTOR * math.sqrt(sys.dim) / grid_res:
        raise CoverageTooCoarse(f"coverage radius {coverage:.3g} too coarse for grid {grid_res}")
    grid_vals = vals[:, idx]  # (slices, cells, n, n)

    # residual with the time-1 map from every (y, s_j)
    worst = 0.0
    fY = (Y @ sys.A.T) % 1.0
    _, fidx = tree.query(fY)
    for j, s in enumerate(heights):
        T1 = _flow_raw(sys, sgen, Y, np.full(len(Y), s), 1.0, dt)
        lhs = vals[j, fidx]
        worst = max(worst, float(np.max(g.dist(lhs, T1 @ grid_vals[j]))))
    a, b = grid_neighbours(sys.dim, grid_res)
    hq = float(max(np.max(g.dist(grid_vals[j, a], grid_vals[j, b])) for j in range(n_slices)) * grid_res**alpha)

    sol = TransferSolution(
        base_point=base_point,
        base_value=np.eye(g.n),
        orbit_n=np.arange(-L, L + 1),
        orbit_points=pts,
        orbit_values=vals,
        grid_res=grid_res,
        grid_points=Y,
        grid_values=grid_vals,
        cell_coverage=dist,
        coverage_radius=coverage,
        residual=worst,
        orbit_residual=orbit_res,
        holder_quotient=hq,
        group=g,
        alpha=alpha,
        localization=loc,
        metric=g.dist,
        gen=sgen,
        sys=sys,
        _tree=tree,
    )
    sol.extra["heights"] = [float(s) for s in heights]
    sol.extra["dt"] = dt
    return sol


def flow_recovery_error(sol: TransferSolution, Psi: Callable) -> float:
    """sup over grid cells and heights of d_G(phi(y,s), Psi(y,s) g), g = Psi(x*,0)^{-1} phi(x*,0)."""
    g = sol.group
    x0 = sol.base_point.float[None]
    gconst = g.inv(Psi(x0, np.zeros(1)))[0] @ sol.base_value
    worst = 0.0
    for j, s in enumerate(sol.extra["heights"]):
        target = Psi(sol.grid_points, np.full(len(sol.grid_points), s)) @ gconst
        worst = max(worst, float(np.max(g.dist(sol.grid_values[j], target))))
    return worst
