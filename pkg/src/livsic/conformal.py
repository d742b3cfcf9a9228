"""Distortion of linear maps along sub-bundles and invariant conformal structures.

Distortion of a linear map on a subspace E measured in a metric g is the ratio
of its extreme singular values in g-orthonormal coordinates.  A conformal
structure on E^s is a field of det-1 quadratic forms; the derivative acts on
it by the normalized pushforward

    f_# g = |det M|^{2/k} M^{-T} g M^{-1},      M = Df|E^s : E^s_x -> E^s_{fx}.

Stable bundles of toral automorphisms are handled in the frame coordinates of
``ToralAutomorphism.stable_basis``; there the derivative is the constant
``stable_block`` and A^n B_s = B_s M_s^n holds exactly, which avoids forming
A^n in floating point.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree

from .errors import CoverageTooCoarse, OrbitBudgetExceeded, SingularRestriction
from .periodic import count_minimal, enumerate_periodic
from .solver import COVERAGE_FACTOR, grid_neighbours, grid_points
from .torus import PerturbedToral, ToralAutomorphism, TorusPoint, estimate_splitting

SINGULAR_RATIO = 1e-14


# ---------------------------------------------------------------------------
# distortion
# ---------------------------------------------------------------------------
def _chol_upper(g: np.ndarray) -> np.ndarray:
    """L with g = L^T L, so that |v|_g = |L v|."""
    return np.linalg.cholesky(np.asarray(g, dtype=float)).T


def restricted_singular_values(Df, E=None, g=None, g_out=None) -> np.ndarray:
    """Singular values of Df restricted to span(E), from metric g to metric g_out."""
    Df = np.asarray(Df, dtype=float)
    d = Df.shape[1]
    E = np.eye(d) if E is None else np.asarray(E, dtype=float).reshape(d, -1)
    g = np.eye(d) if g is None else g
    g_out = g if g_out is None else g_out
    L_in = _chol_upper(g)
    L_out = _chol_upper(g_out)
    _, R = np.linalg.qr(L_in @ E)
    M = L_out @ Df @ E @ np.linalg.inv(R)
    return np.linalg.svd(M, compute_uv=False)


def distortion(Df, E=None, g=None, g_out=None) -> float:
    """K = sigma_max / sigma_min of Df on span(E) in the metric g (target metric g_out, default g)."""
    s = restricted_singular_values(Df, E, g, g_out)
    if s[-1] <= SINGULAR_RATIO * s[0]:
        raise SingularRestriction(f"restricted map is singular (sigma ratio {s[-1] / s[0]:.2e})")
    return float(s[0] / s[-1])


def distortion_sampled(Df, E=None, g=None, n_dirs: int = 4096, rng: np.random.Generator | None = None) -> float:
    """max_v |Df v|_g / min_v |Df v|_g over sampled g-unit vectors v in E."""
    Df = np.asarray(Df, dtype=float)
    d = Df.shape[1]
    E = np.eye(d) if E is None else np.asarray(E, dtype=float).reshape(d, -1)
    g = np.eye(d) if g is None else g
    rng = rng or np.random.default_rng(0)
    c = rng.standard_normal((n_dirs, E.shape[1]))
    V = c @ E.T
    norm_in = np.sqrt(np.einsum("ni,ij,nj->n", V, g, V))
    W = V @ Df.T
    norm_out = np.sqrt(np.einsum("ni,ij,nj->n", W, g, W))
    ratio = norm_out / norm_in
    return float(ratio.max() / ratio.min())


def matrix_distortion(A) -> float:
    s = np.linalg.svd(np.asarray(A, dtype=float), compute_uv=False)
    return float(s[0] / s[-1])


def metric_condition(g1, g2) -> float:
    """Mutual condition number of two metrics: ratio of extreme eigenvalues of g1^{-1} g2."""
    w = np.linalg.eigvals(np.linalg.solve(g1, g2)).real
    return float(w.max() / w.min())


# ---------------------------------------------------------------------------
# quadratic forms
# ---------------------------------------------------------------------------
def _normalize_det(g: np.ndarray) -> np.ndarray:
    k = g.shape[-1]
    g = 0.5 * (g + np.swapaxes(g, -1, -2))
    det = np.linalg.det(g)
    return g / (det ** (1.0 / k))[..., None, None]


def pushforward_form(M, g) -> np.ndarray:
    """|det M|^{2/k} M^{-T} g M^{-1}, renormalized to determinant 1."""
    M = np.asarray(M, dtype=float)
    g = np.asarray(g, dtype=float)
    k = M.shape[-1]
    s = np.linalg.svd(M, compute_uv=False)
    if np.any(s[..., -1] <= SINGULAR_RATIO * s[..., 0]):
        raise SingularRestriction("pushforward by a singular fiber map")
    Minv = np.linalg.inv(M)
    out = np.swapaxes(Minv, -1, -2) @ g @ Minv
    out = out * (np.abs(np.linalg.det(M)) ** (2.0 / k))[..., None, None]
    return _normalize_det(out)


def spd_sqrt_inv(g: np.ndarray) -> np.ndarray:
    w, V = np.linalg.eigh(g)
    return (V * (1.0 / np.sqrt(w))[..., None, :]) @ np.swapaxes(V, -1, -2)


def spd_distance(g1, g2) -> np.ndarray | float:
    """Affine-invariant distance |log(g1^{-1/2} g2 g1^{-1/2})|_F."""
    g1 = np.asarray(g1, dtype=float)
    g2 = np.asarray(g2, dtype=float)
    s = spd_sqrt_inv(g1)
    w = np.linalg.eigvalsh(s @ g2 @ s)
    out = np.sqrt(np.sum(np.log(w) ** 2, axis=-1))
    return float(out) if out.ndim == 0 else out


def random_spd(k: int, rng: np.random.Generator, spread: float = 1.0) -> np.ndarray:
    """Random det-1 SPD matrix exp(S) with S symmetric, trace-free."""
    S = rng.standard_normal((k, k)) * spread
    S = 0.5 * (S + S.T)
    S -= np.trace(S) / k * np.eye(k)
    w, V = np.linalg.eigh(S)
    return _normalize_det((V * np.exp(w)) @ V.T)


# ---------------------------------------------------------------------------
# distortion growth
# ---------------------------------------------------------------------------
@dataclass
class DistortionReport:
    K_per_n: list
    Kbar_estimate: float
    slope: float
    C_per: float
    uniform_bound_observed: float
    subcocycle_max_ratio: float
    metric: str
    fiber_dim: int

    def as_dict(self) -> dict:
        return dict(self.__dict__)


def _frame_metric(sys: ToralAutomorphism, metric: str) -> np.ndarray:
    k = sys.dim_s
    if metric == "eigen":
        return np.eye(k)
    Bs = sys.stable_basis
    return Bs.T @ Bs


def _fit_slope(K: list[float]) -> float:
    n = np.arange(1, len(K) + 1)
    return float(np.polyfit(n, np.log(K), 1)[0])


def _periods_present(sys: ToralAutomorphism, n_max: int, cap: int) -> list[int]:
    """Minimal periods up to n_max that occur: enumerated when affordable, else from the Möbius counts."""
    try:
        return sorted({o.period for o in enumerate_periodic(sys, n_max, cap=cap)})
    except OrbitBudgetExceeded:
        return [n for n in range(1, n_max + 1) if count_minimal(sys, n) > 0]


def _linear_K(sys: ToralAutomorphism, N: int, G: np.ndarray) -> list[float]:
    M = sys.stable_block
    k = M.shape[0]
    out = []
    P = np.eye(k)
    for _ in range(N):
        P = M @ P
        P = P / np.linalg.norm(P, 2)
        out.append(distortion(P, g=G) if k > 1 else 1.0)
    return out


def _perturbed_K(pert: PerturbedToral, N: int, points: np.ndarray, n_iter: int = 30) -> np.ndarray:
    """K(f^n, x) for n = 1..N at each point, in orthonormal frames of the estimated E^s."""
    out = np.ones((len(points), N))
    for i, x in enumerate(points):
        split = estimate_splitting(pert, x, n_iter)
        Q, _ = np.linalg.qr(split.stable)
        if Q.shape[1] == 1:
            continue
        y = np.array(x, dtype=float)
        P = np.eye(Q.shape[1])
        for n in range(N):
            W = pert.derivative(y[None])[0] @ Q
            Q2, R = np.linalg.qr(W)
            P = R @ P
            P = P / np.linalg.norm(P, 2)
            Q = Q2
            y = pert.map(y[None])[0]
            out[i, n] = matrix_distortion(P)
    return out


def distortion_growth(system, N: int, metric: str = "background", grid_res: int = 4, n_max_per: int = 6, cap: int = 5000) -> DistortionReport:
    """K_{g,E^s}(f^n) for n <= N, its growth rate, the periodic bound C_per and a sub-cocycle check.

    ``metric`` is 'background' (the ambient Euclidean metric restricted to
    E^s) or 'eigen' (the metric making the stable frame orthonormal); only
    linear systems have the eigen option.
    """
    if isinstance(system, ToralAutomorphism):
        G = _frame_metric(system, metric)
        K = _linear_K(system, N, G)
        M = system.stable_block
        k = M.shape[0]
        # sub-cocycle K(M^{m+n}) <= K(M^m) K(M^n), sampled on all m + n <= N
        worst = 0.0
        for m in range(1, N):
            for n in range(1, N - m + 1):
                worst = max(worst, K[m + n - 1] / (K[m - 1] * K[n - 1]))
        C_per = 1.0
        if k > 1:
            periods = _periods_present(system, n_max_per, cap)
            for p in periods:
                C_per = max(C_per, distortion(np.linalg.matrix_power(M, p), g=G))
        fiber = k
    elif isinstance(system, PerturbedToral):
        pts = grid_points(system.dim, grid_res)
        Kx = _perturbed_K(system, N, pts)
        K = list(Kx.max(axis=0))
        worst = 0.0
        for m in range(1, N):
            for n in range(1, N - m + 1):
                # the bound uses K(f^m, f^n x); for a grid maximum it reads K_max(m+n) <= K_max(m) K_max(n)
                worst = max(worst, K[m + n - 1] / (K[m - 1] * K[n - 1]))
        C_per = float("nan")
        fiber = system.base.dim_s
    else:
        raise TypeError("expected a ToralAutomorphism or PerturbedToral")
    slope = _fit_slope(K) if fiber > 1 else 0.0
    return DistortionReport(
        K_per_n=[float(v) for v in K],
        Kbar_estimate=float(max(1.0, math.exp(slope))),
        slope=slope,
        C_per=float(C_per),
        uniform_bound_observed=float(max(K)),
        subcocycle_max_ratio=float(worst),
        metric=metric,
        fiber_dim=fiber,
    )


def subcocycle_check(system: ToralAutomorphism, m: int, n: int, x: np.ndarray, metric: str = "background") -> tuple[float, float]:
    """(K(f^{m+n}, x), K(f^m, f^n x) K(f^n, x)) with the bundle metric transported along the orbit."""
    G = _frame_metric(system, metric)
    M = system.stable_block
    Mn = np.linalg.matrix_power(M, n)
    Mm = np.linalg.matrix_power(M, m)
    lhs = distortion(Mm @ Mn, g=G)
    rhs = distortion(Mm, g=G) * distortion(Mn, g=G)
    return lhs, rhs


# ---------------------------------------------------------------------------
# matrix propositions
# ---------------------------------------------------------------------------
def random_orthogonal(n: int, rng: np.random.Generator) -> np.ndarray:
    Q, R = np.linalg.qr(rng.standard_normal((n, n)))
    return Q * np.sign(np.diag(R))


def metric_props_check(n_samples: int = 10_000, rng: np.random.Generator | None = None, dims=(2, 3, 4)) -> dict:
    """Battery for: K(A) = 1 implies A / |det A|^{1/n} orthogonal; |A| <= |det A|^{1/n} K(A)."""
    rng = rng or np.random.default_rng(0)
    orth_defect = 0.0
    min_slack = math.inf
    violations = 0
    for i in range(n_samples):
        n = dims[i % len(dims)]
        c = math.exp(rng.uniform(-2, 2))
        A = c * random_orthogonal(n, rng)
        Ah = A / abs(np.linalg.det(A)) ** (1.0 / n)
        orth_defect = max(orth_defect, float(np.abs(Ah.T @ Ah - np.eye(n)).max()))
        B = rng.standard_normal((n, n)) * np.exp(rng.uniform(-2, 2))
        s = np.linalg.svd(B, compute_uv=False)
        if s[-1] <= SINGULAR_RATIO * s[0]:
            continue
        lhs = s[0]
        rhs = abs(np.linalg.det(B)) ** (1.0 / n) * s[0] / s[-1]
        slack = (rhs - lhs) / lhs
        min_slack = min(min_slack, slack)
        if slack < -1e-12:
            violations += 1
    return {
        "n_samples": n_samples,
        "orthogonal_max_defect": orth_defect,
        "determinant_min_slack": float(min_slack),
        "determinant_violations": violations,
    }


# ---------------------------------------------------------------------------
# periodic conformality
# ---------------------------------------------------------------------------
def scalar_defect(M: np.ndarray) -> float:
    """min over gamma of |M - gamma Id|_F / |M|_F (attained at gamma = tr M / k)."""
    k = M.shape[0]
    gamma = np.trace(M) / k
    return float(np.linalg.norm(M - gamma * np.eye(k)) / np.linalg.norm(M))


def periodic_conformality_check(sys: ToralAutomorphism, n_max: int, metric: str = "eigen") -> list[dict]:
    """Per minimal period N <= n_max: scalar defect and conformality defect K(Df^N|E^s) - 1.

    For a linear system Df^N|E^s is the same at every point of every orbit of
    period N, so one entry per period carries the number of orbits it covers.
    """
    G = _frame_metric(sys, metric)
    M = sys.stable_block
    k = M.shape[0]
    out = []
    for N in range(1, n_max + 1):
        n_orbits = count_minimal(sys, N) // N
        if n_orbits == 0:
            continue
        P = np.linalg.matrix_power(M, N)
        if k == 1:
            sd, cd = 0.0, 0.0
        else:
            sd = scalar_defect(P)
            cd = distortion(P, g=G) - 1.0
        out.append({"period": N, "n_orbits": n_orbits, "scalar_defect": sd, "conformality_defect": cd})
    return out


# ---------------------------------------------------------------------------
# invariant conformal structure
# ---------------------------------------------------------------------------
@dataclass
class QuadraticFormField:
    fiber_dim: int
    frame: np.ndarray
    orbit_points: np.ndarray
    orbit_forms: np.ndarray
    grid_res: int
    grid_points: np.ndarray
    grid_forms: np.ndarray
    coverage_radius: float
    orbit_residual: float
    grid_residual: float
    holder_quotient: float
    seed_distance_track: list
    growth: dict
    hypothesis_scalar_defect: float
    extra: dict = field(default_factory=dict)

    def summary(self) -> dict:
        return {
            "fiber_dim": self.fiber_dim,
            "orbit_length": int(len(self.orbit_points)),
            "grid_res": self.grid_res,
            "coverage_radius": self.coverage_radius,
            "orbit_residual": self.orbit_residual,
            "grid_residual": self.grid_residual,
            "holder_quotient": self.holder_quotient,
            "seed_distance_first": self.seed_distance_track[0] if self.seed_distance_track else None,
            "seed_distance_last": self.seed_distance_track[-1] if self.seed_distance_track else None,
            "growth": self.growth,
            "hypothesis_scalar_defect": self.hypothesis_scalar_defect,
        }

    def forms_json(self) -> list:
        iu = np.triu_indices(self.fiber_dim)
        return [[float(v) for v in g[iu]] for g in self.grid_forms]


def pushforward_operator(M: np.ndarray) -> np.ndarray:
    """Matrix of S -> |det M|^{2/k} M^{-T} S M^{-1} on symmetric k x k matrices (orthonormal Sym basis)."""
    k = M.shape[0]
    basis = []
    for i in range(k):
        for j in range(i, k):
            E = np.zeros((k, k))
            if i == j:
                E[i, i] = 1.0
            else:
                E[i, j] = E[j, i] = 1 / math.sqrt(2)
            basis.append(E)
    Minv = np.linalg.inv(M)
    c = abs(np.linalg.det(M)) ** (2.0 / k)
    cols = [[np.sum(B2 * (c * Minv.T @ B @ Minv)) for B2 in basis] for B in basis]
    return np.array(cols).T


def form_growth(M: np.ndarray, N: int) -> dict:
    """Measured growth of |f_#^l| on the form bundle: log-norms and their regression slope."""
    T = pushforward_operator(M)
    P = np.eye(len(T))
    logs = []
    for _ in range(N):
        P = T @ P
        logs.append(float(math.log(np.linalg.norm(P, 2))))
    slope = float(np.polyfit(np.arange(1, N + 1), logs, 1)[0]) if N > 1 else 0.0
    return {"log_norms": logs, "slope": slope}


def eigen_metric(sys: ToralAutomorphism) -> np.ndarray:
    """The form making the stable frame orthonormal, in frame coordinates."""
    return np.eye(sys.dim_s)


def build_conformal_structure(
    sys: ToralAutomorphism,
    grid_res: int,
    L: int,
    seed_form: np.ndarray | None = None,
    base_point: TorusPoint | None = None,
    seed: int = 0,
    alpha: float = 1.0,
    growth_steps: int = 40,
) -> QuadraticFormField:
    """Propagate a seed form along the two-sided orbit of x* and extend by nearest sample.

    Forms are in the coordinates of the stable frame; the fiber map is the
    stable block M and g_{f^{n+1} x*} = f_# g_{f^n x*}.
    """
    k = sys.dim_s
    M = sys.stable_block
    if base_point is None:
        rng = np.random.default_rng(seed)
        base_point = TorusPoint.fixed(rng.random(sys.dim), sys.bits_for(L))
    if seed_form is None:
        seed_form = eigen_metric(sys)
    g0 = _normalize_det(np.asarray(seed_form, dtype=float))
    fwd = sys.orbit(base_point, L)
    bwd = sys.orbit(base_point, L, backward=True)
    pts = np.concatenate([bwd[::-1], fwd[1:]])
    forms = np.empty((2 * L + 1, k, k))
    forms[L] = g0
    Minv = np.linalg.inv(M)
    for j in range(L):
        forms[L + j + 1] = pushforward_form(M, forms[L + j])
        forms[L - j - 1] = pushforward_form(Minv, forms[L - j])
    if k == 1:
        forms[:] = 1.0
    orbit_res = float(np.max(spd_distance(pushforward_form(np.broadcast_to(M, forms[:-1].shape), forms[:-1]), forms[1:])))

    tree = cKDTree(pts % 1.0, boxsize=1.0)
    Y = grid_points(sys.dim, grid_res)
    dist, idx = tree.query(Y)
    coverage = float(dist.max())
    if coverage > COVERAGE_FACTOR * math.sqrt(sys.dim) / grid_res:
        raise CoverageTooCoarse(f"coverage radius {coverage:.3g} too coarse for grid {grid_res}")
    gforms = forms[idx]
    _, fidx = tree.query((Y @ sys.A.T) % 1.0)
    grid_res_val = float(np.max(spd_distance(pushforward_form(np.broadcast_to(M, gforms.shape), gforms), forms[fidx])))
    a, b = grid_neighbours(sys.dim, grid_res)
    hq = float(np.max(spd_distance(gforms[a], gforms[b])) * grid_res**alpha)

    target = eigen_metric(sys)
    track = [float(v) for v in spd_distance(np.broadcast_to(target, forms[L:].shape), forms[L:])]
    growth = form_growth(M, growth_steps) if k > 1 else {"log_norms": [], "slope": 0.0}
    hyp = max((e["scalar_defect"] for e in periodic_conformality_check(sys, 6)), default=0.0)
    return QuadraticFormField(
        fiber_dim=k,
        frame=sys.stable_basis,
        orbit_points=pts,
        orbit_forms=forms,
        grid_res=grid_res,
        grid_points=Y,
        grid_forms=gforms,
        coverage_radius=coverage,
        orbit_residual=orbit_res,
        grid_residual=grid_res_val,
        holder_quotient=hq,
        seed_distance_track=track,
        growth=growth,
        hypothesis_scalar_defect=hyp,
    )


# ---------------------------------------------------------------------------
# uniform distortion experiment
# ---------------------------------------------------------------------------
def normalized_rho(M: np.ndarray, G: np.ndarray) -> float:
    """rho with rho^2 = max(|M_hat|, |M_hat^{-1}|) in the metric G, M_hat = M / |det M|^{1/k}."""
    k = M.shape[0]
    L = _chol_upper(G)
    Mh = M / abs(np.linalg.det(M)) ** (1.0 / k)
    T = L @ Mh @ np.linalg.inv(L)
    return math.sqrt(max(np.linalg.norm(T, 2), np.linalg.norm(np.linalg.inv(T), 2)))


def stable_modulus_ratio(sys: ToralAutomorphism) -> float:
    w = np.sort(np.abs(np.linalg.eigvals(sys.stable_block)))
    return float(w[-1] / w[0])


def uniform_distortion_experiment(sys: ToralAutomorphism, N: int = 40, alpha: float = 1.0, n_max_per: int = 6) -> dict:
    """Growth of K_{g,E^s}(f^n) in the background metric, with the periodic bound and condition ii).

    A regression slope of log K against n near 0 means bounded distortion; a
    positive slope is the growth rate, predicted by the ratio of stable
    eigenvalue moduli for diagonalizable linear systems.
    """
    rep = distortion_growth(sys, N, metric="background", n_max_per=n_max_per)
    G = _frame_metric(sys, "background")
    k = sys.dim_s
    rho = normalized_rho(sys.stable_block, G) if k > 1 else 1.0
    margin = math.log(rho) + alpha * math.log(sys.lam)
    predicted = math.log(stable_modulus_ratio(sys)) if k > 1 else 0.0
    return {
        "N": N,
        "K_per_n": rep.K_per_n,
        "slope": rep.slope,
        "predicted_slope": predicted,
        "C_per": rep.C_per,
        "Kbar_estimate": rep.Kbar_estimate,
        "uniform_bound_observed": rep.uniform_bound_observed,
        "rho": rho,
        "condition_ii_margin": margin,
        "condition_ii_holds": margin < 0,
        "bounded": rep.slope <= 0.01,
        "fiber_dim": k,
    }
