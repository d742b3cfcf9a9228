"""Generators, discrete cocycles, suspension-flow cocycles and coboundaries.

A generator is a map eta: T^d -> G evaluated in batches: ``gen.eval(X)`` takes
an (N, d) array of points and returns the stacked group values (an array for
vector and matrix groups, a list for circle diffeomorphisms).  The cocycle is

    Phi(x, n) = eta(f^{n-1} x) ... eta(x)                 n >= 1
    Phi(x, 0) = Id
    Phi(x, n) = eta(f^n x)^{-1} ... eta(f^{-1} x)^{-1}     n <= -1

with base orbits computed in the exact ring of ``torus``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .errors import StepTooLarge
from .lie_groups import AdditiveGroup, MatrixGroup, parse_group
from .torus import ToralAutomorphism, TorusPoint, torus_distance

KINDS = ("trig_smooth", "holder_kinked", "coboundary", "constant")
MAX_DT = 1e-2


@dataclass(frozen=True)
class TrigTerm:
    """amp * sin(2 pi freq.x + phase) times a named algebra basis element."""

    freq: tuple
    basis: str
    amp: float
    phase: float = 0.0

    def as_dict(self) -> dict:
        return {"freq": list(self.freq), "basis": self.basis, "amp": self.amp, "phase": self.phase}


def _realize(group, v):
    """Algebra (or lift-coefficient) values -> group values."""
    if hasattr(group, "from_algebra"):
        return group.from_algebra(v)
    return group.exp(v)


class Generator:
    """A Hölder map eta: T^d -> G.

    kinds
      trig_smooth    exp(sum_t amp_t sin(2 pi k_t.x + phase_t) B_t)
      holder_kinked  exp(sum_t amp_t |sin(pi k_t.x + phase_t)|^alpha B_t)
      coboundary     psi(f x) psi(x)^{-1} for a potential generator psi
      constant       a fixed group element g
    """

    def __init__(
        self,
        group,
        kind: str,
        alpha: float = 1.0,
        terms: Sequence[TrigTerm] = (),
        value=None,
        potential: "Generator | None" = None,
        base: ToralAutomorphism | None = None,
        dim: int = 2,
    ):
        if kind not in KINDS:
            raise ValueError(f"unknown generator kind {kind!r}")
        if not 0 < alpha <= 1:
            raise ValueError("alpha must lie in (0, 1]")
        self.group = group
        self.kind = kind
        self.alpha = float(alpha)
        self.terms = tuple(terms)
        self.value = value
        self.potential = potential
        self.base = base
        self.dim = base.dim if base is not None else dim
        if kind == "coboundary" and (potential is None or base is None):
            raise ValueError("coboundary generator needs a potential and a base map")
        if kind == "constant" and value is None:
            raise ValueError("constant generator needs a value")

    def __repr__(self):
        return f"Generator({self.kind}, {self.group!r}, alpha={self.alpha})"

    # ------------------------------------------------------------------
    def coefficients(self, X: np.ndarray) -> np.ndarray:
        """Scalar coefficient fields c_t(X), shape (N, n_terms)."""
        X = np.atleast_2d(np.asarray(X, dtype=float))
        out = np.empty((len(X), len(self.terms)))
        for j, t in enumerate(self.terms):
            k = np.asarray(t.freq, dtype=float)
            if self.kind == "holder_kinked":
                out[:, j] = t.amp * np.abs(np.sin(math.pi * (X @ k) + t.phase)) ** self.alpha
            else:
                out[:, j] = t.amp * np.sin(2 * math.pi * (X @ k) + t.phase)
        return out

    def algebra(self, X: np.ndarray):
        """Algebra-valued field sum_t c_t(X) B_t for the trig kinds."""
        if self.kind not in ("trig_smooth", "holder_kinked"):
            raise ValueError(f"{self.kind} generator has no algebra field")
        c = self.coefficients(X)
        basis = np.array([self.group.basis(t.basis) for t in self.terms])
        if len(self.terms) == 0:
            zero = np.zeros_like(self.group.basis(self._any_basis_name()))
            return np.broadcast_to(zero, (len(c),) + zero.shape).copy()
        return np.tensordot(c, basis, axes=(1, 0))

    def _any_basis_name(self) -> str:
        g = self.group
        if isinstance(g, AdditiveGroup):
            return "e0"
        if isinstance(g, MatrixGroup):
            return "E01" if g.n > 1 else "E00"
        return "rot"

    def eval(self, X: np.ndarray):
        X = np.atleast_2d(np.asarray(X, dtype=float))
        if self.kind in ("trig_smooth", "holder_kinked"):
            return _realize(self.group, self.algebra(X))
        if self.kind == "constant":
            if isinstance(self.value, np.ndarray):
                return np.broadcast_to(self.value, (len(X),) + self.value.shape).copy()
            return [self.value] * len(X)
        fx = (X @ self.base.A.T) % 1.0
        return self.group.mul(self.potential.eval(fx), self.group.inv(self.potential.eval(X)))

    def eval_inv(self, X: np.ndarray):
        return self.group.inv(self.eval(X))

    def as_dict(self) -> dict:
        d = {"group": _group_name(self.group), "kind": self.kind, "alpha": self.alpha}
        if self.terms:
            d["coeffs"] = [t.as_dict() for t in self.terms]
        if self.kind == "constant":
            d["value"] = _value_to_json(self.value)
        if self.kind == "coboundary":
            d["potential"] = self.potential.as_dict()
        return d


def _group_name(group) -> str:
    if isinstance(group, AdditiveGroup):
        return f"R{group.k}"
    if isinstance(group, MatrixGroup):
        return "Heisenberg" if group.tag == "Heisenberg" else f"{group.tag}{group.n}"
    return "DiffS1"


def _value_to_json(v):
    if hasattr(v, "as_dict"):
        return v.as_dict()
    return np.asarray(v).tolist()


def trig_smooth(group, terms, alpha: float = 1.0, dim: int = 2) -> Generator:
    return Generator(group, "trig_smooth", alpha, [t if isinstance(t, TrigTerm) else TrigTerm(**t) for t in terms], dim=dim)


def holder_kinked(group, terms, alpha: float, dim: int = 2) -> Generator:
    return Generator(group, "holder_kinked", alpha, [t if isinstance(t, TrigTerm) else TrigTerm(**t) for t in terms], dim=dim)


def constant(group, value, dim: int = 2) -> Generator:
    return Generator(group, "constant", 1.0, value=value, dim=dim)


def coboundary_from(psi: Generator, sys: ToralAutomorphism) -> Generator:
    """eta(x) = psi(f x) psi(x)^{-1}; the cocycle telescopes to psi(f^n x) psi(x)^{-1}."""
    return Generator(psi.group, "coboundary", psi.alpha, potential=psi, base=sys)


def generator_from_config(spec: dict, sys: ToralAutomorphism | None = None) -> Generator:
    """Build a generator from the config grammar

    {group: "SL2", alpha: 1.0, kind: "trig", coeffs: [{freq: [1, 0], basis: "E", amp: 0.1}]}

    ``kind`` is one of trig / trig_smooth, holder / holder_kinked,
    coboundary (with a nested ``potential`` spec) or constant (with ``value``
    given as a matrix, or ``algebra`` as {basis: coefficient}).
    """
    group = parse_group(spec["group"])
    if "F" in spec or "R" in spec:
        from .circle import DiffGroup

        if not isinstance(group, DiffGroup):
            raise ValueError("F and R apply to Diff(S1) generators only")
        group = DiffGroup(int(spec.get("F", group.F)), int(spec.get("R", group.R)))
    dim = sys.dim if sys is not None else int(spec.get("dim", 2))
    kind = {"trig": "trig_smooth", "holder": "holder_kinked"}.get(spec.get("kind", "trig"), spec.get("kind", "trig"))
    alpha = float(spec.get("alpha", 1.0))
    terms = [
        TrigTerm(tuple(int(k) for k in c["freq"]), str(c["basis"]), float(c["amp"]), float(c.get("phase", 0.0)))
        for c in spec.get("coeffs", [])
    ]
    if kind in ("trig_smooth", "holder_kinked"):
        return Generator(group, kind, alpha, terms, dim=dim)
    if kind == "constant":
        if "algebra" in spec:
            v = sum(float(a) * group.basis(b) for b, a in spec["algebra"].items())
            value = _realize(group, np.asarray(v)[None])[0]
        else:
            value = np.asarray(spec["value"], dtype=float)
        return Generator(group, "constant", alpha, value=value, dim=dim)
    if kind == "coboundary":
        if sys is None:
            raise ValueError("coboundary generator needs the base system")
        inherit = {k: spec[k] for k in ("group", "F", "R") if k in spec}
        psi = generator_from_config(dict(spec["potential"], **inherit), sys)
        return coboundary_from(psi, sys)
    raise ValueError(f"unknown generator kind {kind!r}")


# ---------------------------------------------------------------------------
# discrete cocycle
# ---------------------------------------------------------------------------
def _as_point(x) -> TorusPoint:
    if isinstance(x, TorusPoint):
        return x
    return TorusPoint.from_float(np.asarray(x, dtype=float) % 1.0)


def cocycle_table(sys: ToralAutomorphism, gen: Generator, x, n: int):
    """(orbit floats, prefix products) for k = 0..|n| in the direction of n.

    ``table[k]`` is Phi(x, k) for n >= 0 and Phi(x, -k) for n < 0.
    """
    p = _as_point(x)
    if n >= 0:
        pts = sys.orbit(p, n)
        vals = gen.eval(pts[:n]) if n else None
    else:
        pts = sys.orbit(p, -n, backward=True)
        vals = gen.eval_inv(pts[1:])
    if n == 0:
        return pts, _identity_stack(gen.group)
    return pts, gen.group.chain(vals)


def _identity_stack(group):
    e = group.identity()
    if isinstance(e, np.ndarray):
        return e[None]
    return [e]


def cocycle_eval(sys: ToralAutomorphism, gen: Generator, x, n: int):
    """Phi(x, n) for any integer n."""
    _, table = cocycle_table(sys, gen, x, n)
    return table[-1] if isinstance(table, list) else table[-1].copy()


def coboundary_defect(sys: ToralAutomorphism, gen: Generator, x, n: int) -> float:
    """d_G(Phi(x,n), psi(f^n x) psi(x)^{-1}) for a coboundary generator."""
    if gen.kind != "coboundary":
        raise ValueError("not a coboundary generator")
    pts, table = cocycle_table(sys, gen, x, n)
    g = gen.group
    psi = gen.potential.eval(pts[[0, -1]])
    expect = g.mul(psi[1], g.inv(psi[0]))
    return float(g.dist(table[-1], expect))


# ---------------------------------------------------------------------------
# Hölder diagnostics
# ---------------------------------------------------------------------------
@dataclass(frozen=True)
class HolderReport:
    constant: float
    K: float
    alpha: float
    n_pairs: int


def near_pairs(dim: int, res: int, rng: np.random.Generator | None = None, n_sample: int = 20000):
    """Pairs of points at grid spacing 1/res.

    d = 2 (or any d with res^d <= 2^20): all axis-neighbour pairs of the full
    grid.  Larger grids: a stratified random sample of grid nodes, each paired
    with its axis neighbours.
    """
    h = 1.0 / res
    if res**dim <= 1 << 20:
        axes = [np.arange(res) * h] * dim
        P = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, dim)
    else:
        rng = rng or np.random.default_rng(0)
        P = rng.integers(0, res, size=(n_sample, dim)) * h
    A, B = [], []
    for i in range(dim):
        e = np.zeros(dim)
        e[i] = h
        A.append(P)
        B.append((P + e) % 1.0)
    return np.concatenate(A), np.concatenate(B)


def holder_constant(gen: Generator, alpha: float, grid: int, rng: np.random.Generator | None = None) -> HolderReport:
    """Empirical sup of d_G(eta(x), eta(y)) / d(x, y)^alpha over near pairs.

    Also returns K = sup d_G(eta(x) eta(y)^{-1}, Id) / d_G(eta(x), eta(y)).
    """
    X, Y = near_pairs(gen.dim, grid, rng)
    g = gen.group
    ex, ey = gen.eval(X), gen.eval(Y)
    dG = np.asarray(g.dist(ex, ey), dtype=float)
    dM = torus_distance(X, Y)
    const = float(np.max(dG / dM**alpha)) if len(dG) else 0.0
    lhs = np.asarray(g.dist(g.mul(ex, g.inv(ey)), _identity_like(g, len(X))), dtype=float)
    mask = dG > 1e-14
    K = float(np.max(lhs[mask] / dG[mask])) if np.any(mask) else 0.0
    return HolderReport(const, K, alpha, len(X))


def _identity_like(group, n):
    e = group.identity()
    if isinstance(e, np.ndarray):
        return np.broadcast_to(e, (n,) + e.shape)
    return [e] * n


# ---------------------------------------------------------------------------
# suspension flow
# ---------------------------------------------------------------------------
def smoothstep(s):
    s = np.asarray(s, dtype=float)
    return s**3 * (10 - 15 * s + 6 * s**2)


def smoothstep_prime(s):
    s = np.asarray(s, dtype=float)
    return 30 * s**2 * (1 - s) ** 2


@dataclass(frozen=True)
class SuspensionPoint:
    """(x, s) on the unit-roof suspension, s in [0, 1)."""

    x: TorusPoint
    s: float = 0.0


@dataclass(frozen=True)
class SuspensionFlow:
    """Unit-speed flow on T^d x [0,1] / (x,1) ~ (f x, 0)."""

    base: ToralAutomorphism

    def flow(self, point: SuspensionPoint, t: float) -> tuple[np.ndarray, float]:
        """Float position (x, s) of the flow at time t."""
        total = point.s + t
        k = math.floor(total)
        s = total - k
        if k >= 0:
            x = self.base.orbit(point.x, k)[-1]
        else:
            x = self.base.orbit(point.x, -k, backward=True)[-1]
        return x, s


class SuspensionGenerator:
    """Algebra-valued field eta(x, s) on the suspension, for matrix groups.

    ``fn(X, S)`` takes (N, d) base points and (N,) fiber heights and returns
    (N, n, n) algebra elements.
    """

    def __init__(self, group: MatrixGroup, fn: Callable, alpha: float = 1.0, label: str = "custom"):
        if not isinstance(group, MatrixGroup):
            raise ValueError("flow cocycles are implemented for matrix groups only")
        self.group = group
        self.fn = fn
        self.alpha = alpha
        self.label = label

    def __call__(self, X, S):
        X = np.atleast_2d(np.asarray(X, dtype=float))
        S = np.broadcast_to(np.asarray(S, dtype=float), (len(X),))
        return self.fn(X, S)

    @classmethod
    def zero(cls, group: MatrixGroup) -> "SuspensionGenerator":
        n = group.n
        return cls(group, lambda X, S: np.zeros((len(X), n, n)), label="zero")

    @classmethod
    def constant(cls, group: MatrixGroup, X0: np.ndarray) -> "SuspensionGenerator":
        X0 = np.asarray(X0, dtype=float)
        return cls(group, lambda X, S: np.broadcast_to(X0, (len(X),) + X0.shape).copy(), label="constant")

    @classmethod
    def interpolating(cls, gen: Generator) -> "SuspensionGenerator":
        """m'(s) log eta(x): integrates over each fiber to eta(x) when eta(x) commutes along the path.

        The path s -> exp(m(s) log eta(x)) has derivative m'(s) log eta(x)
        times itself, so the time-1 map from (x, 0) is exactly eta(x).
        """
        group = gen.group
        # the base points only change at fiber crossings, so cache log eta
        cache = {}

        def fn(X, S):
            key = X.tobytes()
            if key not in cache:
                if len(cache) > 8:
                    cache.clear()
                cache[key] = group.log(gen.eval(X))
            return smoothstep_prime(S)[:, None, None] * cache[key]

        return cls(group, fn, gen.alpha, label="interpolating")

    @classmethod
    def flow_coboundary(cls, sys: ToralAutomorphism, psi: Generator, h: float = 1e-6) -> "SuspensionGenerator":
        """Infinitesimal generator of Phi((x,s),t) = Psi(flow) Psi(x,s)^{-1}.

        Psi(x, s) = exp((1 - m(s)) a(x) + m(s) a(f x)) with a the algebra field
        of ``psi``; Psi(x, 1) = Psi(f x, 0) so Psi is continuous on the
        suspension.  eta = (dPsi/ds) Psi^{-1} by a central difference.
        """
        group = psi.group

        def Psi(X, S):
            fx = (X @ sys.A.T) % 1.0
            m = smoothstep(S)[:, None, None]
            return group.exp((1 - m) * psi.algebra(X) + m * psi.algebra(fx))

        def fn(X, S):
            dP = (Psi(X, S + h) - Psi(X, S - h)) / (2 * h)
            return dP @ group.inv(Psi(X, S))

        out = cls(group, fn, psi.alpha, label="flow_coboundary")
        out.potential = Psi
        return out


def _rk4_segment(sgen: SuspensionGenerator, X: np.ndarray, s0: np.ndarray, s1: np.ndarray, Phi: np.ndarray, dt: float, project):
    """Integrate Phi' = eta(x, s) Phi from s0 to s1 (per row) with steps <= dt."""
    span = s1 - s0
    m = np.maximum(np.ceil(span / dt - 1e-9).astype(int), 0)
    steps = int(m.max()) if len(m) else 0
    h = np.where(m > 0, span / np.maximum(m, 1), 0.0)
    s = s0.astype(float).copy()
    for j in range(steps):
        active = j < m
        hh = np.where(active, h, 0.0)[:, None, None]
        hs = np.where(active, h, 0.0)
        k1 = sgen(X, s) @ Phi
        mid = sgen(X, s + hs / 2)
        k2 = mid @ (Phi + hh / 2 * k1)
        k3 = mid @ (Phi + hh / 2 * k2)
        k4 = sgen(X, s + hs) @ (Phi + hh * k3)
        Phi = Phi + hh / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
        if project is not None:
            Phi = project(Phi)
        s = s + hs
    return Phi


def _flow_raw(sys, sgen, X0, s0, t, dt):
    """Batched flow cocycle from float starts (X0 (N,d), s0 (N,)) over time t >= 0."""
    group = sgen.group
    project = group.project if group.tag in ("SL", "SO") else None
    N = len(X0)
    Phi = np.broadcast_to(np.eye(group.n), (N, group.n, group.n)).copy()
    X = np.array(X0, dtype=float)
    s = np.array(s0, dtype=float)
    remaining = np.full(N, float(t))
    while np.any(remaining > 1e-15):
        seg_end = np.minimum(1.0, s + remaining)
        Phi = _rk4_segment(sgen, X, s, seg_end, Phi, dt, project)
        used = seg_end - s
        remaining = remaining - used
        wrap = (seg_end >= 1.0 - 1e-15) & (remaining > -1e-15)
        X = np.where(wrap[:, None], (X @ sys.A.T) % 1.0, X)
        s = np.where(wrap, 0.0, seg_end)
        remaining = np.where(remaining < 1e-15, 0.0, remaining)
    return Phi


def flow_cocycle(
    sys: ToralAutomorphism,
    sgen: SuspensionGenerator,
    start,
    t: float,
    dt: float = 1e-3,
    tol: float = 1e-6,
    check_error: bool = True,
) -> np.ndarray:
    """Phi((x,s), t) for Phi' = eta(f^t x) Phi, Phi(0) = Id, by classical RK4.

    ``start`` is a SuspensionPoint or a pair (X, S) of float arrays for a
    batch.  Steps are aligned with fiber crossings.  With ``check_error`` the
    run is repeated at 2 dt and the Richardson estimate |Phi_dt - Phi_2dt|/15
    must stay below ``tol``.
    """
    if dt > MAX_DT:
        raise StepTooLarge(f"dt={dt} exceeds the maximum step {MAX_DT}")
    if t < 0:
        raise ValueError("flow cocycles are integrated forward in time")
    batch = not isinstance(start, SuspensionPoint)
    if batch:
        X0, s0 = start
        X0 = np.atleast_2d(np.asarray(X0, dtype=float))
        s0 = np.broadcast_to(np.asarray(s0, dtype=float), (len(X0),)).copy()
    else:
        X0, s0 = start.x.float[None], np.array([start.s])
    Phi = _flow_raw(sys, sgen, X0, s0, t, dt)
    if check_error:
        coarse = _flow_raw(sys, sgen, X0, s0, t, 2 * dt)
        est = float(np.max(np.abs(Phi - coarse))) / 15.0
        if est > tol:
            raise StepTooLarge(f"embedded error estimate {est:.3e} exceeds tolerance {tol:.1e} at dt={dt}")
    return Phi if batch else Phi[0]


def flow_localization(sgen: SuspensionGenerator, sample_points: np.ndarray, lam: float, n_heights: int = 33):
    """Flow analogue of the localization report: rho = 2 max |eta(x,s)|, margin rho - alpha log(1/lam).

    |Phi((x,s),t)| and |Phi((x,s),t)^{-1}| are both at most exp(max|eta| t),
    so the transport operators grow at most like exp(rho t).  The suspension
    flow contracts at rate log(1/lam) per unit time.
    """
    S = np.linspace(0.0, 1.0, n_heights)
    best = 0.0
    for s in S:
        vals = sgen(sample_points, np.full(len(sample_points), s))
        best = max(best, float(np.max(np.linalg.norm(vals, 2, axis=(-2, -1)))))
    rho = 2 * best
    rate = -math.log(lam)
    margin = rho - sgen.alpha * rate
    return {"rho": rho, "flow_rate": rate, "alpha": sgen.alpha, "margin": margin, "holds_hyperbolicity": margin < 0}
