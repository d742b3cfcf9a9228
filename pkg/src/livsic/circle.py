"""Orientation-preserving circle diffeomorphisms and the C^r surrogate metric.

A diffeomorphism is stored through its lift h(x) = x + u(x) with u periodic,

    u(x) = Re sum_{k=0}^{F} a_k exp(2 pi i k x),

plus a cache of samples of u at the R nodes j/R.  Composition happens in
sample space (evaluate the outer series at the moved nodes) and is refitted by
FFT; derivatives are spectral.  Distances are the C^r sup-distance of lifts,
symmetrized with inverses:

    d_r(h1, h2) = max over n <= r of sup|D^n(h1 - h2)| and sup|D^n(h1^-1 - h2^-1)|

with the 0th order taken modulo 1.  It stands in for the path-length metric
and is compared against path lengths of linear paths in the tests.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, Sequence

import numpy as np

from . import _kernels
from .errors import NewtonStall, NotADiffeomorphism, ResolutionExceeded

DEFAULT_F = 64
DEFAULT_R = 1024
DEFAULT_R_MAX = 5
DEFAULT_MARGIN = 1e-3
TAIL_TOL = 1e-8
# tail energy below this (RMS amplitude ~1e-12) is at the Newton/roundoff noise level
TAIL_FLOOR = 1e-24
TWO_PI = 2.0 * math.pi


def _spectral_factor(F: int, m: int) -> np.ndarray:
    return (1j * TWO_PI * np.arange(F + 1)) ** m


def _samples_from_coef(coef: np.ndarray, R: int, order: int = 0) -> np.ndarray:
    F = len(coef) - 1
    c = coef * _spectral_factor(F, order) if order else coef
    spec = np.zeros(R // 2 + 1, dtype=complex)
    spec[0] = c[0].real * R
    spec[1 : F + 1] = c[1:] * (R / 2)
    return np.fft.irfft(spec, n=R)


def _coef_from_samples(samples: np.ndarray, F: int) -> tuple[np.ndarray, float, float]:
    """(coefficients up to F, tail energy above F/2, total non-constant energy)."""
    R = len(samples)
    c = np.fft.rfft(samples) / R
    full = np.empty(len(c), dtype=complex)
    full[0] = c[0].real
    full[1:] = 2 * c[1:]
    if R % 2 == 0:
        full[-1] = c[-1]
    energy = np.abs(full[1:]) ** 2
    total = float(energy.sum())
    tail = float(energy[F // 2 :].sum())
    out = np.zeros(F + 1, dtype=complex)
    n = min(F + 1, len(full))
    out[:n] = full[:n]
    return out, tail, total


def _extremes(coef: np.ndarray, order: int = 0, dense: int | None = None) -> tuple[float, float]:
    """Accurate (min, max) of the trigonometric polynomial D^order u.

    Dense sampling followed by Newton refinement of the critical points next
    to the sampled extremes.
    """
    F = len(coef) - 1
    c = coef * _spectral_factor(F, order) if order else coef
    if F == 0 or not np.any(c[1:]):
        v = float(c[0].real)
        return v, v
    M = dense or max(1024, 1 << int(math.ceil(math.log2(16 * (F + 1)))))
    vals = _samples_from_coef(c, M)
    cand = []
    for sign in (1.0, -1.0):
        v = sign * vals
        peaks = np.nonzero((v >= np.roll(v, 1)) & (v >= np.roll(v, -1)))[0]
        top = peaks[np.argsort(v[peaks])[::-1][:4]]
        cand.extend(top / M)
    x = np.array(cand, dtype=float)
    best = _kernels.trig_series(c, x, 0)[0]
    for _ in range(8):
        d = _kernels.trig_series(c, x, 2)
        step = np.where(np.abs(d[2]) > 0, d[1] / np.where(d[2] == 0, 1.0, d[2]), 0.0)
        step = np.clip(step, -0.5 / M, 0.5 / M)
        x = x - step
        best = np.concatenate([best, _kernels.trig_series(c, x, 0)[0]])
    lo = min(float(vals.min()), float(best.min()))
    hi = max(float(vals.max()), float(best.max()))
    return lo, hi


def sup_abs(coef: np.ndarray, order: int = 0) -> float:
    lo, hi = _extremes(coef, order)
    return max(abs(lo), abs(hi))


def sup_abs_mod1(coef: np.ndarray) -> float:
    """sup over x of the circle distance |u(x) mod 1| (values in [0, 1/2])."""
    lo, hi = _extremes(coef, 0)
    c = round(0.5 * (lo + hi))
    if math.floor(lo - c + 0.5) != math.floor(hi - c + 0.5):
        return 0.5
    return min(0.5, max(abs(lo - c), abs(hi - c)))


class CircleDiffeo:
    """h(x) = x + u(x) with u a real trigonometric polynomial of degree F."""

    def __init__(
        self,
        coef,
        R: int = DEFAULT_R,
        r_max: int = DEFAULT_R_MAX,
        margin: float = DEFAULT_MARGIN,
        _samples: np.ndarray | None = None,
        _check: bool = True,
    ):
        coef = np.array(coef, dtype=complex)
        coef[0] = coef[0].real
        self.coef = coef
        self.coef.setflags(write=False)
        self.F = len(coef) - 1
        if R < 2 * self.F + 2:
            raise ResolutionExceeded(f"resolution R={R} cannot carry frequency F={self.F}")
        self.R = R
        self.r_max = r_max
        self.margin = margin
        if _samples is not None:
            self.__dict__["samples"] = _samples
        if _check:
            mn = float(self.deriv_samples(1).min()) + 1.0
            if mn < margin:
                raise NotADiffeomorphism(f"min h' = {mn:.3e} below margin {margin}")

    # -- constructors -----------------------------------------------------
    @classmethod
    def identity(cls, F: int = DEFAULT_F, R: int = DEFAULT_R) -> "CircleDiffeo":
        return cls(np.zeros(F + 1), R)

    @classmethod
    def rotation(cls, a: float, F: int = DEFAULT_F, R: int = DEFAULT_R) -> "CircleDiffeo":
        c = np.zeros(F + 1, dtype=complex)
        c[0] = a
        return cls(c, R)

    @classmethod
    def from_function(cls, u: Callable, F: int = DEFAULT_F, R: int = DEFAULT_R) -> "CircleDiffeo":
        x = np.arange(R) / R
        return cls.from_samples(np.asarray(u(x), dtype=float), F)

    @classmethod
    def from_samples(cls, samples: np.ndarray, F: int = DEFAULT_F, ref_energy: float = 0.0, **kw) -> "CircleDiffeo":
        """Fit coefficients; the tail is judged against max(own energy, ref_energy).

        Operations pass the energy of their operands as ``ref_energy`` so that a
        near-identity result (h o h^{-1}) is not rejected for roundoff.
        """
        coef, tail, total = _coef_from_samples(samples, F)
        if tail > TAIL_TOL * max(total, ref_energy) + TAIL_FLOOR:
            raise ResolutionExceeded(
                f"relative tail energy {tail / total:.2e} above frequency {F // 2} exceeds {TAIL_TOL:.0e}; raise F/R"
            )
        return cls(coef, len(samples), **kw)

    # -- evaluation -------------------------------------------------------
    @cached_property
    def samples(self) -> np.ndarray:
        return _samples_from_coef(self.coef, self.R)

    def deriv_samples(self, m: int, R: int | None = None) -> np.ndarray:
        return _samples_from_coef(self.coef, R or self.R, m)

    def u(self, x, order: int = 0) -> np.ndarray:
        x = np.atleast_1d(np.asarray(x, dtype=float))
        return _kernels.trig_series(self.coef, x, order)[order]

    def __call__(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return x + self.u(x)

    def derivative(self, x, m: int = 1) -> np.ndarray:
        """D^m h at x (m >= 1)."""
        d = self.u(x, m)
        return d + 1.0 if m == 1 else d

    @property
    def nodes(self) -> np.ndarray:
        return np.arange(self.R) / self.R

    @property
    def is_rotation(self) -> bool:
        return not np.any(self.coef[1:])

    def sup_derivative(self, m: int) -> float:
        """sup |D^m h| (accurate); m = 1 gives max h'."""
        if m == 1:
            lo, hi = _extremes(self.coef, 1)
            return max(abs(1 + lo), abs(1 + hi))
        return sup_abs(self.coef, m)

    def min_derivative(self) -> float:
        lo, _ = _extremes(self.coef, 1)
        return 1.0 + lo

    def norm_C(self, r: int) -> float:
        """|Dh|_{r-1} = max_{1 <= n <= r} sup |D^n h|."""
        return max(self.sup_derivative(n) for n in range(1, r + 1))

    @cached_property
    def inverse(self) -> "CircleDiffeo":
        return invert(self)

    def as_dict(self) -> dict:
        return {
            "F": self.F,
            "R": self.R,
            "re": [float(v) for v in self.coef.real],
            "im": [float(v) for v in self.coef.imag],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "CircleDiffeo":
        return cls(np.array(d["re"]) + 1j * np.array(d["im"]), int(d["R"]))

    def __repr__(self):
        return f"CircleDiffeo(F={self.F}, R={self.R}, rot={self.coef[0].real:.4g})"


# ---------------------------------------------------------------------------
# group operations
# ---------------------------------------------------------------------------
def compose(h1: CircleDiffeo, h2: CircleDiffeo) -> CircleDiffeo:
    """h1 o h2.  The lift is u2(x) + u1(x + u2(x))."""
    F = max(h1.F, h2.F)
    R = max(h1.R, h2.R)
    # rotations act on coefficients exactly: a shift of the lift, or a phase
    if h1.is_rotation:
        c = _pad(h2.coef, F).copy()
        c[0] += h1.coef[0].real
        return CircleDiffeo(c, R, margin=h2.margin, _check=False)
    if h2.is_rotation:
        b = h2.coef[0].real
        c = _pad(h1.coef, F) * np.exp(1j * TWO_PI * np.arange(F + 1) * b)
        c[0] = h1.coef[0].real + b
        return CircleDiffeo(c, R, margin=h1.margin, _check=False)
    x = np.arange(R) / R
    u2 = h2.samples if h2.R == R else h2.u(x)
    u = u2 + h1.u(x + u2)
    ref = max(_energy(h1.coef), _energy(h2.coef))
    return CircleDiffeo.from_samples(u, F, ref_energy=ref, margin=min(h1.margin, h2.margin))


def _energy(coef: np.ndarray) -> float:
    return float(np.sum(np.abs(coef[1:]) ** 2))


def invert(h: CircleDiffeo, tol: float = 1e-13, max_iter: int = 50) -> CircleDiffeo:
    """Per-node Newton solve of y + u(y) = x, refitted to Fourier."""
    if h.is_rotation:
        return CircleDiffeo.rotation(-h.coef[0].real, h.F, h.R)
    x = np.arange(h.R) / h.R
    y = x - h.samples
    for _ in range(max_iter):
        d = _kernels.trig_series(h.coef, y, 1)
        res = y + d[0] - x
        if np.max(np.abs(res)) <= tol:
            break
        y = y - res / (1.0 + d[1])
    else:
        raise NewtonStall(f"Newton inversion residual {np.max(np.abs(res)):.2e} after {max_iter} iterations")
    # two polishing steps take the quadratic convergence down to roundoff;
    # a residual of tol would otherwise show up as ~tol (2 pi F)^3 in d_3
    for _ in range(2):
        d = _kernels.trig_series(h.coef, y, 1)
        y = y - (y + d[0] - x) / (1.0 + d[1])
    return CircleDiffeo.from_samples(y - x, h.F, ref_energy=_energy(h.coef), margin=h.margin)


# ---------------------------------------------------------------------------
# metric surrogate
# ---------------------------------------------------------------------------
@dataclass(frozen=True)
class DiffMetricReport:
    r: int
    d_r_surrogate: float
    symmetric: bool
    components: dict = field(default_factory=dict)

    def as_dict(self) -> dict:
        return {"r": self.r, "d_r_surrogate": self.d_r_surrogate, "symmetric": self.symmetric, "components": self.components}


def _pad(c: np.ndarray, F: int) -> np.ndarray:
    if len(c) == F + 1:
        return c
    out = np.zeros(F + 1, dtype=complex)
    out[: len(c)] = c
    return out


def lift_sup_distances(h1: CircleDiffeo, h2: CircleDiffeo, r: int) -> list[float]:
    """[sup|h1 - h2| mod 1, sup|D(h1 - h2)|, ..., sup|D^r(h1 - h2)|]."""
    F = max(h1.F, h2.F)
    diff = _pad(h1.coef, F) - _pad(h2.coef, F)
    out = [sup_abs_mod1(diff)]
    out += [sup_abs(diff, n) for n in range(1, r + 1)]
    return out


def dr_distance(h1: CircleDiffeo, h2: CircleDiffeo, r: int) -> DiffMetricReport:
    if r > min(h1.r_max, h2.r_max):
        raise ValueError(f"order r={r} exceeds tracked r_max")
    fwd = lift_sup_distances(h1, h2, r)
    inv = lift_sup_distances(h1.inverse, h2.inverse, r)
    d = max(max(fwd), max(inv))
    return DiffMetricReport(r, float(d), True, {"forward": fwd, "inverse": inv})


def dr(h1: CircleDiffeo, h2: CircleDiffeo, r: int) -> float:
    return dr_distance(h1, h2, r).d_r_surrogate


# ---------------------------------------------------------------------------
# path lengths
# ---------------------------------------------------------------------------
def _path_integrand_max(coefs: np.ndarray, r: int, grid: int) -> float:
    """max_n max_y sum_k |D^n (u_{k+1} - u_k)(y)| over a dense grid plus golden refinement."""
    diffs = np.diff(coefs, axis=0)
    F = coefs.shape[1] - 1
    best = 0.0
    for n in range(r + 1):
        fac = _spectral_factor(F, n)

        def total(y, fac=fac):
            y = np.atleast_1d(y)
            acc = np.zeros(len(y))
            for d in diffs:
                acc += np.abs(_kernels.trig_series(d * fac, y, 0)[0])
            return acc

        y = np.arange(grid) / grid
        vals = total(y)
        top = np.argsort(vals)[::-1][:3]
        best = max(best, float(vals.max()))
        for i in top:
            a, b = (i - 1) / grid, (i + 1) / grid
            g = (math.sqrt(5) - 1) / 2
            for _ in range(40):
                c1, c2 = b - g * (b - a), a + g * (b - a)
                if total(c1)[0] > total(c2)[0]:
                    b = c2
                else:
                    a = c1
            best = max(best, float(total(0.5 * (a + b))[0]))
    return best


def path_length(path, r: int, grid: int = 2048, rel_tol: float = 0.01, max_samples: int = 4096) -> float:
    """l_r of a path given as >= 16 samples (piecewise linear in the lift) or as s -> CircleDiffeo.

    For a sampled path the integral of |d/ds D^n p_s(y)| is the sum of the
    absolute increments.  A callable path is sampled at 16, 32, ... points
    until the value is stable to ``rel_tol``.
    """
    if callable(path):
        k = 16
        prev = None
        while True:
            samples = [path(s) for s in np.linspace(0.0, 1.0, k + 1)]
            val = path_length(samples, r, grid)
            if prev is not None and abs(val - prev) <= rel_tol * max(abs(val), 1e-300):
                return val
            if k >= max_samples:
                return val
            prev = val
            k *= 2
    path = list(path)
    if len(path) < 16:
        raise ValueError("a sampled path needs at least 16 samples")
    F = max(p.F for p in path)
    coefs = np.array([_pad(p.coef, F) for p in path])
    return _path_integrand_max(coefs, r, grid)


def linear_path(h1: CircleDiffeo, h2: CircleDiffeo, n: int = 16) -> list[CircleDiffeo]:
    F = max(h1.F, h2.F)
    a, b = _pad(h1.coef, F), _pad(h2.coef, F)
    return [CircleDiffeo((1 - s) * a + s * b, h1.R) for s in np.linspace(0.0, 1.0, n + 1)]


def gronwall_check(path: Sequence[CircleDiffeo], k: int = 1) -> float:
    """max over samples s of |D^k p_s| - (l_k(p|[0,s]) + |D^k p_0|); <= 0 when the bound holds.

    On the flat circle the exponential factor of the general bound is 1.
    """
    path = list(path)
    F = max(p.F for p in path)
    coefs = np.array([_pad(p.coef, F) for p in path])
    base = path[0].sup_derivative(k)
    worst = -math.inf
    for j in range(1, len(path)):
        sub = coefs[: j + 1]
        ell = _path_integrand_max(sub, k, 1024) if j >= 1 else 0.0
        worst = max(worst, path[j].sup_derivative(k) - (ell + base))
    return worst


def mvt_constant_check(h: CircleDiffeo, g1: CircleDiffeo, g2: CircleDiffeo, r: int) -> tuple[float, float]:
    """(d_{r-1}(h g1, h g2) / d_{r-1}(g1, g2), d_{r-1}(g1 h, g2 h) / d_{r-1}(g1, g2))."""
    base = dr(g1, g2, r - 1)
    if base == 0:
        return 1.0, 1.0
    pre = dr(compose(h, g1), compose(h, g2), r - 1) / base
    post = dr(compose(g1, h), compose(g2, h), r - 1) / base
    return pre, post


def post_composition_ratio(path: Sequence[CircleDiffeo], h: CircleDiffeo, r: int) -> float:
    """l_r(p o h) / ((1 + |Dh|_{r-1})^r l_r(p)); bounded by the constant of the composition estimate."""
    ell = path_length(path, r)
    if ell == 0:
        return 0.0
    moved = [compose(p, h) for p in path]
    return path_length(moved, r) / ((1 + h.norm_C(r)) ** r * ell)


# ---------------------------------------------------------------------------
# the group object
# ---------------------------------------------------------------------------
class DiffGroup:
    """Diff(S^1) as a target group; elements are CircleDiffeo, batches are lists.

    Algebra-level values are lift coefficient vectors: basis 'rot' is the
    constant lift, 'sin<k>' is sin(2 pi k x)/(2 pi k), 'cos<k>' is
    cos(2 pi k x)/(2 pi k).
    """

    commutative = False
    tag = "DiffS1"

    def __init__(self, F: int = DEFAULT_F, R: int = DEFAULT_R, dist_order: int = 0, margin: float = DEFAULT_MARGIN):
        self.F = F
        self.R = R
        self.dist_order = dist_order
        self.margin = margin

    def __repr__(self):
        return f"DiffGroup(F={self.F}, R={self.R})"

    def __eq__(self, other):
        return isinstance(other, DiffGroup) and (other.F, other.R) == (self.F, self.R)

    def __hash__(self):
        return hash(("diff", self.F, self.R))

    def with_order(self, r: int) -> "DiffGroup":
        return DiffGroup(self.F, self.R, r, self.margin)

    def basis(self, name: str) -> np.ndarray:
        c = np.zeros(self.F + 1, dtype=complex)
        if name == "rot":
            c[0] = 1.0
            return c
        for prefix, val in (("sin", -1j), ("cos", 1.0)):
            if name.startswith(prefix):
                k = int(name[len(prefix):])
                c[k] = val / (TWO_PI * k)
                return c
        raise ValueError(f"unknown Diff(S1) basis {name!r}")

    def from_algebra(self, V) -> list[CircleDiffeo]:
        V = np.atleast_2d(V)
        return [CircleDiffeo(v, self.R, margin=self.margin) for v in V]

    def identity(self) -> CircleDiffeo:
        return CircleDiffeo.identity(self.F, self.R)

    @staticmethod
    def _is_batch(a) -> bool:
        return isinstance(a, (list, tuple))

    def mul(self, a, b):
        if self._is_batch(a):
            return [compose(x, y) for x, y in zip(a, b)]
        return compose(a, b)

    def inv(self, a):
        if self._is_batch(a):
            return [x.inverse for x in a]
        return a.inverse

    def dist(self, a, b, order: int | None = None):
        r = self.dist_order if order is None else order
        if self._is_batch(a):
            return np.array([dr(x, y, r) for x, y in zip(a, b)])
        return dr(a, b, r)

    def chain(self, values) -> list[CircleDiffeo]:
        out = [self.identity()]
        for v in values:
            out.append(compose(v, out[-1]))
        return out


# ---------------------------------------------------------------------------
# cocycle estimates
# ---------------------------------------------------------------------------
@dataclass
class DiffeoCocycleReport:
    n: int
    rho0: float
    rho1: float
    d0: float
    d0_bound: float
    deriv: list
    deriv_bound: list
    C: list
    ok: bool

    def as_dict(self) -> dict:
        return dict(self.__dict__)


def majorant_constants(rho1: float, B2: float, B3: float, n_max: int) -> list[float]:
    """C_m with |D^m Phi(x,n)| <= C_m rho1^{m|n|} for m = 1, 2, 3 and |n| <= n_max.

    Faà di Bruno for Phi_{n} = eta o Phi_{n-1} gives the majorants
      a1(n) = rho1 a1(n-1)
      a2(n) = B2 a1(n-1)^2 + rho1 a2(n-1)
      a3(n) = B3 a1(n-1)^3 + 3 B2 a1(n-1) a2(n-1) + rho1 a3(n-1)
    with B_k bounding |D^k eta|.
    """
    a1, a2, a3 = 1.0, 0.0, 0.0
    C = [1.0, 0.0, 0.0]
    for n in range(1, n_max + 1):
        a1, a2, a3 = rho1 * a1, B2 * a1**2 + rho1 * a2, B3 * a1**3 + 3 * B2 * a1 * a2 + rho1 * a3
        C[0] = max(C[0], a1 / rho1**n)
        C[1] = max(C[1], a2 / rho1 ** (2 * n))
        C[2] = max(C[2], a3 / rho1 ** (3 * n))
    return C


def diffeo_cocycle_eval(sys, gen, x, n: int, sample_points: np.ndarray | None = None, n_max: int | None = None):
    """Phi(x, n) over Diff(S^1) together with the a-priori estimates.

    rho0 = max d0(eta, Id) and rho1 = max(|D eta|, |D eta^{-1}|) are taken over
    the sample points and the factors actually used; the report checks
    d0(Phi, Id) <= rho0 |n| and |D^m Phi| <= C_m rho1^{m|n|}, m <= 3.
    """
    from .cocycles import cocycle_table

    pts, table = cocycle_table(sys, gen, x, n)
    phi = table[-1]
    if n > 0:
        etas = list(gen.eval(pts[:n]))
    elif n < 0:
        etas = list(gen.eval_inv(pts[1:]))
    else:
        etas = []
    if sample_points is not None:
        extra = gen.eval(sample_points)
        etas += list(extra) + [e.inverse for e in extra]
    if not etas:
        return phi, DiffeoCocycleReport(n, 0.0, 1.0, 0.0, 0.0, [1.0, 0.0, 0.0], [1.0, 0.0, 0.0], [1.0, 0.0, 0.0], True)
    rho0 = max(sup_abs_mod1(e.coef) for e in etas)
    both = etas + [e.inverse for e in etas]
    rho1 = max(1.0, max(e.sup_derivative(1) for e in both))
    B2 = max(e.sup_derivative(2) for e in both)
    B3 = max(e.sup_derivative(3) for e in both)
    C = majorant_constants(rho1, B2, B3, max(abs(n), n_max or 0))
    d0 = sup_abs_mod1(phi.coef)
    deriv = [phi.sup_derivative(m) for m in (1, 2, 3)]
    bounds = [C[m - 1] * rho1 ** (m * abs(n)) for m in (1, 2, 3)]
    slack = 1e-12
    ok = d0 <= rho0 * abs(n) + slack and all(d <= b * (1 + 1e-9) + slack for d, b in zip(deriv, bounds))
    return phi, DiffeoCocycleReport(n, rho0, rho1, d0, rho0 * abs(n), deriv, bounds, C, bool(ok))


def diffeo_hyperbolicity(rho1: float, rho0: float, lam: float, alpha: float, r: int, kappa: float = 0.0) -> dict:
    """Margins of rho^{2r-1} lam^alpha < 1 (discrete) and (2r-1)(rho1 + kappa rho0) - alpha log(1/lam) < 0 (flow)."""
    discrete = (2 * r - 1) * math.log(rho1) + alpha * math.log(lam)
    flow = (2 * r - 1) * (rho1 + kappa * rho0) + alpha * math.log(lam)
    return {
        "r": r,
        "kappa": kappa,
        "discrete_margin": discrete,
        "discrete_holds": discrete < 0,
        "flow_margin": flow,
        "flow_holds": flow < 0,
    }


def solve_transfer_diffeo(sys, gen, grid_res: int, L: int, r: int = 3, **kw):
    """Transfer function over Diff(S^1); residuals at orders r-2 and r-3."""
    from .solver import solve_transfer

    if r < 3:
        raise ValueError("the diffeomorphism solver needs r >= 3")
    metric = lambda a, b: gen.group.dist(a, b, order=r - 3)  # noqa: E731
    sol = solve_transfer(sys, gen, grid_res, L, metric=metric, **kw)
    hi = lambda a, b: gen.group.dist(a, b, order=r - 2)  # noqa: E731
    sol.extra["residual_order_r_minus_2"] = sol.residual_with(hi)
    sol.extra["residual_order_r_minus_3"] = sol.residual
    sol.extra["r"] = r
    return sol
