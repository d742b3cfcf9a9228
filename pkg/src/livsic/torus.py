"""Hyperbolic toral automorphisms, their perturbations and exact orbits.

Points carry an exact representation (big rationals or wide fixed-point
integers) plus a float mirror.  The float mirror is never iterated; orbits
are always advanced in the exact ring and mirrored afterwards.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property, lru_cache
from typing import Sequence

import numpy as np

from . import intlinalg as il
from .errors import (
    DefectiveSplittingUnsupported,
    EigenvalueOnUnitCircle,
    NoConvergence,
    NotUnimodular,
    PerturbationTooLarge,
    PrecisionExhausted,
)

UNIT_CIRCLE_MARGIN = 1e-8
DEFAULT_BITS = 256


# ---------------------------------------------------------------------------
# points
# ---------------------------------------------------------------------------
@dataclass(frozen=True, eq=False)
class TorusPoint:
    """A point of T^d with an exact representation and a float mirror.

    ``mode`` is ``"rational"`` (``exact`` holds Fractions) or ``"fixed"``
    (``exact`` holds integers k_i with x_i = k_i / 2**bits).
    """

    exact: tuple
    mode: str
    bits: int | None = None
    float: np.ndarray = field(default=None, repr=False)

    def __post_init__(self):
        if self.mode == "rational":
            vals = tuple(Fraction(v) % 1 for v in self.exact)
            mirror = np.array([float(v) for v in vals]) % 1.0
        elif self.mode == "fixed":
            mod = 1 << self.bits
            vals = tuple(int(v) % mod for v in self.exact)
            mirror = np.array([_fixed_to_float(v, self.bits) for v in vals])
        else:
            raise ValueError(f"unknown mode {self.mode!r}")
        object.__setattr__(self, "exact", vals)
        mirror.setflags(write=False)
        object.__setattr__(self, "float", mirror)

    @classmethod
    def rational(cls, coords: Sequence) -> "TorusPoint":
        return cls(tuple(Fraction(c) for c in coords), "rational")

    @classmethod
    def fixed(cls, coords: Sequence[float], bits: int = DEFAULT_BITS) -> "TorusPoint":
        """Fixed-point point nearest to the given float (or Fraction) coordinates."""
        ks = tuple(int(Fraction(c) % 1 * (1 << bits)) for c in coords)
        return cls(ks, "fixed", bits)

    @classmethod
    def from_float(cls, coords: Sequence[float]) -> "TorusPoint":
        """Exact rational copy of a float vector (floats are dyadic rationals)."""
        return cls(tuple(Fraction(float(c)) for c in coords), "rational")

    @property
    def dim(self) -> int:
        return len(self.exact)

    def as_fractions(self) -> tuple[Fraction, ...]:
        if self.mode == "rational":
            return self.exact
        return tuple(Fraction(k, 1 << self.bits) for k in self.exact)

    def __eq__(self, other):
        if not isinstance(other, TorusPoint):
            return NotImplemented
        return self.as_fractions() == other.as_fractions()

    def __hash__(self):
        return hash(self.as_fractions())

    def __repr__(self):
        if self.mode == "rational":
            body = ", ".join(str(v) for v in self.exact)
        else:
            body = ", ".join(f"{v:.6f}" for v in self.float)
        return f"TorusPoint({self.mode}: {body})"


def _fixed_to_float(k: int, bits: int) -> float:
    if bits > 53:
        return (k >> (bits - 53)) / float(1 << 53)
    return k / float(1 << bits)


def torus_distance(x, y) -> np.ndarray | float:
    """Flat-torus distance; accepts TorusPoints or (..., d) float arrays."""
    xa = x.float if isinstance(x, TorusPoint) else np.asarray(x, dtype=float)
    ya = y.float if isinstance(y, TorusPoint) else np.asarray(y, dtype=float)
    diff = xa - ya
    diff = diff - np.round(diff)
    out = np.sqrt(np.sum(diff * diff, axis=-1))
    return float(out) if out.ndim == 0 else out


def wrap_diff(diff: np.ndarray) -> np.ndarray:
    """Representative of a torus displacement in [-1/2, 1/2)^d."""
    return diff - np.round(diff)


# ---------------------------------------------------------------------------
# the linear model
# ---------------------------------------------------------------------------
@dataclass(frozen=True, eq=False)
class ToralAutomorphism:
    matrix: tuple
    dim: int
    eigenvalues: np.ndarray = field(repr=False)
    unstable_basis: np.ndarray = field(repr=False)
    stable_basis: np.ndarray = field(repr=False)
    lam: float
    hyperbolicity_C: float
    adapted_metric: np.ndarray = field(repr=False)

    @cached_property
    def int_matrix(self) -> il.IntMatrix:
        return [list(r) for r in self.matrix]

    @cached_property
    def int_inverse(self) -> il.IntMatrix:
        return il.inverse_unimodular(self.int_matrix)

    @cached_property
    def A(self) -> np.ndarray:
        return np.array(self.matrix, dtype=float)

    @cached_property
    def A_inv(self) -> np.ndarray:
        return np.array(self.int_inverse, dtype=float)

    @cached_property
    def basis(self) -> np.ndarray:
        """Columns: unstable basis followed by stable basis."""
        return np.hstack([self.unstable_basis, self.stable_basis])

    @cached_property
    def basis_inv(self) -> np.ndarray:
        return np.linalg.inv(self.basis)

    @property
    def dim_u(self) -> int:
        return self.unstable_basis.shape[1]

    @property
    def dim_s(self) -> int:
        return self.stable_basis.shape[1]

    @cached_property
    def spectral_radius(self) -> float:
        return float(max(np.max(np.abs(self.eigenvalues)), np.max(1 / np.abs(self.eigenvalues))))

    @cached_property
    def bits_per_step(self) -> float:
        return math.log2(self.spectral_radius)

    @cached_property
    def stable_block(self) -> np.ndarray:
        """Matrix of A restricted to E^s in stable_basis coordinates."""
        k = self.dim_u
        return (self.basis_inv @ self.A @ self.basis)[k:, k:]

    @cached_property
    def unstable_block(self) -> np.ndarray:
        k = self.dim_u
        return (self.basis_inv @ self.A @ self.basis)[:k, :k]

    def power(self, n: int) -> il.IntMatrix:
        return _int_power(self.matrix, n)

    def derivative(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return np.broadcast_to(self.A, x.shape[:-1] + self.A.shape)

    def step_float(self, x: np.ndarray, n: int = 1) -> np.ndarray:
        """Float map (only for short, well-conditioned use; orbits go through apply)."""
        m = self.A if n >= 0 else self.A_inv
        y = np.asarray(x, dtype=float)
        for _ in range(abs(n)):
            y = (y @ m.T) % 1.0
        return y

    def usable_steps(self, bits: int) -> int:
        """Orbit length supported by a fixed-point width before PrecisionExhausted."""
        return max(0, int((bits - 64) / self.bits_per_step))

    def bits_for(self, n_steps: int) -> int:
        """Fixed-point width (multiple of 64) sufficient for n_steps iterates."""
        need = math.ceil(abs(n_steps) * self.bits_per_step) + 64
        return max(DEFAULT_BITS, 64 * math.ceil(need / 64))

    def orbit(self, x: TorusPoint, n_steps: int, backward: bool = False) -> np.ndarray:
        """Float mirrors of x, f^{±1}x, ..., f^{±n_steps}x computed in the exact ring."""
        if x.mode == "fixed":
            self._check_budget(n_steps, x.bits)
        m = self.int_inverse if backward else self.int_matrix
        d = self.dim
        out = np.empty((n_steps + 1, d))
        if x.mode == "rational":
            q = il.lcm(v.denominator for v in x.exact)
            a = [int(v * q) for v in x.exact]
            for j in range(n_steps + 1):
                out[j] = [ai / q for ai in a]
                a = [sum(r[i] * a[i] for i in range(d)) % q for r in m]
            return out % 1.0
        bits = x.bits
        mod_mask = (1 << bits) - 1
        a = list(x.exact)
        for j in range(n_steps + 1):
            out[j] = [_fixed_to_float(ai, bits) for ai in a]
            a = [sum(r[i] * a[i] for i in range(d)) & mod_mask for r in m]
        return out

    def _check_budget(self, n: int, bits: int) -> None:
        if abs(n) * self.bits_per_step > bits - 64:
            raise PrecisionExhausted(
                f"|n|={abs(n)} steps consume {abs(n) * self.bits_per_step:.1f} bits;"
                f" only {bits - 64} available at width {bits}"
            )


@lru_cache(maxsize=512)
def _int_power(matrix: tuple, n: int) -> il.IntMatrix:
    m = [list(r) for r in matrix]
    if n < 0:
        m = il.inverse_unimodular(m)
        n = -n
    return il.matpow(m, n)


def build_toral(matrix) -> ToralAutomorphism:
    """Validate an integer matrix and build the hyperbolic splitting data."""
    m = il.as_int_matrix(matrix)
    d = len(m)
    dt = il.det(m)
    if abs(dt) != 1:
        raise NotUnimodular(f"|det| = {abs(dt)} != 1")
    A = np.array(m, dtype=float)
    w, vecs = np.linalg.eig(A)
    mod = np.abs(w)
    if np.any(np.abs(mod - 1.0) < UNIT_CIRCLE_MARGIN):
        raise EigenvalueOnUnitCircle(f"eigenvalue moduli {np.sort(mod)}")
    if np.linalg.cond(vecs) > 1e8:
        raise DefectiveSplittingUnsupported("eigenvector matrix is (nearly) singular")

    def real_basis(select) -> np.ndarray:
        cols = []
        used = set()
        order = np.argsort(-np.abs(w))
        for i in order:
            if not select(mod[i]) or i in used:
                continue
            v = vecs[:, i]
            if abs(w[i].imag) < 1e-12 * max(1.0, abs(w[i])):
                v = np.real(v * np.exp(-1j * np.angle(v[np.argmax(np.abs(v))])))
                cols.append(v / np.linalg.norm(v))
                used.add(i)
                continue
            # complex pair: keep the member with positive imaginary part
            j = int(np.argmin(np.abs(w - np.conj(w[i])) + (np.arange(d) == i) * 1e9))
            used.update((i, j))
            if w[i].imag < 0:
                v = vecs[:, j]
            # rotate the phase so Re v is orthogonal to Im v
            a, b = v.real, v.imag
            t = 0.5 * math.atan2(2 * a @ b, a @ a - b @ b)
            v = v * np.exp(-1j * t)
            v = v / np.linalg.norm(v)
            cols.extend([v.real, v.imag])
        return np.array(cols).T.reshape(d, -1)

    eu = real_basis(lambda r: r > 1)
    es = real_basis(lambda r: r < 1)
    basis = np.hstack([eu, es])
    binv = np.linalg.inv(basis)
    lam = float(max(np.max(mod[mod < 1]), np.max(1 / mod[mod > 1])))
    cond = float(np.linalg.cond(basis))
    adapted = binv.T @ binv
    return ToralAutomorphism(
        matrix=tuple(tuple(r) for r in m),
        dim=d,
        eigenvalues=w,
        unstable_basis=eu,
        stable_basis=es,
        lam=lam,
        hyperbolicity_C=max(1.0, cond),
        adapted_metric=adapted,
    )


def adapted_norm(sys: ToralAutomorphism, v: np.ndarray) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    c = v @ sys.basis_inv.T
    return np.sqrt(np.sum(c * c, axis=-1))


def apply(sys: ToralAutomorphism, x: TorusPoint, n: int) -> TorusPoint:
    """f^n x, computed exactly in the point's own ring."""
    if n == 0:
        return x
    if x.mode == "fixed":
        sys._check_budget(n, x.bits)
    an = sys.power(n)
    y = il.matvec(an, list(x.exact))
    if x.mode == "rational":
        return TorusPoint(tuple(y), "rational")
    return TorusPoint(tuple(y), "fixed", x.bits)


def stable_projection(sys: ToralAutomorphism, v) -> tuple[np.ndarray, np.ndarray]:
    """Oblique split v = v_s + v_u along E^s and E^u."""
    v = np.asarray(v, dtype=float)
    c = v @ sys.basis_inv.T
    k = sys.dim_u
    v_u = c[..., :k] @ sys.unstable_basis.T
    v_s = c[..., k:] @ sys.stable_basis.T
    return v_s, v_u


# ---------------------------------------------------------------------------
# nonlinear perturbations
# ---------------------------------------------------------------------------
@dataclass(frozen=True, eq=False)
class PerturbedToral:
    """f(x) = A x + epsilon * g(x) mod 1 with g a trigonometric vector field.

    Terms of g are ``(freq, amp, phase)`` meaning amp * sin(2 pi freq.x + phase).
    """

    base: ToralAutomorphism
    freqs: np.ndarray
    amps: np.ndarray
    phases: np.ndarray
    epsilon: float
    cone_margin: float = 0.0

    @property
    def dim(self) -> int:
        return self.base.dim

    @property
    def lam(self) -> float:
        return self.base.lam

    @property
    def max_frequency(self) -> int:
        return int(np.max(np.abs(self.freqs))) if len(self.freqs) else 0

    def g(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        arg = 2 * np.pi * (x @ self.freqs.T) + self.phases
        return np.sin(arg) @ self.amps

    def Dg(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        arg = 2 * np.pi * (x @ self.freqs.T) + self.phases
        c = np.cos(arg) * 2 * np.pi
        return np.einsum("...t,ti,tj->...ij", c, self.amps, self.freqs)

    def map(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return (x @ self.base.A.T + self.epsilon * self.g(x)) % 1.0

    def derivative(self, x: np.ndarray) -> np.ndarray:
        return self.base.A + self.epsilon * self.Dg(x)

    def inverse(self, x: np.ndarray, tol: float = 1e-14, max_iter: int = 50) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        y = x @ self.base.A_inv.T
        for _ in range(max_iter):
            r = y @ self.base.A.T + self.epsilon * self.g(y) - x
            r = r - np.round(r)
            if np.max(np.abs(r)) < tol:
                break
            y = y - np.linalg.solve(self.derivative(y), r[..., None])[..., 0]
        else:
            raise NoConvergence("inverse map Newton iteration did not converge")
        return y % 1.0

    def lipschitz_g(self) -> float:
        return float(sum(np.linalg.norm(a) * 2 * np.pi * np.linalg.norm(k) for a, k in zip(self.amps, self.freqs)))

    def second_derivative_bound(self) -> float:
        return float(sum(np.linalg.norm(a) * (2 * np.pi * np.linalg.norm(k)) ** 2 for a, k in zip(self.amps, self.freqs)))


def build_perturbed(
    base: ToralAutomorphism,
    terms: Sequence[dict],
    epsilon: float,
    grid_per_dim: int | None = None,
) -> PerturbedToral:
    """Attach a trigonometric perturbation and certify hyperbolicity by cones.

    Each term is ``{"freq": [...], "amp": [...], "phase": float}``.  The
    unstable cone {|v_s| <= |v_u|} (adapted norm) must be mapped strictly into
    itself with expansion, and symmetrically for the inverse; the check runs on
    a grid (at most 64**d points, d <= 4) with a second-derivative correction
    for the gaps between grid points.
    """
    d = base.dim
    if d > 4:
        raise ValueError("perturbed systems are limited to d <= 4")
    freqs = np.array([t["freq"] for t in terms], dtype=float).reshape(-1, d)
    amps = np.array([t["amp"] for t in terms], dtype=float).reshape(-1, d)
    phases = np.array([t.get("phase", 0.0) for t in terms], dtype=float)
    pert = PerturbedToral(base, freqs, amps, phases, float(epsilon))
    if len(terms) == 0 or epsilon == 0:
        return pert
    n = grid_per_dim or max(2, min(64, int(round(4096 ** (1.0 / d)))))
    axes = [np.arange(n) / n] * d
    grid = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, d)
    B = epsilon * pert.Dg(grid)
    Bc = np.einsum("ij,njk,kl->nil", base.basis_inv, B, base.basis)
    b = float(np.max(np.linalg.norm(Bc, ord=2, axis=(1, 2))))
    gap = math.sqrt(d) / (2 * n)
    b += epsilon * pert.second_derivative_bound() * gap * np.linalg.norm(base.basis_inv, 2) * np.linalg.norm(base.basis, 2)
    lam = base.lam
    ainv = np.linalg.norm(base.basis_inv @ base.A_inv @ base.basis, 2)
    b_inv = ainv**2 * b / (1 - ainv * b) if ainv * b < 1 else np.inf
    fwd = (1 / lam - 2 * b) - (lam + 2 * b)
    bwd = (1 / lam - 2 * b_inv) - (lam + 2 * b_inv)
    expand = min(1 / lam - 2 * b, 1 / lam - 2 * b_inv) - 1
    margin = min(fwd, bwd, expand)
    if not margin > 0:
        raise PerturbationTooLarge(
            f"cone condition fails: perturbation bound {b:.3g} (inverse {b_inv:.3g}), margin {margin:.3g}"
        )
    object.__setattr__(pert, "cone_margin", float(margin))
    return pert


@dataclass(frozen=True)
class SplittingEstimate:
    stable: np.ndarray
    unstable: np.ndarray
    residual: float
    history: list[float]


def _subspace_gap(a: np.ndarray, b: np.ndarray) -> float:
    qa, _ = np.linalg.qr(a)
    qb, _ = np.linalg.qr(b)
    return float(np.linalg.norm(qa @ qa.T - qb @ qb.T, 2))


def estimate_splitting(
    pert: PerturbedToral | ToralAutomorphism,
    x,
    n_iter: int,
    tol: float = 1e-8,
) -> SplittingEstimate:
    """Power-iterate the derivative cocycle to get (E^s_x, E^u_x).

    E^u_x is the image of the reference unstable space under Df^n along the
    backward orbit; E^s_x the image of the reference stable space under
    Df^{-n} along the forward orbit.  ``history[k]`` is the gap between the
    estimates from k+1 and k+2 iterations; ``residual`` is the last entry.
    """
    if n_iter < 1:
        raise ValueError("n_iter >= 1 required")
    if isinstance(pert, ToralAutomorphism):
        pert = PerturbedToral(pert, np.zeros((0, pert.dim)), np.zeros((0, pert.dim)), np.zeros(0), 0.0)
    base = pert.base
    x = np.asarray(x.float if isinstance(x, TorusPoint) else x, dtype=float)
    back = [x]
    fwd = [x]
    for _ in range(n_iter + 1):
        back.append(pert.inverse(back[-1]))
        fwd.append(pert.map(fwd[-1]))

    def unstable_from(k: int) -> np.ndarray:
        q = base.unstable_basis
        for j in range(k, 0, -1):
            q, _ = np.linalg.qr(pert.derivative(back[j]) @ q)
        return q

    def stable_from(k: int) -> np.ndarray:
        q = base.stable_basis
        for j in range(k - 1, -1, -1):
            q, _ = np.linalg.qr(np.linalg.solve(pert.derivative(fwd[j]), q))
        return q

    es = [stable_from(k) for k in range(1, n_iter + 1)]
    eu = [unstable_from(k) for k in range(1, n_iter + 1)]
    history = [
        max(_subspace_gap(es[k], es[k - 1]), _subspace_gap(eu[k], eu[k - 1]))
        for k in range(1, n_iter)
    ]
    residual = history[-1] if history else 0.0
    if residual > tol:
        raise NoConvergence(f"splitting residual {residual:.3g} > {tol:g} after {n_iter} iterations")
    return SplittingEstimate(es[-1], eu[-1], residual, history)
