"""Periodic points of toral automorphisms and the exact closing lemma."""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from . import intlinalg as il
from .errors import AmbiguousLatticeShift, NotClose, OrbitBudgetExceeded
from .torus import (
    ToralAutomorphism,
    TorusPoint,
    apply,
    stable_projection,
    torus_distance,
)

DEFAULT_EPS0 = 0.05
DEFAULT_ORBIT_CAP = 200_000


@dataclass(frozen=True)
class PeriodicOrbit:
    points: tuple[TorusPoint, ...]
    period: int

    @property
    def representative(self) -> TorusPoint:
        return self.points[0]

    def floats(self) -> np.ndarray:
        return np.array([p.float for p in self.points])


def _power_minus_identity(sys: ToralAutomorphism, n: int) -> il.IntMatrix:
    an = sys.power(n)
    return [[an[i][j] - (i == j) for j in range(sys.dim)] for i in range(sys.dim)]


def count_periodic(sys: ToralAutomorphism, n: int) -> int:
    """Number of points with f^n x = x, i.e. |det(A^n - I)|."""
    if n < 1:
        raise ValueError("n >= 1 required")
    return abs(il.det(_power_minus_identity(sys, n)))


def count_minimal(sys: ToralAutomorphism, n: int) -> int:
    """Number of points of minimal period exactly n (Moebius inversion)."""
    return sum(_mobius(n // m) * count_periodic(sys, m) for m in range(1, n + 1) if n % m == 0)


def _mobius(n: int) -> int:
    result, p = 1, 2
    while p * p <= n:
        if n % p == 0:
            n //= p
            if n % p == 0:
                return 0
            result = -result
        p += 1
    return -result if n > 1 else result


def periodic_numerators(sys: ToralAutomorphism, n: int) -> tuple[int, list[tuple[int, ...]]]:
    """All solutions of (A^n - I) x = 0 mod Z^d as integer numerators over q.

    With U (A^n - I) V = diag(d_i), the solutions are x = V y with y_i in
    (1/d_i) Z, so every solution has denominator dividing q = max d_i.
    """
    m = _power_minus_identity(sys, n)
    _, diag, v = il.smith_normal_form(m)
    if any(di == 0 for di in diag):
        raise ValueError("A^n - I is singular; system is not hyperbolic")
    q = diag[-1]
    d = sys.dim
    pts = set()
    for ks in itertools.product(*[range(di) for di in diag]):
        y = [ks[i] * (q // diag[i]) for i in range(d)]
        x = tuple(c % q for c in il.matvec(v, y))
        pts.add(x)
    return q, sorted(pts)


def _minimal_period_int(sys: ToralAutomorphism, a: tuple[int, ...], q: int, n: int) -> int:
    mat = sys.int_matrix
    cur = a
    for m in range(1, n + 1):
        cur = tuple(sum(r[i] * cur[i] for i in range(sys.dim)) % q for r in mat)
        if cur == a:
            return m
    raise AssertionError("point is not periodic with the stated period")


def enumerate_periodic(
    sys: ToralAutomorphism, n_max: int, cap: int = DEFAULT_ORBIT_CAP
) -> list[PeriodicOrbit]:
    """Every periodic orbit with minimal period <= n_max, exact and ordered.

    Orbits are sorted by (period, representative); each orbit starts at its
    lexicographically smallest point and lists the forward orbit from there.
    """
    if n_max < 1:
        raise ValueError("n_max >= 1 required")
    total = sum(count_periodic(sys, n) for n in range(1, n_max + 1))
    if total > cap:
        raise OrbitBudgetExceeded(f"{total} periodic points up to period {n_max} exceed cap {cap}")
    mat = sys.int_matrix
    d = sys.dim
    orbits: list[PeriodicOrbit] = []
    for n in range(1, n_max + 1):
        q, nums = periodic_numerators(sys, n)
        expected = count_periodic(sys, n)
        if len(nums) != expected:
            raise AssertionError(f"enumeration found {len(nums)} points, formula says {expected}")
        seen: set[tuple[int, ...]] = set()
        found = []
        for a in nums:
            if a in seen:
                continue
            orb = [a]
            cur = a
            while True:
                cur = tuple(sum(r[i] * cur[i] for i in range(d)) % q for r in mat)
                if cur == a:
                    break
                orb.append(cur)
            seen.update(orb)
            if len(orb) != n:
                continue  # minimal period is a proper divisor; listed earlier
            start = min(range(n), key=lambda i: tuple(Fraction(c, q) for c in orb[i]))
            orb = orb[start:] + orb[:start]
            found.append(
                PeriodicOrbit(tuple(TorusPoint(tuple(Fraction(c, q) for c in p), "rational") for p in orb), n)
            )
        found.sort(key=lambda o: o.representative.as_fractions())
        orbits.extend(found)
    return orbits


def orbit_points_json(orbit: PeriodicOrbit) -> dict:
    return {
        "period": orbit.period,
        "points": [
            {
                "numerator": [v.numerator for v in p.as_fractions()],
                "denominator": [v.denominator for v in p.as_fractions()],
            }
            for p in orbit.points
        ],
    }


# ---------------------------------------------------------------------------
# closing lemma
# ---------------------------------------------------------------------------
@dataclass(frozen=True)
class ClosingResult:
    p: TorusPoint
    z: TorusPoint
    K_used: float
    delta: float
    n: int
    bounds_ok: tuple[bool, bool, bool]
    dist_x_p: float
    dist_fnx_p: float
    messenger_residual: float
    s: float = 0.0
    Delta: float = 0.0


def closing_constant(sys: ToralAutomorphism, n: int) -> float:
    """max(|(A^n - I)^{-1}|, |A^n (A^n - I)^{-1}|) in the Euclidean operator norm.

    The first factor bounds d(x, p), the second d(f^n x, p).  The inverse is
    formed exactly (A^n - I is badly conditioned in floats for large n) and
    A^n (A^n - I)^{-1} = I + (A^n - I)^{-1}.
    """
    inv_exact = il.inverse_rational(_power_minus_identity(sys, n))
    inv = np.array([[float(v) for v in row] for row in inv_exact])
    return float(max(np.linalg.norm(inv, 2), np.linalg.norm(np.eye(sys.dim) + inv, 2)))


def uniform_closing_bound(sys: ToralAutomorphism, n: int) -> float:
    """Spectral bound on |(A^n - I)^{-1}| in the adapted metric: max_i 1/| |mu_i|^n - 1 |."""
    return float(np.max(1.0 / np.abs(np.abs(sys.eigenvalues) ** n - 1.0)))


def closing_point(
    sys: ToralAutomorphism, x: TorusPoint, n: int, eps0: float = DEFAULT_EPS0
) -> ClosingResult:
    """Shadow the near-return f^n x ~ x by the exact periodic point p.

    With f^n x - x = delta + m (m the per-coordinate nearest lattice vector),
    p = x - (A^n - I)^{-1} delta solves (A^n - I) p = m exactly, so A^n p = p
    mod Z^d.  The messenger z = p + P^s(x - p) lies on the stable leaf of p
    and the unstable leaf of x.
    """
    if n == 0:
        raise ValueError("n != 0 required")
    if x.mode != "rational":
        x = TorusPoint(x.as_fractions(), "rational")
    xs = list(x.exact)
    fnx = list(apply(sys, x, n).exact)
    w = [a - b for a, b in zip(fnx, xs)]
    m = []
    delta = []
    for wi in w:
        frac = wi - (wi // 1)
        if frac == Fraction(1, 2):
            raise AmbiguousLatticeShift("return residual has a half-integer coordinate")
        mi = round(wi)
        m.append(mi)
        delta.append(wi - mi)
    dist = float(np.sqrt(sum(float(v) ** 2 for v in delta)))
    if not dist < eps0:
        raise NotClose(f"d(f^n x, x) = {dist:.4g} >= eps0 = {eps0}")
    mat = _power_minus_identity(sys, n)
    corr = il.solve_rational(mat, delta)
    p_lift = [a - c for a, c in zip(xs, corr)]
    p = TorusPoint(tuple(p_lift), "rational")
    if apply(sys, p, n) != p:
        raise AssertionError("closing point failed exact periodicity")
    diff = np.array([float(a - b) for a, b in zip(xs, p_lift)])
    ds, du = stable_projection(sys, diff)
    z_lift = np.array([float(v) for v in p_lift]) + ds
    z = TorusPoint.from_float(z_lift % 1.0)
    # residuals with lifted representatives: z - p must have no unstable part,
    # z - x no stable part
    zp_s, zp_u = stable_projection(sys, z_lift - np.array([float(v) for v in p_lift]))
    zx_s, zx_u = stable_projection(sys, z_lift - np.array([float(v) for v in xs]))
    resid = float(max(np.linalg.norm(zp_u), np.linalg.norm(zx_s)))
    K = closing_constant(sys, n)
    # rounding guard for the float products below
    K_used = K * (1 + 1e-12)
    d_xp = torus_distance(x, p)
    d_fp = torus_distance(np.array([float(v) for v in fnx]) % 1.0, p.float)
    ok = (d_xp <= K_used * dist, d_fp <= K_used * dist, resid <= 1e-10)
    return ClosingResult(p, z, K_used, dist, n, ok, d_xp, d_fp, resid)


def suspension_closing(
    sys: ToralAutomorphism,
    x: TorusPoint,
    s: float,
    T: float,
    eps0: float = DEFAULT_EPS0,
) -> ClosingResult:
    """Closing lemma for the unit-roof suspension flow.

    The flow moves only along the fiber, so the return time is rounded to the
    integer period n and Delta = n - T (zero for integer T).
    """
    n = int(round(T))
    Delta = n - T
    res = closing_point(sys, x, n, eps0=np.sqrt(max(eps0**2 - Delta**2, 0.0)) if Delta else eps0)
    ret = float(np.hypot(res.delta, Delta))
    if not abs(Delta) <= res.K_used * ret + 1e-15:
        raise AssertionError("period correction exceeds closing bound")
    return ClosingResult(
        res.p, res.z, res.K_used, ret, n, res.bounds_ok, res.dist_x_p, res.dist_fnx_p,
        res.messenger_residual, s=float(s), Delta=float(Delta),
    )
