"""Target groups: vectors, matrix Lie groups, and the localization estimates.

Group elements are plain numpy arrays, batched along leading axes; the group
object knows how to multiply, invert, measure and renormalize them.  A thin
``GroupElement`` wrapper gives a scalar API with variant checking.

Distances
---------
* additive vectors: Euclidean.
* SO(n): geodesic angle of a^T b (bi-invariant, a true metric).
* DiagPos: Euclidean distance of the log-diagonals (abelian, a true metric).
* GL, SL, Heisenberg: Frobenius chordal |a - b|.  The left-invariant
  |log(a^{-1} b)| is not a metric on non-compact groups (it fails the
  triangle inequality for random SL(2) triples), so it is not used.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from . import _kernels
from .errors import LogBranchFailure, SingularInverse, VariantMismatch

RENORM_EVERY = 64
LOG_MARGIN = 1e-6


class AdditiveGroup:
    """R^k under addition."""

    commutative = True
    tag = "Additive"

    def __init__(self, k: int):
        self.k = k
        self.shape = (k,)

    def __repr__(self):
        return f"AdditiveGroup({self.k})"

    def __eq__(self, other):
        return isinstance(other, AdditiveGroup) and other.k == self.k

    def __hash__(self):
        return hash(("add", self.k))

    def identity(self):
        return np.zeros(self.k)

    def mul(self, a, b):
        return np.asarray(a) + np.asarray(b)

    def inv(self, a):
        return -np.asarray(a)

    def dist(self, a, b):
        return np.linalg.norm(np.asarray(a) - np.asarray(b), axis=-1)

    def exp(self, v):
        return np.asarray(v, dtype=float)

    def log(self, g):
        return np.asarray(g, dtype=float)

    def project(self, g):
        return np.asarray(g, dtype=float)

    def basis(self, name: str):
        i = int(name.lstrip("e"))
        v = np.zeros(self.k)
        v[i] = 1.0
        return v

    def chain(self, values):
        """Prefix sums: out[0] = 0, out[j+1] = values[j] + out[j]."""
        out = np.zeros((len(values) + 1, self.k))
        np.cumsum(values, axis=0, out=out[1:])
        return out

    def op_norm(self, g):
        return np.ones(np.shape(g)[:-1])


class MatrixGroup:
    """A matrix Lie group with tag in {GL, SL, SO, DiagPos, Heisenberg}."""

    TAGS = ("GL", "SL", "SO", "DiagPos", "Heisenberg")

    def __init__(self, tag: str, n: int):
        if tag not in self.TAGS:
            raise ValueError(f"unknown matrix group tag {tag!r}")
        if tag == "Heisenberg" and n != 3:
            raise ValueError("Heisenberg group is 3x3")
        self.tag = tag
        self.n = n
        self.shape = (n, n)
        self.commutative = tag == "DiagPos" or (tag == "SO" and n == 2)

    def __repr__(self):
        return f"MatrixGroup({self.tag!r}, {self.n})"

    def __eq__(self, other):
        return isinstance(other, MatrixGroup) and (other.tag, other.n) == (self.tag, self.n)

    def __hash__(self):
        return hash((self.tag, self.n))

    # -- algebra basis ------------------------------------------------------
    def basis(self, name: str) -> np.ndarray:
        n = self.n
        named = {}
        if self.tag == "SL" and n == 2:
            named = {
                "H": np.array([[1.0, 0.0], [0.0, -1.0]]),
                "E": np.array([[0.0, 1.0], [0.0, 0.0]]),
                "F": np.array([[0.0, 0.0], [1.0, 0.0]]),
            }
        elif self.tag == "SO" and n == 3:
            named = {
                "Lx": np.array([[0.0, 0.0, 0.0], [0.0, 0.0, -1.0], [0.0, 1.0, 0.0]]),
                "Ly": np.array([[0.0, 0.0, 1.0], [0.0, 0.0, 0.0], [-1.0, 0.0, 0.0]]),
                "Lz": np.array([[0.0, -1.0, 0.0], [1.0, 0.0, 0.0], [0.0, 0.0, 0.0]]),
            }
        elif self.tag == "SO" and n == 2:
            named = {"J": np.array([[0.0, -1.0], [1.0, 0.0]])}
        elif self.tag == "Heisenberg":
            named = {
                "X": np.array([[0.0, 1.0, 0.0], [0.0, 0.0, 0.0], [0.0, 0.0, 0.0]]),
                "Y": np.array([[0.0, 0.0, 0.0], [0.0, 0.0, 1.0], [0.0, 0.0, 0.0]]),
                "Z": np.array([[0.0, 0.0, 1.0], [0.0, 0.0, 0.0], [0.0, 0.0, 0.0]]),
            }
        if name in named:
            return named[name]
        if name.startswith("D") and self.tag in ("DiagPos", "GL"):
            m = np.zeros((n, n))
            i = int(name[1:])
            m[i, i] = 1.0
            return m
        if name.startswith("E") and len(name) == 3:
            i, j = int(name[1]), int(name[2])
            m = np.zeros((n, n))
            m[i, j] = 1.0
            if self.tag == "SL" and i == j:
                raise ValueError("diagonal unit is not traceless")
            if self.tag == "SO":
                m[j, i] = -1.0
            return m
        raise ValueError(f"no algebra basis element {name!r} for {self}")

    # -- group law --------------------------------------------------------------
    def identity(self) -> np.ndarray:
        return np.eye(self.n)

    def mul(self, a, b):
        return np.matmul(a, b)

    def inv(self, a):
        a = np.asarray(a, dtype=float)
        if self.tag == "SO":
            return np.swapaxes(a, -1, -2)
        if self.tag == "DiagPos":
            d = np.diagonal(a, axis1=-2, axis2=-1)
            if np.any(d <= 0):
                raise SingularInverse("non-positive diagonal entry")
            out = np.zeros_like(a)
            idx = np.arange(self.n)
            out[..., idx, idx] = 1.0 / d
            return out
        if self.tag == "Heisenberg":
            out = np.broadcast_to(np.eye(3), a.shape).copy()
            x, y, z = a[..., 0, 1], a[..., 1, 2], a[..., 0, 2]
            out[..., 0, 1] = -x
            out[..., 1, 2] = -y
            out[..., 0, 2] = x * y - z
            return out
        if self.n == 2:
            det = a[..., 0, 0] * a[..., 1, 1] - a[..., 0, 1] * a[..., 1, 0]
            if np.any(np.abs(det) < 1e-300):
                raise SingularInverse("singular 2x2 matrix")
            out = np.empty_like(a)
            out[..., 0, 0] = a[..., 1, 1] / det
            out[..., 1, 1] = a[..., 0, 0] / det
            out[..., 0, 1] = -a[..., 0, 1] / det
            out[..., 1, 0] = -a[..., 1, 0] / det
            return out
        try:
            return np.linalg.inv(a)
        except np.linalg.LinAlgError as exc:
            raise SingularInverse(str(exc)) from exc

    def dist(self, a, b):
        a = np.asarray(a, dtype=float)
        b = np.asarray(b, dtype=float)
        if self.tag == "SO":
            return self.rotation_angle(np.matmul(np.swapaxes(a, -1, -2), b))
        if self.tag == "DiagPos":
            da = np.log(np.diagonal(a, axis1=-2, axis2=-1))
            db = np.log(np.diagonal(b, axis1=-2, axis2=-1))
            return np.linalg.norm(db - da, axis=-1)
        return np.linalg.norm(a - b, axis=(-2, -1))

    def rotation_angle(self, r):
        r = np.asarray(r, dtype=float)
        if self.n == 2:
            return np.abs(np.arctan2(r[..., 1, 0] - r[..., 0, 1], r[..., 0, 0] + r[..., 1, 1]))
        if self.n == 3:
            skew = 0.5 * (r - np.swapaxes(r, -1, -2))
            s = np.linalg.norm(skew, axis=(-2, -1)) / math.sqrt(2.0)
            c = 0.5 * (np.trace(r, axis1=-2, axis2=-1) - 1.0)
            return np.arctan2(s, c)
        flat = r.reshape(-1, self.n, self.n)
        out = np.array([np.linalg.norm(_logm(m)) / math.sqrt(2.0) for m in flat])
        return out.reshape(r.shape[:-2])

    # -- exponential / logarithm -------------------------------------------------
    def exp(self, v):
        v = np.asarray(v, dtype=float)
        if self.tag == "Heisenberg":
            return np.eye(3) + v + 0.5 * np.matmul(v, v)
        if self.tag == "DiagPos":
            out = np.zeros_like(v)
            idx = np.arange(self.n)
            out[..., idx, idx] = np.exp(v[..., idx, idx])
            return out
        if self.n == 2 and self.tag in ("SL", "SO"):
            return _exp_sl2(v)
        if self.tag == "SO" and self.n == 3:
            return _exp_so3(v)
        return scipy.linalg.expm(v)

    def log(self, g):
        """Principal logarithm; raises LogBranchFailure near the negative real axis."""
        g = np.asarray(g, dtype=float)
        if self.tag == "DiagPos":
            out = np.zeros_like(g)
            idx = np.arange(self.n)
            d = g[..., idx, idx]
            if np.any(d <= 0):
                raise LogBranchFailure("non-positive diagonal")
            out[..., idx, idx] = np.log(d)
            return out
        if self.tag == "Heisenberg":
            e = g - np.eye(3)
            return e - 0.5 * np.matmul(e, e)
        flat = g.reshape(-1, self.n, self.n)
        out = np.array([_logm(m) for m in flat])
        return out.reshape(g.shape)

    # -- renormalization ---------------------------------------------------------
    def project(self, g):
        """Snap a drifted element back onto the group (idempotent)."""
        g = np.asarray(g, dtype=float)
        if self.tag == "SL":
            det = np.linalg.det(g)
            if np.any(det <= 0):
                raise SingularInverse("SL element with non-positive determinant")
            return g / det[..., None, None] ** (1.0 / self.n)
        if self.tag == "SO":
            u, _, vt = np.linalg.svd(g)
            return np.matmul(u, vt)
        if self.tag == "DiagPos":
            out = np.zeros_like(g)
            idx = np.arange(self.n)
            out[..., idx, idx] = np.abs(g[..., idx, idx])
            return out
        if self.tag == "Heisenberg":
            out = np.broadcast_to(np.eye(3), g.shape).copy()
            for i, j in ((0, 1), (1, 2), (0, 2)):
                out[..., i, j] = g[..., i, j]
            return out
        return g

    def chain(self, values):
        """Prefix products out[j] = values[j-1] ... values[0], renormalized every 64 steps."""
        values = np.asarray(values, dtype=float)
        n = len(values)
        out = np.empty((n + 1, self.n, self.n))
        out[0] = np.eye(self.n)
        needs = self.tag in ("SL", "SO")
        for start in range(0, n, RENORM_EVERY):
            block = values[start : start + RENORM_EVERY]
            local = _kernels.chain_left(block)
            seg = np.matmul(local[1:], out[start])
            if needs:
                seg[-1] = self.project(seg[-1])
            out[start + 1 : start + 1 + len(block)] = seg
        return out

    def op_norm(self, g):
        return np.linalg.norm(np.asarray(g, dtype=float), ord=2, axis=(-2, -1))


def _exp_sl2(v):
    # X^2 = -det(X) I for traceless 2x2 X (trace is split off first)
    tr = 0.5 * (v[..., 0, 0] + v[..., 1, 1])
    x = v - tr[..., None, None] * np.eye(2)
    delta = -(x[..., 0, 0] * x[..., 1, 1] - x[..., 0, 1] * x[..., 1, 0])
    s = np.sqrt(np.abs(delta))
    with np.errstate(invalid="ignore", divide="ignore"):
        c = np.where(delta >= 0, np.cosh(s), np.cos(s))
        sinc = np.where(
            s < 1e-8,
            1.0 + delta / 6.0,
            np.where(delta >= 0, np.sinh(s), np.sin(s)) / np.where(s == 0, 1.0, s),
        )
    out = c[..., None, None] * np.eye(2) + sinc[..., None, None] * x
    return out * np.exp(tr)[..., None, None]


def _exp_so3(v):
    w = np.stack([v[..., 2, 1], v[..., 0, 2], v[..., 1, 0]], axis=-1)
    th = np.linalg.norm(w, axis=-1)
    small = th < 1e-6
    a = np.where(small, 1.0 - th**2 / 6.0, np.sin(th) / np.where(small, 1.0, th))
    b = np.where(small, 0.5 - th**2 / 24.0, (1.0 - np.cos(th)) / np.where(small, 1.0, th) ** 2)
    k = v
    return np.eye(3) + a[..., None, None] * k + b[..., None, None] * np.matmul(k, k)


def _logm(m: np.ndarray) -> np.ndarray:
    w = np.linalg.eigvals(m)
    bad = (np.abs(w.imag) <= LOG_MARGIN) & (w.real <= LOG_MARGIN)
    if np.any(bad):
        raise LogBranchFailure(f"spectrum {w} touches the closed negative real axis")
    out = scipy.linalg.logm(m, disp=False)[0]
    return np.real(out)


# ---------------------------------------------------------------------------
# scalar API
# ---------------------------------------------------------------------------
@dataclass(frozen=True, eq=False)
class GroupElement:
    group: object
    value: object

    def _check(self, other: "GroupElement"):
        if not isinstance(other, GroupElement) or other.group != self.group:
            raise VariantMismatch(f"{self.group} vs {getattr(other, 'group', type(other))}")

    def __mul__(self, other: "GroupElement") -> "GroupElement":
        return mul(self, other)

    def inv(self) -> "GroupElement":
        return inv(self)

    def dist(self, other: "GroupElement") -> float:
        return dist(self, other)


def identity(group) -> GroupElement:
    return GroupElement(group, group.identity())


def mul(g: GroupElement, h: GroupElement) -> GroupElement:
    g._check(h)
    return GroupElement(g.group, g.group.mul(g.value, h.value))


def inv(g: GroupElement) -> GroupElement:
    return GroupElement(g.group, g.group.inv(g.value))


def dist(g: GroupElement, h: GroupElement) -> float:
    g._check(h)
    return float(g.group.dist(g.value, h.value))


def exp_map(group, v) -> GroupElement:
    return GroupElement(group, group.exp(v))


def log_map(g: GroupElement):
    return g.group.log(g.value)


def parse_group(spec: str):
    """'SL2', 'SO3', 'GL3', 'DiagPos2', 'Heisenberg', 'R3' -> group object."""
    s = spec.strip()
    if s.lower().startswith("heis"):
        return MatrixGroup("Heisenberg", 3)
    if s in ("Diff", "DiffS1", "Diff(S1)"):
        from .circle import DiffGroup

        return DiffGroup()
    for tag in ("DiagPos", "GL", "SL", "SO"):
        if s.startswith(tag):
            return MatrixGroup(tag, int(s[len(tag):]))
    if s.startswith("R"):
        return AdditiveGroup(int(s[1:]))
    raise ValueError(f"unknown group spec {spec!r}")


# ---------------------------------------------------------------------------
# localization
# ---------------------------------------------------------------------------
@dataclass(frozen=True)
class LocalizationReport:
    rho: float
    metric_kind: str
    holds_hyperbolicity: bool
    margin: float
    lam: float
    alpha: float

    def as_dict(self) -> dict:
        return {
            "rho": self.rho,
            "metric_kind": self.metric_kind,
            "holds_hyperbolicity": self.holds_hyperbolicity,
            "margin": self.margin,
            "lambda": self.lam,
            "alpha": self.alpha,
        }


def _report(rho: float, kind: str, lam: float, alpha: float) -> LocalizationReport:
    margin = math.log(rho) + alpha * math.log(lam)
    return LocalizationReport(float(rho), kind, bool(margin < 0), float(margin), lam, alpha)


def rho_matrix_norm(gen, sample_points: np.ndarray, lam: float, alpha: float | None = None) -> LocalizationReport:
    """rho^2 = max over samples of max(|eta(x)|, |eta(x)^{-1}|) (operator 2-norm).

    For commutative targets no localization is needed; the report then has
    rho = 1 and metric_kind 'commutative'.
    """
    alpha = gen.alpha if alpha is None else alpha
    group = gen.group
    if getattr(group, "commutative", False):
        return _report(1.0, "commutative", lam, alpha)
    vals = gen.eval(sample_points)
    m = max(float(np.max(group.op_norm(vals))), float(np.max(group.op_norm(group.inv(vals)))))
    return _report(math.sqrt(m), "matrix_norm", lam, alpha)


def rho_right_invariant(gen, sample_points: np.ndarray, lam: float, alpha: float | None = None, h: float = 1e-6) -> LocalizationReport:
    """Estimate rho = max |L_eta|_1 for a right-invariant metric.

    For a right-invariant metric the derivative of left translation by g is
    xi -> Ad_g xi at every base point; its norm is estimated by finite
    differences of t -> log(g exp(t xi) g^{-1}) / t over an algebra basis.
    This is an estimate, not a certified bound.
    """
    alpha = gen.alpha if alpha is None else alpha
    group = gen.group
    if getattr(group, "commutative", False):
        return _report(1.0, "commutative", lam, alpha)
    vals = gen.eval(sample_points)
    n = group.n
    basis = []
    for i in range(n):
        for j in range(n):
            e = np.zeros((n, n))
            e[i, j] = 1.0
            basis.append(e)
    best = 1.0
    for g in np.concatenate([vals, group.inv(vals)]):
        ginv = np.linalg.inv(g)
        cols = []
        for e in basis:
            moved = g @ scipy.linalg.expm(h * e) @ ginv
            cols.append(((moved - np.eye(n)) / h).ravel())
        best = max(best, float(np.linalg.norm(np.array(cols).T, 2)))
    return _report(best, "right_invariant", lam, alpha)


def delta_operator_norm(phi_x_n: np.ndarray, phi_y_n: np.ndarray) -> float:
    """|Phi(x,n)^{-1}| |Phi(y,n)|, the Lipschitz bound of g -> Phi^{-1}(x,n) g Phi(y,n)."""
    a = np.linalg.norm(np.linalg.inv(phi_x_n), 2)
    b = np.linalg.norm(phi_y_n, 2)
    return float(a * b)
