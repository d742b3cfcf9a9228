"""Standard systems and generators used by the CLI defaults and the tests."""

from __future__ import annotations

import cmath
import math

import numpy as np

from .cocycles import Generator, TrigTerm, coboundary_from, trig_smooth
from .lie_groups import MatrixGroup
from .torus import ToralAutomorphism, build_toral

CAT = ((2, 1), (1, 1))


def cat_map() -> ToralAutomorphism:
    return build_toral(CAT)


def diagonal_fixture() -> ToralAutomorphism:
    """Block-diagonal automorphism of T^4 with real stable eigenvalues of distinct moduli."""
    return build_toral([[2, 1, 0, 0], [1, 1, 0, 0], [0, 0, 3, 1], [0, 0, 2, 1]])


def companion(coeffs) -> list[list[int]]:
    """Companion matrix of x^d + c_{d-1} x^{d-1} + ... + c_0, coeffs = (c_0, ..., c_{d-1})."""
    d = len(coeffs)
    m = [[0] * d for _ in range(d)]
    for i in range(d - 1):
        m[i][i + 1] = 1
    m[d - 1] = [-int(c) for c in coeffs]
    return m


def _irrational_angle(theta: float, max_den: int = 24) -> bool:
    r = theta / math.pi
    return all(abs(r * q - round(r * q)) > 1e-6 for q in range(1, max_den + 1))


def search_conformal_quartics(box: int = 4):
    """Reciprocal quartics x^4 + a x^3 + b x^2 + a x + 1 whose stable eigenvalues are a complex pair.

    Kept: no eigenvalue within 1e-3 of the unit circle, stable pair with
    argument not a rational multiple of pi of small denominator.  Ordered by
    (|a| + |b|, a, b).
    """
    found = []
    for a in range(-box, box + 1):
        for b in range(-box, box + 1):
            roots = np.roots([1, a, b, a, 1])
            if np.any(np.abs(np.abs(roots) - 1) < 1e-3):
                continue
            stable = [z for z in roots if abs(z) < 1]
            if len(stable) != 2 or abs(stable[0].imag) < 1e-9:
                continue
            if not _irrational_angle(abs(cmath.phase(stable[0]))):
                continue
            found.append((abs(a) + abs(b), a, b))
    return [(a, b) for _, a, b in sorted(found)]


def conformal_fixture() -> ToralAutomorphism:
    """First hit of the reciprocal-quartic search: a 4x4 automorphism with a complex stable pair."""
    a, b = search_conformal_quartics()[0]
    return build_toral(companion((1, a, b, a)))


def sl2_potential(amp: float = 1.0) -> Generator:
    g = MatrixGroup("SL", 2)
    return trig_smooth(
        g,
        [TrigTerm((1, 0), "E", 0.3 * amp), TrigTerm((0, 1), "H", 0.2 * amp, 0.5), TrigTerm((1, 1), "F", 0.25 * amp)],
    )


def so3_potential() -> Generator:
    g = MatrixGroup("SO", 3)
    return trig_smooth(g, [TrigTerm((1, 0), "Lx", 0.4), TrigTerm((0, 1), "Ly", 0.3, 0.7), TrigTerm((1, -1), "Lz", 0.2)])


def heisenberg_potential() -> Generator:
    g = MatrixGroup("Heisenberg", 3)
    return trig_smooth(g, [TrigTerm((1, 0), "X", 0.3), TrigTerm((0, 1), "Y", 0.2, 0.3), TrigTerm((1, 1), "Z", 0.1)])


def diff_potential(F: int = 32, R: int = 256) -> Generator:
    """Rotation by 0.1 sin(2 pi x_1) plus a small non-rotation term."""
    from .circle import DiffGroup

    g = DiffGroup(F, R)
    return trig_smooth(g, [TrigTerm((1, 0), "rot", 0.1), TrigTerm((0, 1), "sin1", 0.05, 0.2)])


def coboundary_fixture(sys: ToralAutomorphism, psi: Generator) -> Generator:
    return coboundary_from(psi, sys)
