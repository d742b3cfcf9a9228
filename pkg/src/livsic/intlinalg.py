"""Exact integer / rational linear algebra on small dense matrices.

Matrices are lists of lists of Python ints (or Fractions); nothing here
touches floating point.
"""

from __future__ import annotations

from fractions import Fraction
from functools import reduce
from math import gcd
from typing import Sequence

IntMatrix = list[list[int]]


def as_int_matrix(m: Sequence[Sequence]) -> IntMatrix:
    out = []
    for row in m:
        r = []
        for v in row:
            iv = int(round(float(v))) if not isinstance(v, int) else v
            if iv != v:
                raise ValueError(f"non-integer entry {v!r}")
            r.append(iv)
        out.append(r)
    n = len(out)
    if any(len(r) != n for r in out):
        raise ValueError("matrix must be square")
    return out


def identity(n: int) -> IntMatrix:
    return [[int(i == j) for j in range(n)] for i in range(n)]


def matmul(a, b):
    n, m, p = len(a), len(b), len(b[0])
    return [[sum(a[i][k] * b[k][j] for k in range(m)) for j in range(p)] for i in range(n)]


def matvec(a, v):
    return [sum(a_ij * v_j for a_ij, v_j in zip(row, v)) for row in a]


def matpow(a: IntMatrix, n: int) -> IntMatrix:
    """a**n for n >= 0 by repeated squaring."""
    if n < 0:
        raise ValueError("use inverse() for negative powers")
    result = identity(len(a))
    base = [row[:] for row in a]
    while n:
        if n & 1:
            result = matmul(result, base)
        base = matmul(base, base)
        n >>= 1
    return result


def det(a) -> int:
    """Bareiss fraction-free determinant."""
    n = len(a)
    m = [list(row) for row in a]
    sign = 1
    prev = 1
    for k in range(n - 1):
        if m[k][k] == 0:
            for i in range(k + 1, n):
                if m[i][k] != 0:
                    m[k], m[i] = m[i], m[k]
                    sign = -sign
                    break
            else:
                return 0
        for i in range(k + 1, n):
            for j in range(k + 1, n):
                m[i][j] = (m[i][j] * m[k][k] - m[i][k] * m[k][j]) // prev
        prev = m[k][k]
    return sign * m[n - 1][n - 1]


def solve_rational(a, b):
    """Solve a x = b exactly over the rationals (a square, nonsingular)."""
    n = len(a)
    m = [[Fraction(v) for v in row] + [Fraction(bv)] for row, bv in zip(a, b)]
    for col in range(n):
        piv = next((r for r in range(col, n) if m[r][col] != 0), None)
        if piv is None:
            raise ZeroDivisionError("singular matrix")
        m[col], m[piv] = m[piv], m[col]
        pv = m[col][col]
        m[col] = [v / pv for v in m[col]]
        for r in range(n):
            if r != col and m[r][col] != 0:
                f = m[r][col]
                m[r] = [vr - f * vc for vr, vc in zip(m[r], m[col])]
    return [m[i][n] for i in range(n)]


def inverse_rational(a):
    n = len(a)
    cols = [solve_rational(a, [int(i == j) for i in range(n)]) for j in range(n)]
    return [[cols[j][i] for j in range(n)] for i in range(n)]


def inverse_unimodular(a: IntMatrix) -> IntMatrix:
    inv = inverse_rational(a)
    out = [[int(v) for v in row] for row in inv]
    if any(v.denominator != 1 for row in inv for v in row):
        raise ValueError("matrix is not unimodular")
    return out


def smith_normal_form(a: IntMatrix) -> tuple[IntMatrix, list[int], IntMatrix]:
    """Return (U, diag, V) with U @ a @ V = diag(diag), U and V unimodular.

    The diagonal entries are non-negative and each divides the next.
    """
    n = len(a)
    m = [list(row) for row in a]
    u = identity(n)
    v = identity(n)

    def swap_rows(i, j):
        m[i], m[j] = m[j], m[i]
        u[i], u[j] = u[j], u[i]

    def swap_cols(i, j):
        for row in m:
            row[i], row[j] = row[j], row[i]
        for row in v:
            row[i], row[j] = row[j], row[i]

    def add_row(dst, src, f):  # row_dst += f * row_src
        m[dst] = [x + f * y for x, y in zip(m[dst], m[src])]
        u[dst] = [x + f * y for x, y in zip(u[dst], u[src])]

    def add_col(dst, src, f):
        for row in m:
            row[dst] += f * row[src]
        for row in v:
            row[dst] += f * row[src]

    for t in range(n):
        while True:
            nz = [(abs(m[i][j]), i, j) for i in range(t, n) for j in range(t, n) if m[i][j]]
            if not nz:
                break
            _, pi, pj = min(nz)
            swap_rows(t, pi)
            swap_cols(t, pj)
            p = m[t][t]
            done = True
            for i in range(t + 1, n):
                q = m[i][t] // p
                if q:
                    add_row(i, t, -q)
                if m[i][t]:
                    done = False
            for j in range(t + 1, n):
                q = m[t][j] // p
                if q:
                    add_col(j, t, -q)
                if m[t][j]:
                    done = False
            if not done:
                continue
            # enforce divisibility of the trailing block by the pivot
            bad = next(
                ((i, j) for i in range(t + 1, n) for j in range(t + 1, n) if m[i][j] % p),
                None,
            )
            if bad is None:
                break
            add_row(t, bad[0], 1)
        if m[t][t] < 0:
            m[t] = [-x for x in m[t]]
            u[t] = [-x for x in u[t]]
    return u, [m[i][i] for i in range(n)], v


def lcm(values) -> int:
    return reduce(lambda a, b: a * b // gcd(a, b), values, 1)
