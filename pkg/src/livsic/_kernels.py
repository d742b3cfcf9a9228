"""Hot numeric kernels.

Each kernel has a numba-compiled version and a pure-numpy version with the
same signature.  The numba path is used when numba imports cleanly and the
environment variable ``LIVSIC_NUMBA`` is not set to ``0``.
"""

from __future__ import annotations

import os

import numpy as np

TWO_PI = 2.0 * np.pi

try:  # pragma: no cover - exercised implicitly
    import numba

    _HAVE_NUMBA = True
except ImportError:  # pragma: no cover
    numba = None
    _HAVE_NUMBA = False

USE_NUMBA = _HAVE_NUMBA and os.environ.get("LIVSIC_NUMBA", "1") != "0"


# ---------------------------------------------------------------------------
# chain products:  P[0] = I,  P[j+1] = M[j] @ P[j]
# ---------------------------------------------------------------------------
def chain_left_numpy(mats: np.ndarray) -> np.ndarray:
    n, k, _ = mats.shape
    out = np.empty((n + 1, k, k))
    out[0] = np.eye(k)
    for j in range(n):
        out[j + 1] = mats[j] @ out[j]
    return out


def chain_right_numpy(mats: np.ndarray) -> np.ndarray:
    """P[0] = I, P[j+1] = P[j] @ M[j]."""
    n, k, _ = mats.shape
    out = np.empty((n + 1, k, k))
    out[0] = np.eye(k)
    for j in range(n):
        out[j + 1] = out[j] @ mats[j]
    return out


def trig_series_numpy(coef: np.ndarray, x: np.ndarray, max_order: int) -> np.ndarray:
    """Evaluate Re sum_k coef[k] (2 pi i k)^m exp(2 pi i k x) for m = 0..max_order."""
    k = np.arange(coef.shape[0])
    phase = np.exp(1j * TWO_PI * np.outer(x, k))
    out = np.empty((max_order + 1, x.shape[0]))
    c = coef.astype(np.complex128)
    mult = 1j * TWO_PI * k
    for m in range(max_order + 1):
        out[m] = (phase @ c).real
        c = c * mult
    return out


if _HAVE_NUMBA:

    @numba.njit(cache=True)
    def chain_left_numba(mats):
        n, k, _ = mats.shape
        out = np.empty((n + 1, k, k))
        for a in range(k):
            for b in range(k):
                out[0, a, b] = 1.0 if a == b else 0.0
        for j in range(n):
            for a in range(k):
                for b in range(k):
                    s = 0.0
                    for c in range(k):
                        s += mats[j, a, c] * out[j, c, b]
                    out[j + 1, a, b] = s
        return out

    @numba.njit(cache=True)
    def chain_right_numba(mats):
        n, k, _ = mats.shape
        out = np.empty((n + 1, k, k))
        for a in range(k):
            for b in range(k):
                out[0, a, b] = 1.0 if a == b else 0.0
        for j in range(n):
            for a in range(k):
                for b in range(k):
                    s = 0.0
                    for c in range(k):
                        s += out[j, a, c] * mats[j, c, b]
                    out[j + 1, a, b] = s
        return out

    @numba.njit(cache=True)
    def trig_series_numba(coef, x, max_order):
        nk = coef.shape[0]
        nx = x.shape[0]
        out = np.zeros((max_order + 1, nx))
        for i in range(nx):
            step = np.exp(1j * TWO_PI * x[i])
            z = 1.0 + 0j
            for k in range(nk):
                term = coef[k] * z
                mult = 1j * TWO_PI * k
                for m in range(max_order + 1):
                    out[m, i] += term.real
                    term = term * mult
                z = z * step
        return out

else:  # pragma: no cover
    chain_left_numba = chain_left_numpy
    chain_right_numba = chain_right_numpy
    trig_series_numba = trig_series_numpy


def chain_left(mats: np.ndarray) -> np.ndarray:
    mats = np.ascontiguousarray(mats, dtype=np.float64)
    if USE_NUMBA:
        return chain_left_numba(mats)
    return chain_left_numpy(mats)


def chain_right(mats: np.ndarray) -> np.ndarray:
    mats = np.ascontiguousarray(mats, dtype=np.float64)
    if USE_NUMBA:
        return chain_right_numba(mats)
    return chain_right_numpy(mats)


def trig_series(coef: np.ndarray, x: np.ndarray, max_order: int = 0) -> np.ndarray:
    coef = np.ascontiguousarray(coef, dtype=np.complex128)
    x = np.ascontiguousarray(x, dtype=np.float64)
    if USE_NUMBA:
        return trig_series_numba(coef, x, max_order)
    return trig_series_numpy(coef, x, max_order)
