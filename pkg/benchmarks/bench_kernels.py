"""Time the numba kernels against their numpy fallbacks.

    python3 benchmarks/bench_kernels.py

Both implementations are called directly, so the LIVSIC_NUMBA flag does not
matter here; the first numba call (compilation) is excluded from the timing.
"""

import timeit

import numpy as np

from livsic import _kernels as K


def bench(label, fast, slow, args, number=20):
    fast(*args)
    t_fast = min(timeit.repeat(lambda: fast(*args), number=number, repeat=3)) / number
    t_slow = min(timeit.repeat(lambda: slow(*args), number=number, repeat=3)) / number
    print(f"{label:<28} numba {t_fast * 1e3:9.3f} ms   numpy {t_slow * 1e3:9.3f} ms   speedup {t_slow / t_fast:6.1f}x")


def main():
    if not K._HAVE_NUMBA:
        print("numba is not installed; nothing to compare")
        return
    rng = np.random.default_rng(0)
    for n, k in ((1000, 2), (16000, 2), (16000, 3)):
        mats = rng.normal(size=(n, k, k)) / np.sqrt(k)
        bench(f"chain_left n={n} k={k}", K.chain_left_numba, K.chain_left_numpy, (mats,))
        bench(f"chain_right n={n} k={k}", K.chain_right_numba, K.chain_right_numpy, (mats,))
    for F, R in ((32, 256), (64, 1024)):
        coef = rng.normal(size=F + 1) + 1j * rng.normal(size=F + 1)
        x = rng.random(R)
        bench(f"trig_series F={F} R={R}", K.trig_series_numba, K.trig_series_numpy, (coef, x, 3))


if __name__ == "__main__":
    main()
