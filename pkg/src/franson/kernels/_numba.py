"""numba versions of the hot loops. Same signatures as the numpy module."""

import functools
import math
import os

import numba
import numpy as np
from numba import prange

# the default search tries TBB first and warns when the installed TBB is too old
if "NUMBA_THREADING_LAYER_PRIORITY" not in os.environ:
    numba.config.THREADING_LAYER_PRIORITY = ["omp", "workqueue", "tbb"]

jit = functools.partial(numba.njit, cache=True)


@jit(parallel=True)
def _cos_sums(x, h, taus):
    out = np.empty(taus.shape[0])
    for t in prange(taus.shape[0]):
        tau = taus[t]
        acc = 0.0
        for k in range(x.shape[0]):
            acc += h[k] * math.cos(x[k] * tau)
        out[t] = acc
    return out


def cos_sums(x, h, taus):
    return _cos_sums(np.ascontiguousarray(x, dtype=np.float64),
                     np.ascontiguousarray(h, dtype=np.float64),
                     np.ascontiguousarray(taus, dtype=np.float64))


@jit
def _window_histogram(t1, t2, window, width):
    kmax = window // width
    counts = np.zeros(2 * kmax + 1, dtype=np.int64)
    n2 = t2.shape[0]
    lo = 0
    for i in range(t1.shape[0]):
        t = t1[i]
        while lo < n2 and t2[lo] < t - window:
            lo += 1
        j = lo
        while j < n2 and t2[j] <= t + window:
            dt = t2[j] - t
            k = (2 * dt + width) // (2 * width)
            if -kmax <= k <= kmax:
                counts[k + kmax] += 1
            j += 1
    return counts


def window_histogram(t1, t2, window, width):
    return _window_histogram(np.ascontiguousarray(t1, dtype=np.int64),
                             np.ascontiguousarray(t2, dtype=np.int64),
                             np.int64(window), np.int64(width))


@jit
def _pair_nearest(t1, t2, window):
    n1 = t1.shape[0]
    n2 = t2.shape[0]
    used = np.zeros(n2, dtype=np.bool_)
    out1 = np.empty(min(n1, n2), dtype=np.int64)
    out2 = np.empty(min(n1, n2), dtype=np.int64)
    m = 0
    lo = 0
    for i in range(n1):
        t = t1[i]
        while lo < n2 and (used[lo] or t2[lo] < t - window):
            lo += 1
        best = -1
        best_d = 0
        j = lo
        while j < n2 and t2[j] <= t + window:
            if not used[j]:
                d = abs(t2[j] - t)
                if best < 0 or d < best_d:
                    best = j
                    best_d = d
            j += 1
        if best >= 0:
            used[best] = True
            out1[m] = i
            out2[m] = best
            m += 1
    return out1[:m].copy(), out2[:m].copy()


def pair_nearest(t1, t2, window):
    return _pair_nearest(np.ascontiguousarray(t1, dtype=np.int64),
                         np.ascontiguousarray(t2, dtype=np.int64),
                         np.int64(window))


@jit
def _bin2d(x, y, x_lo, dx, nx, y_lo, dy, ny):
    counts = np.zeros((nx, ny), dtype=np.int64)
    out = 0
    for k in range(x.shape[0]):
        fx = math.floor((x[k] - x_lo) / dx)
        fy = math.floor((y[k] - y_lo) / dy)
        if fx < 0 or fx >= nx or fy < 0 or fy >= ny:
            out += 1
        else:
            counts[int(fx), int(fy)] += 1
    return counts, out


def bin2d(x, y, x_lo, dx, nx, y_lo, dy, ny):
    counts, out = _bin2d(np.ascontiguousarray(x, dtype=np.float64),
                         np.ascontiguousarray(y, dtype=np.float64),
                         float(x_lo), float(dx), int(nx),
                         float(y_lo), float(dy), int(ny))
    return counts, int(out)


def set_threads(n):
    # numba refuses counts above the pool size it started with
    numba.set_num_threads(min(int(n), numba.config.NUMBA_NUM_THREADS))
