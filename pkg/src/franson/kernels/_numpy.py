"""Pure-numpy versions of the hot loops."""

import numpy as np

_CHUNK = 256


def cos_sums(x, h, taus):
    """out[t] = sum_k h[k] * cos(x[k] * taus[t])"""
    x = np.asarray(x, dtype=np.float64)
    h = np.asarray(h, dtype=np.float64)
    taus = np.asarray(taus, dtype=np.float64)
    out = np.empty(taus.shape[0])
    for start in range(0, taus.shape[0], _CHUNK):
        t = taus[start:start + _CHUNK]
        out[start:start + _CHUNK] = np.cos(np.multiply.outer(t, x)) @ h
    return out


def window_histogram(t1, t2, window, width):
    """Histogram of t2 - t1 over all cross-channel pairs with |dt| <= window.

    Bins are centered on multiples of ``width``; bin k covers
    [k*width - width/2, k*width + width/2).
    """
    kmax = window // width
    t1 = np.asarray(t1, dtype=np.int64)
    t2 = np.asarray(t2, dtype=np.int64)
    lo = np.searchsorted(t2, t1 - window, side="left")
    hi = np.searchsorted(t2, t1 + window, side="right")
    n = hi - lo
    total = int(n.sum())
    # expand every (channel-1 event, channel-2 range) into explicit pairs
    first = np.repeat(np.cumsum(n) - n, n)
    j = np.repeat(lo, n) + (np.arange(total) - first)
    dt = t2[j] - np.repeat(t1, n)
    k = (2 * dt + width) // (2 * width)
    k = k[np.abs(k) <= kmax]
    return np.bincount(k + kmax, minlength=2 * kmax + 1).astype(np.int64)


def pair_nearest(t1, t2, window):
    """Greedy nearest-neighbour pairing of sorted channel-1 and channel-2 times.

    Channel-1 events are taken in time order. Each one claims the closest
    unused channel-2 event within +-window; on a tie the earlier channel-2
    event wins. Returns index arrays (i1, i2).
    """
    t1 = np.asarray(t1, dtype=np.int64)
    t2 = np.asarray(t2, dtype=np.int64)
    used = np.zeros(t2.shape[0], dtype=bool)
    out1 = []
    out2 = []
    lo = 0
    n2 = t2.shape[0]
    for i in range(t1.shape[0]):
        t = int(t1[i])
        while lo < n2 and (used[lo] or t2[lo] < t - window):
            lo += 1
        best = -1
        best_d = 0
        j = lo
        while j < n2 and t2[j] <= t + window:
            if not used[j]:
                d = abs(int(t2[j]) - t)
                if best < 0 or d < best_d:
                    best = j
                    best_d = d
            j += 1
        if best >= 0:
            used[best] = True
            out1.append(i)
            out2.append(best)
    return np.array(out1, dtype=np.int64), np.array(out2, dtype=np.int64)


def bin2d(x, y, x_lo, dx, nx, y_lo, dy, ny):
    """Count points into an nx-by-ny grid of cells starting at (x_lo, y_lo).

    Returns (counts, n_outside).
    """
    ix = np.floor((np.asarray(x) - x_lo) / dx)
    iy = np.floor((np.asarray(y) - y_lo) / dy)
    inside = (ix >= 0) & (ix < nx) & (iy >= 0) & (iy < ny)
    flat = ix[inside].astype(np.int64) * ny + iy[inside].astype(np.int64)
    counts = np.bincount(flat, minlength=nx * ny).reshape(nx, ny)
    return counts.astype(np.int64), int(inside.size - np.count_nonzero(inside))
