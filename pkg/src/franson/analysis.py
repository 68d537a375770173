"""Observables extracted from scans and spectral maps."""

import math
from typing import NamedTuple

import numpy as np
from scipy import ndimage
from scipy.signal import find_peaks

from ._io import atomic_write
from .errors import ContractError, DomainError, ParseError, RangeError
from .spectra import C

DEGENERATE_NM = 1584.0


def _per_second(ref_wavelength):
    if not ref_wavelength > 0:
        raise DomainError(f"reference wavelength must be positive, got {ref_wavelength}")
    return 2 * math.pi * C / (ref_wavelength * 1e-9)


def delay_to_phase(tau, ref_wavelength=DEGENERATE_NM):
    """Carrier phase 2 pi c tau / lambda (rad); wavelength in nm."""
    k = _per_second(ref_wavelength)
    return tau * k if np.isscalar(tau) else np.asarray(tau) * k


def phase_to_delay(phase, ref_wavelength=DEGENERATE_NM):
    k = _per_second(ref_wavelength)
    return phase / k if np.isscalar(phase) else np.asarray(phase) / k


def fringe_period(ref_wavelength=DEGENERATE_NM):
    """Delay (s) for one 2 pi carrier cycle."""
    return phase_to_delay(2 * math.pi, ref_wavelength)


def _window_mask(scan, window):
    lo, hi = window
    return (scan.taus >= lo) & (scan.taus <= hi)


def visibility(scan, window, ref_wavelength=DEGENERATE_NM):
    """(max - min) / (max + min) of the coincidence over a delay window."""
    lo, hi = window
    if hi - lo < fringe_period(ref_wavelength) * (1 - 1e-9):
        raise ContractError("visibility window must cover at least one fringe period")
    y = scan.coincidence[_window_mask(scan, window)]
    if len(y) < 5:
        raise ContractError(f"visibility window holds {len(y)} samples, need >= 5")
    top, bottom = float(y.max()), float(y.min())
    if top + bottom == 0:
        return 0.0
    return (top - bottom) / (top + bottom)


def upper_envelope(scan, ref_wavelength=DEGENERATE_NM, values=None):
    """Per-period maxima of the coincidence: (delays, maxima)."""
    y = scan.coincidence if values is None else np.asarray(values)
    t = scan.taus
    period = fringe_period(ref_wavelength)
    cell = np.floor((t - t[0]) / period).astype(np.int64)
    starts = np.flatnonzero(np.r_[True, cell[1:] != cell[:-1]])
    ends = np.r_[starts[1:], len(t)]
    idx = np.array([s + int(np.argmax(y[s:e])) for s, e in zip(starts, ends)])
    return t[idx], y[idx]


def _crossing(t0, y0, t1, y1, h):
    if y1 == y0:
        return 0.5 * (t0 + t1)
    return t0 + (h - y0) * (t1 - t0) / (y1 - y0)


def envelope_fwhm(scan, ref_wavelength=DEGENERATE_NM):
    """Full width at half maximum of the upper envelope (s).

    The envelope points are joined linearly and the half level is crossed
    on both sides of the global envelope maximum. The scan must sample the
    fringes at least four times per period.
    """
    if len(scan) < 50:
        raise ContractError(f"envelope FWHM needs >= 50 scan points, got {len(scan)}")
    step = float(np.max(np.diff(scan.taus)))
    if step > fringe_period(ref_wavelength) / 4:
        raise ContractError("scan step must be at most a quarter fringe period to trace the envelope")
    te, ye = upper_envelope(scan, ref_wavelength)
    k = int(np.argmax(ye))
    h = ye[k] / 2
    left = np.flatnonzero(ye[:k] < h)
    right = np.flatnonzero(ye[k + 1:] < h)
    if len(left) == 0 or len(right) == 0:
        raise RangeError("upper envelope does not fall below half maximum inside the scan")
    i = left[-1]
    j = k + 1 + right[0]
    t_lo = _crossing(te[i], ye[i], te[i + 1], ye[i + 1], h)
    t_hi = _crossing(te[j - 1], ye[j - 1], te[j], ye[j], h)
    return float(t_hi - t_lo)


def estimate_period(scan):
    """Mean spacing of coincidence maxima, each refined by a parabola (s)."""
    y = scan.coincidence
    t = scan.taus
    pk, _ = find_peaks(y)
    pk = pk[(pk > 0) & (pk < len(y) - 1)]
    if len(pk) < 2:
        raise RangeError("need at least two fringe maxima to estimate the period")
    step = t[1] - t[0]
    a, b, c = y[pk - 1], y[pk], y[pk + 1]
    den = a - 2 * b + c
    shift = np.where(den != 0, 0.5 * (a - c) / np.where(den != 0, den, 1.0), 0.0)
    tops = t[pk] + shift * step
    return float((tops[-1] - tops[0]) / (len(tops) - 1))


# mode counting ---------------------------------------------------------------

class ModeCount(NamedTuple):
    total: int
    along_s: int
    along_i: int
    threshold: float


_EIGHT = np.ones((3, 3), dtype=bool)


def count_peaks(profile, threshold=0.1):
    """Local maxima of a 1D profile with height >= threshold * max.

    The ends are padded with zeros so a maximum on the boundary counts.
    """
    p = np.asarray(profile, dtype=np.float64)
    top = float(p.max()) if len(p) else 0.0
    if top <= 0:
        return 0
    idx, _ = find_peaks(np.r_[0.0, p, 0.0], height=threshold * top)
    return int(len(idx))


def count_modes(s_map, threshold=0.1):
    """8-connected regions of S >= threshold * max, plus marginal peak counts."""
    if s_map.kind != "intensity":
        raise ContractError("count_modes expects an intensity map")
    if not 0 < threshold < 1:
        raise DomainError(f"threshold must lie in (0, 1), got {threshold}")
    s = s_map.values
    top = float(s.max())
    if not top > 0:
        raise ContractError("cannot count modes of an all-zero map")
    _, total = ndimage.label(s >= threshold * top, structure=_EIGHT)
    return ModeCount(int(total), count_peaks(s.sum(1), threshold), count_peaks(s.sum(0), threshold),
                     float(threshold))


def l1_distance(a, b):
    """L1 distance between two non-negative arrays after normalizing each to unit sum."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ContractError(f"shape mismatch {a.shape} vs {b.shape}")
    sa, sb = a.sum(), b.sum()
    if not (sa > 0 and sb > 0):
        raise ContractError("L1 distance needs two non-empty distributions")
    return float(np.abs(a / sa - b / sb).sum())


# key=value reports -----------------------------------------------------------

def _fmt(v):
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    return str(v)


def format_report(items):
    lines = []
    for k, v in items.items():
        if "=" in k or "\n" in k or not k:
            raise DomainError(f"bad report key {k!r}")
        lines.append(f"{k}={_fmt(v)}")
    return "\n".join(lines) + "\n"


def write_report(items, path):
    data = format_report(items).encode()
    atomic_write(path, data)
    return len(data)


def parse_report(text):
    """Key=value lines to a dict of strings."""
    out = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        if not line.strip():
            continue
        k, sep, v = line.partition("=")
        if not sep or not k:
            raise ParseError("expected key=value", lineno)
        out[k] = v
    return out
