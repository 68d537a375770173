"""Dispersive-fiber spectrometer model and synthetic event generation.

Arrival times are in ps, wavelengths in nm. A photon of wavelength lambda
arrives at ref_time + D * L * (lambda - ref_wavelength) after its pair's
emission trigger.
"""

import math
from dataclasses import dataclass, fields
from typing import NamedTuple

import numpy as np

from .errors import ContractError, DomainError, RangeError
from .spectra import C

JITTER_FWHM_TO_SIGMA = 2 * math.sqrt(2 * math.log(2))
DEFAULT_PAIR_PERIOD_PS = 100_000


@dataclass(frozen=True)
class SpectrometerModel:
    dispersion_ps_km_nm: float = 27.3
    fiber_length_km: float = 7.5
    jitter_fwhm_ps: float = 100.0
    ref_wavelength_nm: float = 1584.0
    ref_time_ps: float = 0.0

    def __post_init__(self):
        for f in fields(self):
            v = getattr(self, f.name)
            if not math.isfinite(float(v)):
                raise DomainError(f"{f.name} must be finite, got {v}")
            object.__setattr__(self, f.name, float(v))
        if self.dispersion_ps_km_nm == 0:
            raise DomainError("dispersion must be non-zero")
        if not self.fiber_length_km > 0:
            raise DomainError("fiber length must be positive")
        if self.jitter_fwhm_ps < 0:
            raise DomainError("jitter FWHM must be non-negative")
        if not self.ref_wavelength_nm > 0:
            raise DomainError("reference wavelength must be positive")

    @property
    def ps_per_nm(self):
        return self.dispersion_ps_km_nm * self.fiber_length_km

    def to_header(self, prefix):
        return {f"{prefix}.{f.name}": repr(getattr(self, f.name)) for f in fields(self)}

    @classmethod
    def from_header(cls, header, prefix):
        kw = {}
        for f in fields(cls):
            key = f"{prefix}.{f.name}"
            if key in header:
                kw[f.name] = float(header[key])
        return cls(**kw)


def _out(x, like):
    return x if np.ndim(like) else float(x)


def wavelength_to_arrival(model, wavelength):
    wl = np.asarray(wavelength, dtype=np.float64)
    if np.any(~(wl > 0)):
        raise DomainError("wavelength must be positive")
    return _out(model.ref_time_ps + model.ps_per_nm * (wl - model.ref_wavelength_nm), wavelength)


def arrival_to_wavelength(model, t_ps):
    t = np.asarray(t_ps, dtype=np.float64)
    return _out(model.ref_wavelength_nm + (t - model.ref_time_ps) / model.ps_per_nm, t_ps)


def arrival_to_omega(model, t_ps):
    """Angular frequency of a photon from its trigger-relative arrival time."""
    wl = np.asarray(arrival_to_wavelength(model, t_ps))
    if np.any(~(wl > 0)):
        raise RangeError("arrival time maps to a non-positive wavelength")
    return _out(2 * math.pi * C / (wl * 1e-9), t_ps)


def omega_to_arrival(model, omega):
    return wavelength_to_arrival(model, 2 * math.pi * C / np.asarray(omega, dtype=np.float64) * 1e9)


def resolution(model):
    """Spectral resolution (nm) set by the timing jitter."""
    den = abs(model.dispersion_ps_km_nm) * model.fiber_length_km
    if den == 0:
        raise DomainError("dispersion x length must be non-zero")
    return model.jitter_fwhm_ps / den


class Draws(NamedTuple):
    """Jitter-free frequencies of the emitted pairs, in emission order."""
    omega_s: np.ndarray
    omega_i: np.ndarray


def sample_events(s_map, model_s, model_i, n_pairs, seed, loss=0.0,
                  pair_period_ps=DEFAULT_PAIR_PERIOD_PS, return_draws=False):
    """Draw photon pairs from an intensity map and emit a time-tag stream.

    Cells are chosen by inverse CDF over the flattened map and a point is
    drawn uniformly inside the cell. Each frequency is mapped to an arrival
    time on the 1 ps tag lattice; Gaussian jitter is added before rounding.
    Pair j is emitted at j * pair_period_ps + pair_period_ps // 2.

    With ``return_draws`` the result is (stream, Draws), where the draws are
    the frequencies of the jitter-free lattice times. With zero jitter they
    are exactly what a reconstruction sees.
    """
    from .tagstream import FORMAT_VERSION, TagStream

    if s_map.kind != "intensity":
        raise ContractError("sample_events expects an intensity map")
    if int(n_pairs) != n_pairs or n_pairs < 1:
        raise DomainError(f"n_pairs must be an integer >= 1, got {n_pairs}")
    if not 0 <= loss < 1:
        raise DomainError(f"loss must lie in [0, 1), got {loss}")
    pair_period_ps = int(pair_period_ps)
    if pair_period_ps < 2:
        raise DomainError("pair period must be at least 2 ps")
    s = np.asarray(s_map.values, dtype=np.float64).ravel()
    total = s.sum()
    if not total > 0:
        raise DomainError("cannot sample from an all-zero map")
    n_pairs = int(n_pairs)
    g = s_map.grid
    rng = np.random.default_rng(seed)

    cdf = np.cumsum(s / total)
    cdf[-1] = 1.0
    cell = np.searchsorted(cdf, rng.random(n_pairs), side="right")
    cell = np.minimum(cell, len(s) - 1)
    ii, jj = np.divmod(cell, g.n_i)
    ws = g.omega_s[ii] + (rng.random(n_pairs) - 0.5) * g.d_s
    wi = g.omega_i[jj] + (rng.random(n_pairs) - 0.5) * g.d_i
    ts = omega_to_arrival(model_s, ws)
    ti = omega_to_arrival(model_i, wi)
    ts0 = np.rint(ts).astype(np.int64)
    ti0 = np.rint(ti).astype(np.int64)
    if model_s.jitter_fwhm_ps > 0:
        ts1 = np.rint(ts + rng.normal(0.0, model_s.jitter_fwhm_ps / JITTER_FWHM_TO_SIGMA, n_pairs)).astype(np.int64)
    else:
        ts1 = ts0
    if model_i.jitter_fwhm_ps > 0:
        ti1 = np.rint(ti + rng.normal(0.0, model_i.jitter_fwhm_ps / JITTER_FWHM_TO_SIGMA, n_pairs)).astype(np.int64)
    else:
        ti1 = ti0
    keep = rng.random(n_pairs) >= loss if loss > 0 else np.ones(n_pairs, dtype=bool)

    half = pair_period_ps // 2
    lim = pair_period_ps - half
    for t in (ts1, ti1):
        if np.any(t <= -half) or np.any(t >= lim):
            raise RangeError("arrival offsets exceed the pair period; increase pair_period_ps")
    ids = np.flatnonzero(keep).astype(np.int64)
    epoch = ids * pair_period_ps + half
    time = np.concatenate([epoch + ts1[keep], epoch + ti1[keep]])
    chan = np.concatenate([np.ones(len(ids), np.int8), np.full(len(ids), 2, np.int8)])
    pid = np.concatenate([ids, ids])
    order = np.lexsort((chan, time))

    header = {"format": FORMAT_VERSION, "seed": str(seed), "n_drawn": str(n_pairs),
              "n_pairs": str(len(ids)), "n_events": str(2 * len(ids)),
              "pair_period_ps": str(pair_period_ps), "pair_offset_ps": str(half),
              "loss": repr(float(loss)), "grid_hash": s_map.digest()}
    header.update(model_s.to_header("s"))
    header.update(model_i.to_header("i"))
    stream = TagStream(header, chan[order], time[order], pid[order])
    if not return_draws:
        return stream
    draws = Draws(arrival_to_omega(model_s, ts0[keep]), arrival_to_omega(model_i, ti0[keep]))
    return stream, draws
