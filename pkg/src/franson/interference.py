"""Closed-form Franson observables evaluated on a joint spectrum.

All integrals are midpoint Riemann sums on the uniform grid. Delays are in
seconds. The cosine carriers use absolute angular frequencies, not
detunings.
"""

import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from . import kernels
from ._io import atomic_write
from .errors import ContractError, DomainError, ParseError, ResolutionError, ResourceError
from .spectra import C, JointSpectrum

MAX_SCAN_POINTS = 10_000_000
POINTS_PER_FRINGE = 8
CSV_HEADER = "tau_s,coincidence,singles_ch1,singles_ch2"


def _require_amplitude(jsa):
    if jsa.kind != "amplitude" or not jsa.normalized:
        raise ContractError("expected a normalized amplitude-kind joint spectrum")


def check_resolution(grid, tau_s, tau_i=None):
    """Raise unless the grid has 8 points per spectral fringe at these delays."""
    tau_i = tau_s if tau_i is None else tau_i
    for d, t, axis in ((grid.d_s, tau_s, "signal"), (grid.d_i, tau_i, "idler")):
        if d * abs(t) > 2 * math.pi / POINTS_PER_FRINGE:
            raise ResolutionError(
                f"{axis} spacing {d:.4g} rad/s under-resolves the fringes at delay {t:.4g} s; "
                f"need spacing <= {2 * math.pi / (POINTS_PER_FRINGE * abs(t)):.4g}")


def _bracket(omega, tau):
    return 1.0 + np.cos(omega * tau)


def coincidence_folded(jsa, tau):
    """Folded-interferometer coincidence probability P(tau).

    Evaluates the two-term form (1/16) sum [|f(s,i)|^2 + |f(i,s)|^2] B_s B_i
    with B = 1 + cos(w tau). Relabelling the integration variables in the
    exchanged term turns it into the direct term, so both terms are the same
    grid sum and no exchange symmetry of the grid is needed.
    """
    _require_amplitude(jsa)
    g = jsa.grid
    check_resolution(g, tau)
    w = np.multiply.outer(_bracket(g.omega_s, tau), _bracket(g.omega_i, tau))
    direct = float((jsa.intensity() * w).sum()) * g.d_s * g.d_i
    p_hv = direct / 16.0
    p_vh = direct / 16.0
    return p_hv + p_vh


def coincidence_unfolded(jsa, t1, t2):
    """(1/4) sum |f|^2 [1 + cos w_s t1][1 + cos w_i t2]."""
    _require_amplitude(jsa)
    g = jsa.grid
    check_resolution(g, t1, t2)
    w = np.multiply.outer(_bracket(g.omega_s, t1), _bracket(g.omega_i, t2))
    return float((jsa.intensity() * w).sum()) * g.d_s * g.d_i / 4.0


def spectral_map(jsa, tau):
    """S = |f|^2 [1 + cos w_s tau][1 + cos w_i tau], intensity kind, not renormalized."""
    _require_amplitude(jsa)
    g = jsa.grid
    check_resolution(g, tau)
    s = jsa.intensity() * np.multiply.outer(_bracket(g.omega_s, tau), _bracket(g.omega_i, tau))
    return JointSpectrum(g, s, kind="intensity", normalized=False)


def singles_folded(jsa, tau):
    """(1/4) sum |f|^2 [2 + cos w_s tau + cos w_i tau]."""
    _require_amplitude(jsa)
    g = jsa.grid
    check_resolution(g, tau)
    w = 2.0 + np.add.outer(np.cos(g.omega_s * tau), np.cos(g.omega_i * tau))
    return float((jsa.intensity() * w).sum()) * g.d_s * g.d_i / 4.0


class Marginal(NamedTuple):
    omega: np.ndarray
    density: np.ndarray

    @property
    def d(self):
        return float((self.omega[-1] - self.omega[0]) / (len(self.omega) - 1))


def marginal(jsa, axis="s"):
    """|f|^2 integrated over the other photon: a 1D density in rad/s."""
    g = jsa.grid
    i = jsa.intensity()
    if axis == "s":
        return Marginal(g.omega_s, i.sum(1) * g.d_i)
    if axis == "i":
        return Marginal(g.omega_i, i.sum(0) * g.d_s)
    raise DomainError(f"axis must be 's' or 'i', got {axis!r}")


def singles_unfolded(m, t1):
    """(1/2) sum |f(w)|^2 [1 + cos w t1] dw for a normalized marginal."""
    d = m.d
    mass = float(np.sum(m.density)) * d
    if abs(mass - 1.0) > 1e-9:
        raise ContractError(f"marginal must be normalized, mass is {mass!r}")
    if d * abs(t1) > 2 * math.pi / POINTS_PER_FRINGE:
        raise ResolutionError(f"marginal spacing {d:.4g} rad/s under-resolves delay {t1:.4g} s")
    return float(np.sum(m.density * _bracket(m.omega, t1))) * d / 2.0


def path_to_delay(path_m):
    """Free-space optical path difference (m) to delay (s)."""
    return np.asarray(path_m, dtype=np.float64) / C if np.ndim(path_m) else float(path_m) / C


# scans ----------------------------------------------------------------------

@dataclass
class FringeScan:
    taus: np.ndarray
    coincidence: np.ndarray
    singles_ch1: np.ndarray
    singles_ch2: np.ndarray
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.taus = np.asarray(self.taus, dtype=np.float64)
        self.coincidence = np.asarray(self.coincidence, dtype=np.float64)
        self.singles_ch1 = np.asarray(self.singles_ch1, dtype=np.float64)
        self.singles_ch2 = np.asarray(self.singles_ch2, dtype=np.float64)
        n = len(self.taus)
        if any(len(a) != n for a in (self.coincidence, self.singles_ch1, self.singles_ch2)):
            raise DomainError("scan arrays must have equal length")
        if n > 1 and np.any(np.diff(self.taus) <= 0):
            raise DomainError("scan delays must be strictly increasing")

    def __len__(self):
        return len(self.taus)


def delay_ladder(tau_start, tau_end, step):
    if not step > 0:
        raise DomainError(f"step must be positive, got {step}")
    if tau_end < tau_start:
        raise DomainError("tau_end must not be below tau_start")
    n = int(math.floor((tau_end - tau_start) / step * (1 + 1e-12))) + 1
    if n > MAX_SCAN_POINTS:
        raise ResourceError(f"scan would need {n} points (limit {MAX_SCAN_POINTS})")
    return tau_start + step * np.arange(n)


class LatticeSums:
    """Fast evaluation of the scan observables on a square-spacing grid.

    With a = w_s tau and b = w_i tau the weight expands as
    (1 + cos a)(1 + cos b) = 1 + cos a + cos b + [cos(a + b) + cos(a - b)] / 2.
    On a uniform grid with equal spacings, w_s + w_i and w_s - w_i fall on
    1D lattices, so every term is a 1D cosine sum over a histogram of |f|^2.
    """

    def __init__(self, jsa):
        g = jsa.grid
        p = jsa.intensity() * (g.d_s * g.d_i)
        self.mass = float(p.sum())
        self.ws, self.hs = g.omega_s, p.sum(1)
        self.wi, self.hi = g.omega_i, p.sum(0)
        self.square = g.d_s == g.d_i
        if self.square:
            d = g.d_s
            ks = np.add.outer(np.arange(g.n_s), np.arange(g.n_i)).ravel()
            kd = np.subtract.outer(np.arange(g.n_s), np.arange(g.n_i)).ravel() + (g.n_i - 1)
            self.hsum = np.bincount(ks, p.ravel())
            self.hdiff = np.bincount(kd, p.ravel())
            self.wsum = (g.center_s + g.center_i) + (np.arange(len(self.hsum)) - (g.n_s + g.n_i - 2) / 2) * d
            self.wdiff = (g.center_s - g.center_i) + (np.arange(len(self.hdiff)) - (g.n_s - 1) / 2
                                                      - (g.n_i - 1) / 2) * d
        else:
            self.p = p

    def evaluate(self, taus):
        cs = kernels.cos_sums(self.ws, self.hs, taus)
        ci = kernels.cos_sums(self.wi, self.hi, taus)
        singles = (2 * self.mass + cs + ci) / 4.0
        if self.square:
            csum = kernels.cos_sums(self.wsum, self.hsum, taus)
            cdiff = kernels.cos_sums(self.wdiff, self.hdiff, taus)
            coinc = (self.mass + cs + ci + 0.5 * (csum + cdiff)) / 8.0
        else:
            coinc = np.empty(len(taus))
            for k, t in enumerate(taus):
                coinc[k] = _bracket(self.ws, t) @ self.p @ _bracket(self.wi, t) / 8.0
        return coinc, singles


def scan(jsa, tau_start, tau_end, step, label=""):
    """Coincidence and singles on the delay ladder tau_start + k * step."""
    _require_amplitude(jsa)
    taus = delay_ladder(tau_start, tau_end, step)
    check_resolution(jsa.grid, float(np.max(np.abs(taus))))
    coinc, singles = LatticeSums(jsa).evaluate(taus)
    # rounding can push exact zeros a hair negative
    coinc = np.maximum(coinc, 0.0)
    singles = np.maximum(singles, 0.0)
    meta = {"preset": label or "custom", "grid_hash": jsa.digest()}
    return FringeScan(taus, coinc, singles, singles.copy(), meta)


def scan_path(jsa, x_start, x_end, x_step, label=""):
    """Scan driven by a free-space path difference in metres."""
    return scan(jsa, path_to_delay(x_start), path_to_delay(x_end), path_to_delay(x_step), label)


def format_scan_csv(s):
    lines = [f"#{k}={v}" for k, v in s.meta.items()]
    lines.append(CSV_HEADER)
    for row in zip(s.taus.tolist(), s.coincidence.tolist(), s.singles_ch1.tolist(), s.singles_ch2.tolist()):
        lines.append(",".join(map(repr, row)))
    return "\n".join(lines) + "\n"


def write_scan_csv(s, path):
    data = format_scan_csv(s).encode()
    atomic_write(path, data)
    return len(data)


def parse_scan_csv(text):
    meta = {}
    rows = []
    seen_header = False
    for lineno, line in enumerate(text.splitlines(), 1):
        if not seen_header and line.startswith("#"):
            k, _, v = line[1:].partition("=")
            meta[k] = v
            continue
        if not seen_header:
            if line.strip() != CSV_HEADER:
                raise ParseError(f"expected header {CSV_HEADER!r}", lineno)
            seen_header = True
            continue
        fields = line.split(",")
        if len(fields) != 4:
            raise ParseError(f"expected 4 fields, found {len(fields)}", lineno)
        try:
            rows.append([float(f) for f in fields])
        except ValueError as e:
            raise ParseError(str(e), lineno) from None
    if not seen_header:
        raise ParseError("missing CSV header")
    a = np.array(rows, dtype=np.float64).reshape(-1, 4)
    return FringeScan(a[:, 0], a[:, 1], a[:, 2], a[:, 3], meta)


def read_scan_csv(path):
    with open(path, encoding="utf-8") as fh:
        return parse_scan_csv(fh.read())


# time-of-arrival projections -----------------------------------------------

class Projections(NamedTuple):
    marginal_s: np.ndarray
    marginal_i: np.ndarray
    antidiag: np.ndarray
    antidiag_axis: np.ndarray


def toa_projections(s_map):
    """Row/column marginals and the projection onto lines of constant w_s - w_i.

    Anti-diagonal bin k collects cells with i - j = k - (n_i - 1) and holds the
    mass S dw dw of those cells.
    """
    if s_map.kind != "intensity":
        raise ContractError("toa_projections expects an intensity map")
    g = s_map.grid
    s = s_map.values
    ms = s.sum(1) * g.d_i
    mi = s.sum(0) * g.d_s
    if not math.isclose(g.d_s, g.d_i, rel_tol=1e-12):
        raise ContractError("anti-diagonal projection needs equal grid spacings")
    kd = np.subtract.outer(np.arange(g.n_s), np.arange(g.n_i)).ravel() + (g.n_i - 1)
    ad = np.bincount(kd, s.ravel() * (g.d_s * g.d_i), minlength=g.n_s + g.n_i - 1)
    axis = (g.center_s - g.center_i) + (np.arange(len(ad)) - (g.n_s - 1) / 2 - (g.n_i - 1) / 2) * g.d_s
    return Projections(ms, mi, ad, axis)
