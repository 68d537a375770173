"""Source model: frequency grids, pump and crystal, joint spectral amplitude.

Angular frequencies are in rad/s throughout. Wavelengths in public
signatures are in nm, crystal lengths in mm.
"""

import hashlib
import math
from dataclasses import dataclass

import numpy as np

from ._io import atomic_write
from .errors import (ContractError, DomainError, FormatError, ParseError,
                     PresetError, ResolutionError)

C = 299792458.0
GRID_FORMAT = "grid-v1"

# sinc^2(x) has its half maximum at x = 1.39156; a Gaussian exp(-x^2 / (2 s^2))
# with the same FWHM has s = 1.1819
_SINC_GAUSS_S = 1.1819


def omega_of_wavelength(wl_nm):
    return 2.0 * math.pi * C / (wl_nm * 1e-9)


def wavelength_of_omega(omega):
    return 2.0 * math.pi * C / omega * 1e9


def bandwidth_to_omega(fwhm_nm, center_nm):
    """First-order conversion of a wavelength width to angular frequency."""
    return 2.0 * math.pi * C * (fwhm_nm * 1e-9) / (center_nm * 1e-9) ** 2


@dataclass(frozen=True)
class FrequencyGrid:
    """Uniform signal/idler grid. Node k sits at center + (k - (n-1)/2) * d."""

    center_s: float
    center_i: float
    span_s: float
    span_i: float
    n_s: int
    n_i: int

    def __post_init__(self):
        for name in ("n_s", "n_i"):
            n = getattr(self, name)
            if int(n) != n or n < 2:
                raise DomainError(f"{name} must be an integer >= 2, got {n}")
            object.__setattr__(self, name, int(n))
        for name in ("center_s", "center_i", "span_s", "span_i"):
            v = float(getattr(self, name))
            if not math.isfinite(v) or v <= 0:
                raise DomainError(f"{name} must be finite and > 0, got {v}")
            object.__setattr__(self, name, v)
        if self.center_s - self.span_s / 2 <= 0 or self.center_i - self.span_i / 2 <= 0:
            raise DomainError("grid extends to non-positive frequencies")

    @property
    def d_s(self):
        return self.span_s / (self.n_s - 1)

    @property
    def d_i(self):
        return self.span_i / (self.n_i - 1)

    @property
    def omega_s(self):
        return self.center_s + (np.arange(self.n_s) - (self.n_s - 1) / 2) * self.d_s

    @property
    def omega_i(self):
        return self.center_i + (np.arange(self.n_i) - (self.n_i - 1) / 2) * self.d_i

    @property
    def shape(self):
        return (self.n_s, self.n_i)

    def mesh(self):
        return np.meshgrid(self.omega_s, self.omega_i, indexing="ij")


def make_grid(center_wl_s, center_wl_i, span_wl, n):
    """Square-count grid centered on two wavelengths (nm).

    The wavelength span is mapped to angular frequency at each center.
    """
    for name, v in (("center_wl_s", center_wl_s), ("center_wl_i", center_wl_i),
                    ("span_wl", span_wl), ("n", n)):
        if not v > 0:
            raise DomainError(f"{name} must be positive, got {v}")
    if int(n) != n or n < 2:
        raise DomainError(f"n must be an integer >= 2, got {n}")
    return FrequencyGrid(
        center_s=omega_of_wavelength(center_wl_s),
        center_i=omega_of_wavelength(center_wl_i),
        span_s=bandwidth_to_omega(span_wl, center_wl_s),
        span_i=bandwidth_to_omega(span_wl, center_wl_i),
        n_s=int(n), n_i=int(n))


@dataclass(frozen=True)
class PumpSpec:
    center_wavelength: float = 792.0
    fwhm_wavelength: float = 0.40
    envelope: str = "gaussian"

    def __post_init__(self):
        if not self.center_wavelength > 0 or not self.fwhm_wavelength > 0:
            raise DomainError("pump wavelength and FWHM must be positive")
        if self.envelope != "gaussian":
            raise DomainError(f"unsupported pump envelope {self.envelope!r}")

    @property
    def omega0(self):
        return omega_of_wavelength(self.center_wavelength)

    @property
    def fwhm_omega(self):
        """Intensity FWHM in angular frequency."""
        return bandwidth_to_omega(self.fwhm_wavelength, self.center_wavelength)


@dataclass(frozen=True)
class CrystalSpec:
    """Linearized phase mismatch dk = dk_ds * nu_s + dk_di * nu_i (s/m)."""

    length: float
    dk_ds: float
    dk_di: float
    label: str = ""

    def __post_init__(self):
        if not self.length > 0:
            raise DomainError(f"crystal length must be positive, got {self.length}")

    @property
    def length_m(self):
        return self.length * 1e-3


def pump_envelope(pump, omega_sum):
    """Gaussian pump amplitude, 1 at the pump center; |alpha|^2 has the pump FWHM."""
    omega_sum = np.asarray(omega_sum, dtype=np.float64)
    if np.any(~(omega_sum > 0)):
        raise DomainError("omega_sum must be positive")
    x = (omega_sum - pump.omega0) / pump.fwhm_omega
    return np.exp(-2.0 * math.log(2.0) * x * x)


def phase_matching_amplitude(crystal, nu_s, nu_i):
    """sinc(dk L / 2) with sinc(x) = sin(x)/x."""
    dk = crystal.dk_ds * np.asarray(nu_s, dtype=np.float64) + crystal.dk_di * np.asarray(nu_i, dtype=np.float64)
    return np.sinc(dk * crystal.length_m / 2.0 / math.pi)


@dataclass
class JointSpectrum:
    grid: FrequencyGrid
    values: np.ndarray
    kind: str = "amplitude"
    normalized: bool = False

    def __post_init__(self):
        if self.kind not in ("amplitude", "intensity"):
            raise DomainError(f"kind must be 'amplitude' or 'intensity', got {self.kind!r}")
        self.values = np.asarray(self.values)
        if self.values.shape != self.grid.shape:
            raise DomainError(f"values shape {self.values.shape} != grid shape {self.grid.shape}")
        if self.kind == "intensity":
            if np.iscomplexobj(self.values):
                raise DomainError("intensity values must be real")
            if np.any(self.values < 0):
                raise DomainError("intensity values must be non-negative")

    def intensity(self):
        if self.kind == "intensity":
            return self.values
        return np.abs(self.values) ** 2

    def mass(self):
        return float(self.intensity().sum() * self.grid.d_s * self.grid.d_i)

    def digest(self):
        h = hashlib.sha256()
        g = self.grid
        h.update(repr((g.center_s, g.center_i, g.span_s, g.span_i, g.n_s, g.n_i,
                       self.kind, self.normalized)).encode())
        h.update(np.ascontiguousarray(self.values).tobytes())
        return h.hexdigest()[:16]


def build_jsa(pump, crystal, grid):
    """f = alpha(w_s + w_i) * sinc(dk L / 2), normalized so sum |f|^2 dw dw = 1.

    Detunings are measured from the degenerate point w_p0 / 2 where dk = 0.
    """
    d = max(grid.d_s, grid.d_i)
    if pump.fwhm_omega / d < 4:
        raise ResolutionError(
            f"grid spacing {d:.4g} rad/s gives fewer than 4 points across the pump FWHM "
            f"{pump.fwhm_omega:.4g} rad/s")
    ws, wi = grid.mesh()
    half = pump.omega0 / 2
    f = pump_envelope(pump, ws + wi) * phase_matching_amplitude(crystal, ws - half, wi - half)
    norm = math.sqrt(float((f * f).sum()) * grid.d_s * grid.d_i)
    if norm == 0:
        raise ResolutionError("joint spectral amplitude vanishes on the grid")
    return JointSpectrum(grid, f / norm, kind="amplitude", normalized=True)


def correlation(jsa):
    """Pearson correlation of signal and idler frequency under |f|^2."""
    p = jsa.intensity()
    p = p / p.sum()
    ws = jsa.grid.omega_s - jsa.grid.center_s
    wi = jsa.grid.omega_i - jsa.grid.center_i
    ps, pi = p.sum(1), p.sum(0)
    ms, mi = ps @ ws, pi @ wi
    vs = ps @ (ws - ms) ** 2
    vi = pi @ (wi - mi) ** 2
    cov = (ws - ms) @ p @ (wi - mi)
    return float(cov / math.sqrt(vs * vi))


def coarsen_grid(grid, factor):
    if factor < 1 or grid.n_s % factor or grid.n_i % factor:
        raise ContractError(f"grid {grid.n_s}x{grid.n_i} is not divisible by {factor}")
    ns, ni = grid.n_s // factor, grid.n_i // factor
    if ns < 2 or ni < 2:
        raise ContractError("coarsened grid would have fewer than 2 points per axis")
    return FrequencyGrid(grid.center_s, grid.center_i,
                         grid.d_s * factor * (ns - 1), grid.d_i * factor * (ni - 1), ns, ni)


def coarsen(spectrum, factor):
    """Average factor-by-factor blocks of an intensity map; mass is preserved."""
    grid = coarsen_grid(spectrum.grid, factor)
    v = spectrum.intensity().reshape(grid.n_s, factor, grid.n_i, factor).mean(axis=(1, 3))
    return JointSpectrum(grid, v, kind="intensity", normalized=spectrum.normalized)


# presets ------------------------------------------------------------------

# Shared PPKTP group-delay coefficients (s/m). Equivalent to group-index
# differences of +0.121 (signal) and -0.107 (idler) against the pump.
DK_DS = 4.04e-10
DK_DI = -3.563e-10

_PRESETS = {
    "noncorrelated": (0.40, 30.0, "spectrally non-correlated"),
    "positive": (2.35, 50.0, "positively correlated"),
    "negative": (0.12, 10.0, "negatively correlated"),
    "experiment": (5.2, 30.0, "experimental source"),
}

PRESET_NAMES = tuple(_PRESETS)
DEFAULT_N = 512
DEFAULT_SPAN_FACTOR = 8.0
DEFAULT_TAU_MAX = 20e-12
POINTS_PER_FRINGE = 8


def marginal_fwhm_estimate(pump, crystal):
    """Gaussian-approximation FWHM of the two |f|^2 marginals (rad/s).

    The pump factor and the sinc^2 factor are each replaced by a Gaussian of
    equal FWHM; the product is then a bivariate Gaussian whose covariance
    gives the marginal widths.
    """
    sa2 = (pump.fwhm_omega / (2 * math.sqrt(math.log(2)))) ** 2
    g = crystal.length_m ** 2 / (8 * _SINC_GAUSS_S ** 2)
    a, b = crystal.dk_ds, crystal.dk_di
    m = 2 * (np.array([[1.0, 1.0], [1.0, 1.0]]) / sa2 + g * np.array([[a * a, a * b], [a * b, b * b]]))
    cov = np.linalg.inv(m)
    k = 2 * math.sqrt(2 * math.log(2))
    return k * math.sqrt(cov[0, 0]), k * math.sqrt(cov[1, 1])


def default_grid(pump, crystal, n_min=DEFAULT_N, tau_max=DEFAULT_TAU_MAX):
    """Square grid at the degenerate point spanning 8x the wider marginal FWHM.

    The point count starts at ``n_min`` and grows (in steps of 8, so the grid
    coarsens cleanly) until delays up to ``tau_max`` get 8 points per fringe.
    """
    span = DEFAULT_SPAN_FACTOR * max(marginal_fwhm_estimate(pump, crystal))
    need = int(math.ceil(span * POINTS_PER_FRINGE * tau_max / (2 * math.pi))) + 1
    n = max(n_min, need)
    n = 8 * ((n + 7) // 8)
    w0 = pump.omega0 / 2
    return FrequencyGrid(w0, w0, span, span, n, n)


def preset(name):
    """(PumpSpec, CrystalSpec, FrequencyGrid) of a named configuration."""
    try:
        fwhm, length, label = _PRESETS[name]
    except (KeyError, TypeError):
        raise PresetError(f"unknown preset {name!r}; choose from {', '.join(PRESET_NAMES)}") from None
    pump = PumpSpec(792.0, fwhm)
    crystal = CrystalSpec(length, DK_DS, DK_DI, label)
    return pump, crystal, default_grid(pump, crystal)


def preset_jsa(name):
    pump, crystal, grid = preset(name)
    return build_jsa(pump, crystal, grid)


# grid file ----------------------------------------------------------------

def _bool(text, lineno):
    if text == "true":
        return True
    if text == "false":
        return False
    raise ParseError(f"expected true/false, got {text!r}", lineno)


def format_grid(spectrum, extra=None):
    g = spectrum.grid
    head = [("format", GRID_FORMAT),
            ("center_s", repr(g.center_s)), ("center_i", repr(g.center_i)),
            ("span_s", repr(g.span_s)), ("span_i", repr(g.span_i)),
            ("n_s", str(g.n_s)), ("n_i", str(g.n_i)),
            ("kind", spectrum.kind),
            ("normalized", "true" if spectrum.normalized else "false")]
    for k, v in (extra or {}).items():
        head.append((k, str(v)))
    lines = [f"#{k}={v}" for k, v in head]
    v = spectrum.values
    if np.iscomplexobj(v):
        for row in v.tolist():
            lines.append(",".join(f"{z.real!r}:{z.imag!r}" for z in row))
    else:
        for row in np.asarray(v, dtype=np.float64).tolist():
            lines.append(",".join(map(repr, row)))
    return "\n".join(lines) + "\n"


def write_grid(spectrum, path, extra=None):
    """Write a grid file atomically. Returns the byte count."""
    data = format_grid(spectrum, extra).encode()
    atomic_write(path, data)
    return len(data)


def parse_grid(text):
    """Parse grid-file text. Returns (JointSpectrum, header dict)."""
    header = {}
    rows = []
    complex_vals = None
    for lineno, line in enumerate(text.splitlines(), 1):
        if line.startswith("#"):
            if rows:
                raise ParseError("header line after data", lineno)
            key, sep, val = line[1:].partition("=")
            if not sep:
                raise ParseError("header line must be #key=value", lineno)
            header[key] = val
            continue
        fields = line.split(",")
        try:
            if complex_vals is None:
                complex_vals = ":" in fields[0]
            if complex_vals:
                row = []
                for f in fields:
                    re_, sep, im = f.partition(":")
                    if not sep:
                        raise ValueError(f"expected re:im, got {f!r}")
                    row.append(complex(float(re_), float(im)))
            else:
                row = [float(f) for f in fields]
        except ValueError as e:
            raise ParseError(str(e), lineno) from None
        rows.append((lineno, row))
    if header.get("format") != GRID_FORMAT:
        raise FormatError(f"expected #format={GRID_FORMAT}, got {header.get('format')!r}")
    try:
        grid = FrequencyGrid(float(header["center_s"]), float(header["center_i"]),
                             float(header["span_s"]), float(header["span_i"]),
                             int(header["n_s"]), int(header["n_i"]))
        kind = header["kind"]
    except KeyError as e:
        raise FormatError(f"missing header key {e.args[0]!r}") from None
    except ValueError as e:
        raise FormatError(f"bad header value: {e}") from None
    normalized = _bool(header.get("normalized", "false"), None)
    if len(rows) != grid.n_s:
        raise ParseError(f"expected {grid.n_s} data rows, found {len(rows)}")
    for lineno, row in rows:
        if len(row) != grid.n_i:
            raise ParseError(f"expected {grid.n_i} values, found {len(row)}", lineno)
    values = np.array([r for _, r in rows], dtype=np.complex128 if complex_vals else np.float64)
    return JointSpectrum(grid, values, kind=kind, normalized=normalized), header


def read_grid(path):
    with open(path, encoding="utf-8") as fh:
        return parse_grid(fh.read())
