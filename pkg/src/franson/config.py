"""INI-style run configuration.

Sections: [pump], [crystal], [grid], [spectrometer], [run]. A run names
either a preset (``[run] preset = ...``) or an explicit source given by
[pump] and [crystal] (with an optional [grid]); never both.
"""

import configparser
import math
from dataclasses import dataclass, field

from .errors import ConfigError
from .spectra import (CrystalSpec, PumpSpec, default_grid, make_grid, preset)
from .spectrometer import SpectrometerModel
from .tagstream import DEFAULT_WINDOW_PS

SECTIONS = ("pump", "crystal", "grid", "spectrometer", "run")

_KEYS = {
    "pump": {"center_wavelength_nm": float, "fwhm_nm": float},
    "crystal": {"length_mm": float, "dk_ds": float, "dk_di": float, "label": str},
    "grid": {"center_wl_s_nm": float, "center_wl_i_nm": float, "span_nm": float, "n": int},
    "spectrometer": {"dispersion_ps_km_nm": float, "fiber_length_km": float, "jitter_fwhm_ps": float,
                     "ref_wavelength_nm": float, "ref_time_ps": float},
    "run": {"preset": str, "tau_start_ps": float, "tau_end_ps": float, "step_fs": float,
            "step_um": float, "vis_lo_ps": float, "vis_hi_ps": float, "taus_ps": "floats",
            "tau_ps": float, "n_pairs": int, "seed": int, "loss": float, "pairing": str,
            "window_ps": int, "coarsen": int, "threshold": float, "pair_period_ps": int},
}

RUN_DEFAULTS = {
    "tau_start_ps": -3.0, "tau_end_ps": 3.0, "step_fs": 0.33, "taus_ps": [0.0],
    "tau_ps": 0.0, "n_pairs": 1_000_000, "seed": 0, "loss": 0.0, "pairing": "auto",
    "window_ps": DEFAULT_WINDOW_PS, "coarsen": 8, "threshold": 0.1, "pair_period_ps": 100_000,
}


def _convert(section, key, raw):
    kind = _KEYS[section].get(key)
    if kind is None:
        raise ConfigError(f"{section}.{key}: unknown key")
    if isinstance(raw, str):
        raw = raw.strip()
    try:
        if kind == "floats":
            if isinstance(raw, (list, tuple)):
                vals = [float(v) for v in raw]
            else:
                vals = [float(v) for v in raw.replace(" ", "").split(",") if v]
            if not vals or not all(math.isfinite(v) for v in vals):
                raise ValueError("expected a comma-separated list of finite numbers")
            return vals
        if kind is int:
            if isinstance(raw, float) and raw != int(raw):
                raise ValueError("expected an integer")
            return int(raw)
        if kind is float:
            v = float(raw)
            if not math.isfinite(v):
                raise ValueError("expected a finite number")
            return v
        return str(raw)
    except (TypeError, ValueError) as e:
        raise ConfigError(f"{section}.{key}: {e}") from None


def read_config_text(text):
    """Parse INI text into {section: {key: typed value}}."""
    cp = configparser.ConfigParser(interpolation=None)
    try:
        cp.read_string(text)
    except configparser.Error as e:
        raise ConfigError(f"config syntax: {e}") from None
    out = {}
    for sec in cp.sections():
        if sec not in SECTIONS:
            raise ConfigError(f"unknown section [{sec}]")
        out[sec] = {k: _convert(sec, k, v) for k, v in cp[sec].items()}
    return out


def read_config(path):
    with open(path, encoding="utf-8") as fh:
        return read_config_text(fh.read())


@dataclass
class RunConfig:
    pump: PumpSpec
    crystal: CrystalSpec
    grid: object
    label: str
    spectrometer: SpectrometerModel
    spectrometer_given: bool
    run: dict = field(default_factory=dict)


def _require(sec, values, keys):
    missing = [k for k in keys if k not in values]
    if missing:
        raise ConfigError(f"[{sec}] is missing {', '.join(missing)}")


def resolve(sections, overrides=None):
    """Merge file sections with command-line overrides and build the source."""
    sections = {k: dict(v) for k, v in (sections or {}).items()}
    for (sec, key), v in (overrides or {}).items():
        if v is not None:
            sections.setdefault(sec, {})[key] = _convert(sec, key, v)
    run = dict(RUN_DEFAULTS)
    run.update(sections.get("run", {}))
    explicit = [s for s in ("pump", "crystal", "grid") if s in sections]
    name = run.get("preset")
    if name and explicit:
        raise ConfigError(f"run.preset conflicts with explicit [{'], ['.join(explicit)}] sections")
    if not name and not explicit:
        raise ConfigError("choose a source: set run.preset or give [pump] and [crystal]")
    try:
        if name:
            pump, crystal, grid = preset(name)
            label = name
        else:
            p, c = sections.get("pump", {}), sections.get("crystal", {})
            _require("pump", p, ("fwhm_nm",))
            _require("crystal", c, ("length_mm", "dk_ds", "dk_di"))
            pump = PumpSpec(p.get("center_wavelength_nm", 792.0), p["fwhm_nm"])
            crystal = CrystalSpec(c["length_mm"], c["dk_ds"], c["dk_di"], c.get("label", "custom"))
            if "grid" in sections:
                g = sections["grid"]
                _require("grid", g, ("span_nm", "n"))
                degenerate = 2 * pump.center_wavelength
                grid = make_grid(g.get("center_wl_s_nm", degenerate), g.get("center_wl_i_nm", degenerate),
                                 g["span_nm"], g["n"])
            else:
                grid = default_grid(pump, crystal)
            label = crystal.label or "custom"
        spec = SpectrometerModel(**sections.get("spectrometer", {}))
    except ConfigError:
        raise
    except ValueError as e:
        raise ConfigError(str(e)) from None
    if not 0 <= run["seed"] < 2 ** 64:
        raise ConfigError("run.seed must be an unsigned 64-bit integer")
    for key in ("n_pairs", "coarsen", "window_ps", "pair_period_ps"):
        if run[key] < 1:
            raise ConfigError(f"run.{key} must be >= 1")
    if not 0 < run["threshold"] < 1:
        raise ConfigError("run.threshold must lie in (0, 1)")
    if not 0 <= run["loss"] < 1:
        raise ConfigError("run.loss must lie in [0, 1)")
    if run["pairing"] not in ("auto", "by_pair_id", "by_window"):
        raise ConfigError("run.pairing must be auto, by_pair_id or by_window")
    return RunConfig(pump, crystal, grid, label, spec, "spectrometer" in sections, run)
