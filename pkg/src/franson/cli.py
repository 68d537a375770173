"""Command-line front end.

    franson [--config FILE] [--seed N] [--out DIR] [--threads N] COMMAND ...

Commands: presets, scan, jsi, events, reconstruct, analyze. Exit codes are
0 on success, 2 for validation errors, 3 for I/O errors and 4 for numeric
or contract errors. Every command computes all of its outputs before
writing any of them, and files are written through temp files and renamed.
"""

import argparse
import os
import sys

import numpy as np

from . import analysis, interference, kernels, spectra, spectrometer, tagstream
from .config import read_config, resolve
from .errors import ConfigError, FransonError, ValidationError


# output staging ---------------------------------------------------------------

def commit(outputs, out_dir):
    """Write {name: bytes} into out_dir all-or-nothing."""
    os.makedirs(out_dir, exist_ok=True)
    staged = []
    done = []
    try:
        for name, data in outputs.items():
            path = os.path.join(out_dir, name)
            tmp = f"{path}.tmp{os.getpid()}"
            with open(tmp, "wb") as fh:
                fh.write(data)
            staged.append((tmp, path))
        for tmp, path in staged:
            os.replace(tmp, path)
            done.append(path)
    except BaseException:
        for tmp, _ in staged:
            if os.path.exists(tmp):
                os.unlink(tmp)
        for path in done:
            os.unlink(path)
        raise
    return [os.path.join(out_dir, n) for n in outputs]


def _report(items):
    return analysis.format_report(items).encode()


def _ps(x):
    return x * 1e-12


# commands ---------------------------------------------------------------------

def _source(args, overrides):
    sections = read_config(args.config) if args.config else {}
    return resolve(sections, overrides)


def cmd_presets(args):
    rows = ["name,pump_fwhm_nm,crystal_mm,dk_ds_s_per_m,dk_di_s_per_m,grid_n,span_rad_s,rho"]
    for name in spectra.PRESET_NAMES:
        pump, crystal, grid = spectra.preset(name)
        rho = spectra.correlation(spectra.build_jsa(pump, crystal, grid))
        rows.append(f"{name},{pump.fwhm_wavelength!r},{crystal.length!r},{crystal.dk_ds!r},"
                    f"{crystal.dk_di!r},{grid.n_s},{grid.span_s!r},{rho:.4f}")
    print("\n".join(rows))
    return {}


def cmd_scan(args):
    cfg = _source(args, {("run", "preset"): args.preset, ("run", "tau_start_ps"): args.tau_start_ps,
                         ("run", "tau_end_ps"): args.tau_end_ps, ("run", "step_fs"): args.step_fs,
                         ("run", "step_um"): args.step_um, ("run", "vis_lo_ps"): args.vis_lo_ps,
                         ("run", "vis_hi_ps"): args.vis_hi_ps})
    run = cfg.run
    lo, hi = _ps(run["tau_start_ps"]), _ps(run["tau_end_ps"])
    if not hi > lo:
        raise ConfigError("run.tau_end_ps must exceed run.tau_start_ps")
    step = interference.path_to_delay(run["step_um"] * 1e-6) if "step_um" in run else run["step_fs"] * 1e-15
    if not step > 0:
        raise ConfigError("scan step must be positive")
    jsa = spectra.build_jsa(cfg.pump, cfg.crystal, cfg.grid)
    s = interference.scan(jsa, lo, hi, step, cfg.label)
    period = analysis.fringe_period()
    peak = float(s.taus[int(np.argmax(s.coincidence))])
    report = {"preset": cfg.label, "n_points": len(s), "tau_start_s": float(s.taus[0]),
              "tau_end_s": float(s.taus[-1]), "step_s": float(step), "peak_tau_s": peak,
              "fringe_period_fs": period * 1e15}
    if "vis_lo_ps" in run or "vis_hi_ps" in run:
        window = (_ps(run.get("vis_lo_ps", run["tau_start_ps"])), _ps(run.get("vis_hi_ps", run["tau_end_ps"])))
    else:
        window = (max(lo, peak - period), min(hi, peak + period))
    try:
        report["visibility"] = analysis.visibility(s, window)
        report["visibility_window_s"] = f"{window[0]!r},{window[1]!r}"
    except FransonError as e:
        report["visibility"] = "nan"
        report["visibility_error"] = str(e)
    try:
        report["envelope_fwhm_ps"] = analysis.envelope_fwhm(s) * 1e12
    except FransonError as e:
        report["envelope_fwhm_ps"] = "nan"
        report["envelope_error"] = str(e)
    return {"scan.csv": interference.format_scan_csv(s).encode(), "scan_report.txt": _report(report)}


def _tau_label(tau_ps):
    return f"{tau_ps:+.5f}".replace("+", "p").replace("-", "m").replace(".", "_")


def cmd_jsi(args):
    cfg = _source(args, {("run", "preset"): args.preset, ("run", "taus_ps"): args.taus_ps,
                         ("run", "threshold"): args.threshold})
    taus = cfg.run["taus_ps"]
    jsa = spectra.build_jsa(cfg.pump, cfg.crystal, cfg.grid)
    out = {}
    totals, along_s, along_i, names = [], [], [], []
    for t in taus:
        m = interference.spectral_map(jsa, _ps(t))
        mc = analysis.count_modes(m, cfg.run["threshold"])
        name = f"jsi_tau_{_tau_label(t)}ps.grid"
        if name in out:
            raise ConfigError(f"run.taus_ps: duplicate delay {t}")
        out[name] = spectra.format_grid(m, {"tau_s": repr(_ps(t)), "preset": cfg.label}).encode()
        totals.append(mc.total)
        along_s.append(mc.along_s)
        along_i.append(mc.along_i)
        names.append(name)
    report = {"preset": cfg.label, "taus_ps": ",".join(repr(float(t)) for t in taus),
              "threshold": cfg.run["threshold"],
              "modes_total": ",".join(map(str, totals)),
              "modes_along_s": ",".join(map(str, along_s)),
              "modes_along_i": ",".join(map(str, along_i)),
              "files": ",".join(names)}
    out["jsi_report.txt"] = _report(report)
    return out


def cmd_events(args):
    cfg = _source(args, {("run", "preset"): args.preset, ("run", "tau_ps"): args.tau_ps,
                         ("run", "n_pairs"): args.n_pairs, ("run", "seed"): args.seed,
                         ("run", "loss"): args.loss})
    run = cfg.run
    jsa = spectra.build_jsa(cfg.pump, cfg.crystal, cfg.grid)
    s_map = interference.spectral_map(jsa, _ps(run["tau_ps"]))
    model = cfg.spectrometer
    stream = spectrometer.sample_events(s_map, model, model, run["n_pairs"], run["seed"], loss=run["loss"],
                                        pair_period_ps=run["pair_period_ps"])
    stream.header["preset"] = cfg.label
    stream.header["tau_s"] = repr(_ps(run["tau_ps"]))
    return {"events.tags": tagstream.format_tags(stream).encode()}


def cmd_reconstruct(args):
    cfg = _source(args, {("run", "preset"): args.preset, ("run", "pairing"): args.pairing,
                         ("run", "window_ps"): args.window_ps, ("run", "coarsen"): args.coarsen,
                         ("run", "threshold"): args.threshold})
    run = cfg.run
    stream = tagstream.parse_tags(args.tagfile)
    if cfg.spectrometer_given:
        ms = mi = cfg.spectrometer
    else:
        ms = spectrometer.SpectrometerModel.from_header(stream.header, "s")
        mi = spectrometer.SpectrometerModel.from_header(stream.header, "i")
    pairing = run["pairing"]
    if pairing == "auto":
        pairing = "by_pair_id" if stream.pair_id is not None else "by_window"
    grid = spectra.coarsen_grid(cfg.grid, run["coarsen"])
    rec = tagstream.reconstruct_jsi(stream, ms, mi, grid, pairing=pairing, window=run["window_ps"])
    mc = analysis.count_modes(rec.jsi, run["threshold"])
    report = {"preset": cfg.label, "pairing": pairing, "n_pairs": rec.n_pairs, "n_outside": rec.n_outside,
              "overflow": rec.overflow, "mass": rec.jsi.mass(), "threshold": mc.threshold,
              "modes_total": mc.total, "modes_along_s": mc.along_s, "modes_along_i": mc.along_i,
              "grid_n": grid.n_s}
    return {"reconstructed.grid": spectra.format_grid(rec.jsi, {"preset": cfg.label}).encode(),
            "reconstruct_report.txt": _report(report)}


def _sniff(path):
    with open(path, encoding="utf-8") as fh:
        text = fh.read()
    first = text.split("\n", 40)
    if any(line == "#format=" + spectra.GRID_FORMAT for line in first):
        return "grid", text
    if any(line == "#format=" + tagstream.FORMAT_VERSION for line in first):
        return "tags", text
    if any(line.strip() == interference.CSV_HEADER for line in first):
        return "scan", text
    raise ValidationError(f"{path}: not a scan CSV, grid file or tag file")


def cmd_analyze(args):
    kind, text = _sniff(args.input)
    report = {"input": os.path.basename(args.input), "kind": kind}
    if kind == "scan":
        s = interference.parse_scan_csv(text)
        report["n_points"] = len(s)
        lo, hi = s.taus[0], s.taus[-1]
        if args.vis_lo_ps is not None or args.vis_hi_ps is not None:
            window = (_ps(args.vis_lo_ps) if args.vis_lo_ps is not None else lo,
                      _ps(args.vis_hi_ps) if args.vis_hi_ps is not None else hi)
        else:
            peak = float(s.taus[int(np.argmax(s.coincidence))])
            period = analysis.fringe_period()
            window = (max(lo, peak - period), min(hi, peak + period))
        try:
            report["visibility"] = analysis.visibility(s, window)
        except FransonError as e:
            report["visibility"] = "nan"
            report["visibility_error"] = str(e)
        try:
            report["envelope_fwhm_ps"] = analysis.envelope_fwhm(s) * 1e12
        except FransonError as e:
            report["envelope_fwhm_ps"] = "nan"
            report["envelope_error"] = str(e)
        try:
            report["fringe_period_fs"] = analysis.estimate_period(s) * 1e15
        except FransonError:
            report["fringe_period_fs"] = "nan"
    elif kind == "grid":
        js, header = spectra.parse_grid(text)
        m = js if js.kind == "intensity" else spectra.JointSpectrum(js.grid, js.intensity(), "intensity")
        mc = analysis.count_modes(m, args.threshold)
        report.update({"threshold": mc.threshold, "modes_total": mc.total, "modes_along_s": mc.along_s,
                       "modes_along_i": mc.along_i, "mass": m.mass()})
        if "tau_s" in header:
            report["tau_s"] = header["tau_s"]
    else:
        stream = tagstream.parse_tags_text(text)
        h = tagstream.coincidence_histogram(stream, args.window_ps, args.bin_ps)
        report.update({"n_events": len(stream), "window_ps": args.window_ps, "bin_ps": args.bin_ps,
                       "coincidences": int(h.counts.sum())})
        if h.counts.sum():
            report["peak_dt_ps"] = int(h.centers_ps[int(np.argmax(h.counts))])
    data = _report(report)
    sys.stdout.write(data.decode())
    return {"analysis_report.txt": data}


# argument parsing ---------------------------------------------------------------

def _u64(text):
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if not 0 <= v < 2 ** 64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return v


def _positive_int(text):
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if v < 1:
        raise argparse.ArgumentTypeError("must be >= 1")
    return v


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise ConfigError(message)


def _global_options(p, default):
    kw = {} if default else {"default": argparse.SUPPRESS}
    p.add_argument("--config", help="INI run configuration", **({"default": None} if default else kw))
    p.add_argument("--seed", type=_u64, help="random seed (unsigned 64-bit)",
                   **({"default": None} if default else kw))
    p.add_argument("--out", help="output directory (default: current)", **({"default": "."} if default else kw))
    p.add_argument("--threads", type=_positive_int, help="worker threads for parallel kernels",
                   **({"default": None} if default else kw))


def build_parser():
    p = _Parser(prog="franson", description="Franson interference of SPDC biphotons")
    _global_options(p, True)
    # the global options are accepted after the command name too
    common = argparse.ArgumentParser(add_help=False)
    _global_options(common, False)
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    sub.add_parser("presets", help="list the built-in source presets", parents=[common])

    s = sub.add_parser("scan", parents=[common], help="coincidence and singles versus delay")
    s.add_argument("--preset")
    s.add_argument("--tau-start-ps", type=float)
    s.add_argument("--tau-end-ps", type=float)
    g = s.add_mutually_exclusive_group()
    g.add_argument("--step-fs", type=float, help="delay step in fs")
    g.add_argument("--step-um", type=float, help="free-space path step in micrometres")
    s.add_argument("--vis-lo-ps", type=float)
    s.add_argument("--vis-hi-ps", type=float)

    s = sub.add_parser("jsi", parents=[common], help="spectral maps at a list of delays")
    s.add_argument("--preset")
    s.add_argument("--taus-ps", help="comma-separated delays in ps")
    s.add_argument("--threshold", type=float)

    s = sub.add_parser("events", parents=[common], help="sample a time-tag stream from a spectral map")
    s.add_argument("--preset")
    s.add_argument("--tau-ps", type=float)
    s.add_argument("--n-pairs", type=int)
    s.add_argument("--loss", type=float)

    s = sub.add_parser("reconstruct", parents=[common], help="rebuild the joint spectrum from a tag file")
    s.add_argument("tagfile")
    s.add_argument("--preset")
    s.add_argument("--pairing", choices=["auto", "by_pair_id", "by_window"])
    s.add_argument("--window-ps", type=int)
    s.add_argument("--coarsen", type=int)
    s.add_argument("--threshold", type=float)

    s = sub.add_parser("analyze", parents=[common], help="report observables of a scan CSV, grid file or tag file")
    s.add_argument("input")
    s.add_argument("--vis-lo-ps", type=float)
    s.add_argument("--vis-hi-ps", type=float)
    s.add_argument("--threshold", type=float, default=0.1)
    s.add_argument("--window-ps", type=int, default=tagstream.DEFAULT_WINDOW_PS)
    s.add_argument("--bin-ps", type=int, default=10)
    return p


COMMANDS = {"presets": cmd_presets, "scan": cmd_scan, "jsi": cmd_jsi, "events": cmd_events,
            "reconstruct": cmd_reconstruct, "analyze": cmd_analyze}


def main(argv=None):
    try:
        args = build_parser().parse_args(argv)
        if args.threads:
            kernels.set_threads(args.threads)
        outputs = COMMANDS[args.command](args)
        if outputs:
            for path in commit(outputs, args.out):
                print(path, file=sys.stderr)
        return 0
    except SystemExit as e:
        return int(e.code or 0)
    except FransonError as e:
        print(f"franson: error: {e}", file=sys.stderr)
        return e.exit_code
    except OSError as e:
        print(f"franson: I/O error: {e}", file=sys.stderr)
        return 3
    except (FloatingPointError, np.linalg.LinAlgError, OverflowError) as e:
        print(f"franson: numeric error: {e}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
