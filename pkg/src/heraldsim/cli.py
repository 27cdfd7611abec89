"""Command-line entry point: ``heraldsim <subcommand> [options]``."""
from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

import numpy as np

from .coincidence import CoincidenceConfig, count
from .config import Config
from .detection import read_tags_binary, read_tags_csv, write_tags_binary, write_tags_csv
from .errors import ConfigError, DispersionRangeError, FitError, UnsortedStreamError
from .rng import DEFAULT_SEED

CONVERGED_POINTS = 128


def _powers(text):
    try:
        values = [float(x) for x in text.replace(",", " ").split()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a list of powers: {text!r}") from None
    if not values or any(v < 0 for v in values):
        raise argparse.ArgumentTypeError("powers must be non-negative")
    return values


def _parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="INI file layered over the packaged defaults")
    common.add_argument("--seed", type=int, help=f"random seed (default from config, {DEFAULT_SEED})")
    common.add_argument("--out", default="out", help="output directory (default: ./out)")
    common.add_argument("--workers", type=int, help="worker processes (results do not depend on it)")

    p = argparse.ArgumentParser(prog="heraldsim", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)
    sub.add_parser("jsa", parents=[common], help="joint spectral intensity grid and purity")
    sub.add_parser("schmidt", parents=[common], help="Schmidt decomposition summary")
    ps = sub.add_parser("power-scan", parents=[common], help="singles and herald coincidences vs pump power")
    ps.add_argument("--powers", type=_powers)
    gs = sub.add_parser("g2-scan", parents=[common], help="heralded g2 vs pump power")
    gs.add_argument("--powers", type=_powers)
    hs = sub.add_parser("hom", parents=[common], help="delay scan with Gaussian dip fit")
    hs.add_argument("--fold", type=int, choices=(2, 4), default=4)
    hs.add_argument("--powers", type=_powers, default=None, help="one scan per power (default: 100)")
    hs.add_argument("--corrected", action="store_true", help="measure and subtract the multi-pair background")
    cs = sub.add_parser("count", parents=[common], help="coincidence counts of a tag file, as JSON")
    cs.add_argument("tags", nargs="?", help="tag file (.csv or binary); omit with --simulate")
    cs.add_argument("--simulate", action="store_true", help="simulate a tag file first (written to --out)")
    cs.add_argument("--powers", type=_powers, help="pump power for --simulate (first value)")
    cs.add_argument("--duration", type=float, default=None, help="acquisition time in s")
    cs.add_argument("--window-ns", type=float, default=None)
    rp = sub.add_parser("report", parents=[common], help="headline numbers vs reference values")
    rp.add_argument("--skip", default="", help="comma-separated parts to leave out")
    return p


def _setup(args):
    from .pipeline import Setup

    cfg = Config.load(args.config)
    return Setup.from_config(cfg, seed=args.seed, workers=args.workers)


def _outdir(args):
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _write_rows(path, rows):
    keys = list(rows[0]) if rows else []
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=keys)
        w.writeheader()
        w.writerows(rows)


def _dump(path, obj):
    from .experiments import report_json

    Path(path).write_text(report_json(obj))


def cmd_jsa(args):
    from .experiments import spectral_summary
    from .spectral import write_jsi_binary, write_jsi_csv

    cfg = Config.load(args.config)
    if cfg.int("grid", "n_points") < CONVERGED_POINTS:
        print(f"warning: grid of {cfg.int('grid', 'n_points')} points is below {CONVERGED_POINTS}; "
              "purity may not be converged", file=sys.stderr)
    setup = _setup(args)
    out = _outdir(args)
    write_jsi_csv(out / "jsi.csv", setup.jsa1)
    write_jsi_binary(out / "jsi.bin", setup.jsa1)
    s = spectral_summary(setup)
    i = setup.jsa1.intensity
    ws, wi = setup.grid.signal_axis, setup.grid.idler_axis
    from .dispersion import C_LIGHT

    s["signal_peak_nm"] = 2 * np.pi * C_LIGHT / float(np.sum(i.sum(1) * ws) / i.sum()) * 1e9
    s["idler_peak_nm"] = 2 * np.pi * C_LIGHT / float(np.sum(i.sum(0) * wi) / i.sum()) * 1e9
    _dump(out / "jsa_summary.json", s)
    print(f"purity {s['purity']:.4f}  Schmidt number {s['schmidt_number_amplitude']:.4f}  "
          f"JSI Schmidt number {s['schmidt_number_jsi']:.4f}  "
          f"centre {s['signal_peak_nm']:.2f} / {s['idler_peak_nm']:.2f} nm")


def cmd_schmidt(args):
    from .experiments import spectral_summary
    from .schmidt import overlap_terms

    setup = _setup(args)
    out = _outdir(args)
    s = spectral_summary(setup)
    s["coefficients"] = [float(x) for x in setup.schmidt1.coefficients[:20]]
    terms = overlap_terms(setup.rho1, setup.rho2)
    s["overlap_zero_delay"] = terms.visibility
    s["overlap_decomposition"] = {"purity_1": terms.purity_1, "purity_2": terms.purity_2,
                                  "distance_sq": terms.distance_sq}
    _dump(out / "schmidt.json", s)
    _write_rows(out / "schmidt.csv", [{"mode": k, "coefficient": float(c)}
                                      for k, c in enumerate(setup.schmidt1.coefficients)
                                      if c >= setup.cutoff])
    print(f"purity {s['purity']:.4f}  K {s['schmidt_number_amplitude']:.4f}  "
          f"overlap(0) {terms.visibility:.4f}  overlap FWHM {s['overlap_fwhm_ps']:.2f} ps")


def cmd_power_scan(args):
    from .experiments import linearity, power_scan

    setup = _setup(args)
    out = _outdir(args)
    rows = power_scan(setup, powers=args.powers)
    _write_rows(out / "power_scan.csv", rows)
    fits = {"singles": linearity(rows, "singles_cps"), "coincidences": linearity(rows, "coincidences_cps")}
    _dump(out / "power_scan.json", {"rows": rows, "linearity": fits})
    for r in rows:
        print(f"{r['power_mw']:7.2f} mW  singles {r['singles_cps']:10.1f} cps  "
              f"coincidences {r['coincidences_cps']:9.1f} cps")
    for name, f in fits.items():
        if f:
            print(f"{name} linear fit R^2 = {f['r2']:.5f}")


def cmd_g2_scan(args):
    from .experiments import g2_scan

    setup = _setup(args)
    out = _outdir(args)
    rows = g2_scan(setup, powers=args.powers)
    _write_rows(out / "g2_scan.csv", rows)
    for r in rows:
        if r["g2"] is None:
            print(f"{r['power_mw']:7.2f} mW  g2 undefined ({r['status']})")
        else:
            print(f"{r['power_mw']:7.2f} mW  g2 = {r['g2']:.4f} +- {r['g2_err']:.4f}")


def cmd_hom(args):
    from .analysis import write_fit_json, write_scan_csv
    from .experiments import hom

    setup = _setup(args)
    out = _outdir(args)
    for p in args.powers or [100.0]:
        scan = hom(setup, args.fold, p, corrected=args.corrected)
        stem = f"hom_fold{args.fold}_{p:g}mW"
        write_scan_csv(out / f"{stem}.csv", scan)
        write_fit_json(out / f"{stem}.json", scan)
        v, e = scan.visibility
        line = f"{p:g} mW fold {args.fold}: V = {v:.4f} +- {e:.4f}, FWHM {scan.fit.fwhm * 1e12:.2f} ps"
        if scan.corrected_fit is not None:
            vc, ec = scan.corrected_visibility
            line += f", corrected V = {vc:.4f} +- {ec:.4f}"
        print(line)


def _read_tags(path):
    return read_tags_csv(path) if str(path).lower().endswith(".csv") else read_tags_binary(path)


def cmd_count(args):
    cfg = Config.load(args.config)
    rep = cfg.float("emission", "repetition_rate_hz")
    window = (args.window_ns if args.window_ns is not None else cfg.float("coincidence", "window_ns")) * 1e-9
    ccfg = CoincidenceConfig(window=window, pulse_period=1.0 / rep)
    duration = args.duration
    if args.simulate:
        from .pipeline import Selection, simulate_runs

        setup = _setup(args)
        duration = 0.01 if duration is None else duration
        power = (args.powers or [100.0])[0]
        plan = setup.plan(power_mw=power, duration=duration, selection=Selection(), key=("count", power))
        streams = simulate_runs([plan], workers=setup.workers)[0]
        out = _outdir(args)
        write_tags_binary(out / "tags.bin", streams)
        write_tags_csv(out / "tags.csv", streams)
        duration = plan.duration
    elif args.tags:
        streams = _read_tags(args.tags)
    else:
        raise ConfigError("tags", "give a tag file or --simulate")
    report = count(streams, ccfg, duration=duration, workers=args.workers or 1)
    text = report.to_json()
    if args.simulate or args.out != "out":
        (_outdir(args) / "counts.json").write_text(text + "\n")
    print(text)


def cmd_report(args):
    from .experiments import REPORT_PARTS, build_report, report_json

    skip = tuple(s for s in args.skip.split(",") if s)
    unknown = set(skip) - set(REPORT_PARTS)
    if unknown:
        raise ConfigError("skip", f"unknown report parts {sorted(unknown)}; choose from {list(REPORT_PARTS)}")
    setup = _setup(args)
    out = _outdir(args)
    text = report_json(build_report(setup, skip=skip))
    (out / "report.json").write_text(text)
    checks = json.loads(text)["checks"]
    for k, v in checks.items():
        state = {True: "PASS", False: "FAIL", None: "n/a"}[v["pass"]]
        print(f"{state:4s}  {k}: {v['value']}")


COMMANDS = {
    "jsa": cmd_jsa, "schmidt": cmd_schmidt, "power-scan": cmd_power_scan, "g2-scan": cmd_g2_scan,
    "hom": cmd_hom, "count": cmd_count, "report": cmd_report,
}


def main(argv=None):
    args = _parser().parse_args(argv)
    try:
        COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"heraldsim: configuration error: {exc}", file=sys.stderr)
        return 2
    except (DispersionRangeError, UnsortedStreamError, FitError, ValueError, OSError) as exc:
        print(f"heraldsim: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
