"""Experiment drivers shared by the CLI and the acceptance suite."""
from __future__ import annotations

import json
from dataclasses import replace

import numpy as np
from scipy.stats import linregress

from .analysis import background_correct, measure_background, run_delay_scan
from .coincidence import count, g2_heralded
from .errors import FitError, InsufficientCountsError
from .pipeline import Selection, simulate_runs
from .schmidt import overlap_fwhm, purity, schmidt_number_of_jsi

SINGLE_SOURCE = Selection(sources=(1,), heralds=(1,))
HERALD_SETS = ((1, 2), (1, 3), (1, 2, 3))


def spectral_summary(setup):
    return {
        "purity": purity(setup.schmidt1),
        "schmidt_number_amplitude": 1.0 / purity(setup.schmidt1),
        "schmidt_number_jsi": schmidt_number_of_jsi(setup.jsa1.intensity),
        "crystal_temperature_c": setup.jsa1.temperature,
        "overlap_fwhm_ps": overlap_fwhm(setup.rho1, setup.rho2) * 1e12,
        "n_modes_kept": int(setup.schmidt1.truncated(setup.cutoff).size),
    }


def _herald_reports(setup, powers, duration, tag, workers=None):
    plans = [setup.plan(power_mw=p, duration=duration, selection=SINGLE_SOURCE, key=(tag, p))
             for p in powers]
    streams = simulate_runs(plans, workers=setup.workers if workers is None else workers)
    cfg = replace(setup.coincidence, sets=HERALD_SETS)
    return [count(s, cfg, duration=pl.duration) for s, pl in zip(streams, plans)]


def power_scan(setup, powers=None, duration=None, workers=None):
    """Idler-1 singles and herald coincidences CC12 + CC13 with only source 1 pumped."""
    cfg = setup.config
    powers = list(cfg.floats("rates", "powers_mw") if powers is None else powers)
    duration = cfg.float("rates", "duration_s") if duration is None else duration
    rows = []
    for p, rep in zip(powers, _herald_reports(setup, powers, duration, "rates", workers)):
        rows.append({
            "power_mw": p,
            "singles_cps": rep.rate(1),
            "coincidences_cps": (rep.cc(1, 2) + rep.cc(1, 3)) / rep.duration,
            "singles": rep.singles[1],
            "coincidences": rep.cc(1, 2) + rep.cc(1, 3),
            "duration_s": rep.duration,
        })
    return rows


def linearity(rows, key):
    x = np.array([r["power_mw"] for r in rows])
    y = np.array([r[key] for r in rows])
    if x.size < 3:
        return None
    fit = linregress(x, y)
    return {"slope_per_mw": float(fit.slope), "intercept": float(fit.intercept), "r2": float(fit.rvalue**2)}


def g2_scan(setup, powers=None, duration=None, workers=None):
    cfg = setup.config
    powers = list(cfg.floats("g2", "powers_mw") if powers is None else powers)
    duration = cfg.float("g2", "duration_s") if duration is None else duration
    rows = []
    for p, rep in zip(powers, _herald_reports(setup, powers, duration, "g2", workers)):
        row = {"power_mw": p, "sc1": rep.singles[1], "cc12": rep.cc(1, 2), "cc13": rep.cc(1, 3),
               "cc123": rep.cc(1, 2, 3), "duration_s": rep.duration}
        try:
            row["g2"], row["g2_err"] = g2_heralded(rep)
            row["status"] = "ok"
        except InsufficientCountsError:
            row["g2"] = row["g2_err"] = None
            row["status"] = "insufficient counts"
        rows.append(row)
    return rows


def hom(setup, fold, power, corrected=False, delays=None, accumulation=None, background_accumulation=None,
        workers=None):
    scan = run_delay_scan(setup, fold, power, delays=delays, accumulation=accumulation, workers=workers)
    if corrected and fold == 4:
        acc = scan.accumulation[0] / setup.accumulation_scale if background_accumulation is None else background_accumulation
        bg = measure_background(setup, power, accumulation=acc, workers=workers)
        scan = background_correct(scan, bg)
    return scan


def _check(value, reference):
    """Compare ``value`` with a (target, tolerance) pair."""
    if value is None:
        return {"value": None, "target": reference[0], "tolerance": reference[1], "pass": None}
    return {"value": value, "target": reference[0], "tolerance": reference[1], "pass": bool(abs(value - reference[0]) <= reference[1])}


def _bound(value, limit, kind):
    if value is None:
        return {"value": None, kind: limit, "pass": None}
    ok = value <= limit if kind == "max" else value >= limit
    return {"value": value, kind: limit, "pass": bool(ok)}


REPORT_PARTS = ("spectral", "rates", "g2", "background", "hom4", "hom2")


def build_report(setup, skip=(), workers=None):
    """Headline numbers against their reference values, with pass/fail per tolerance.

    Parts listed in ``skip`` (or failing) are reported as explicit nulls.
    """
    cfg = setup.config
    tol = {k: cfg.floats("report", k) for k in cfg.section("report") if not k.startswith("accumulation")}
    out = {"seed": setup.seed, "checks": {}, "results": {}}
    checks, results = out["checks"], out["results"]

    def run(name, fn):
        if name in skip:
            results[name] = None
            return None
        try:
            value = fn()
        except (FitError, InsufficientCountsError, ValueError) as exc:
            results[name] = {"error": str(exc)}
            return None
        results[name] = value
        return value

    spectral = run("spectral", lambda: spectral_summary(setup))
    checks["purity"] = _check(spectral and spectral["purity"], tol["purity"])
    checks["schmidt_number_jsi"] = _check(spectral and spectral["schmidt_number_jsi"], tol["schmidt_number_jsi"])

    def rates_part():
        rows = power_scan(setup, workers=workers)
        top = max(rows, key=lambda r: r["power_mw"])
        return {"rows": rows, "at_max_power": top,
                "singles_linearity": linearity(rows, "singles_cps"),
                "coincidence_linearity": linearity(rows, "coincidences_cps")}

    rp = run("rates", rates_part)
    checks["idler_singles_cps"] = _check(rp and rp["at_max_power"]["singles_cps"], tol["idler_singles_cps"])
    checks["herald_coincidences_cps"] = _check(rp and rp["at_max_power"]["coincidences_cps"],
                                               tol["herald_coincidences_cps"])
    r2 = None if rp is None else min(rp["singles_linearity"]["r2"], rp["coincidence_linearity"]["r2"])
    checks["rate_linearity_r2"] = _bound(r2, tol["rate_linearity_r2_min"][0], "min")

    g2 = run("g2", lambda: g2_scan(setup, workers=workers))
    g2_top = None
    if g2:
        top = max(g2, key=lambda r: r["power_mw"])
        g2_top = top["g2"]
    checks["g2_100mw"] = _check(g2_top, tol["g2_100mw"])

    acc = {p: cfg.float("report", f"accumulation_4fold_{int(p)}mw_s") for p in (100, 50, 10)}

    def bg_part():
        bg = measure_background(setup, 100.0, accumulation=cfg.float("scan", "background_accumulation_s"),
                                workers=workers)
        return bg.to_dict()

    bgp = run("background", bg_part)
    checks["background_900s_counts"] = _check(bgp and bgp["background_total"] / setup.accumulation_scale,
                                              tol["background_900s_counts"])

    def hom4_part():
        return {str(int(p)): hom(setup, 4, p, corrected=True, accumulation=acc[p], workers=workers).to_dict()
                for p in (100, 50, 10)}

    h4 = run("hom4", hom4_part)
    for p in (100, 50, 10):
        key = f"visibility_4fold_corrected_{p}mw"
        checks[key] = _check(h4 and h4[str(p)]["corrected_visibility"], tol[key])
    checks["visibility_4fold_raw_100mw"] = _check(h4 and h4["100"]["visibility"], tol["visibility_4fold_raw_100mw"])
    checks["visibility_4fold_raw_100mw_above_half"] = _bound(h4 and h4["100"]["visibility"], 0.5, "min")
    checks["fwhm_4fold_ps"] = _check(h4 and h4["100"]["fit"]["fwhm_s"] * 1e12, tol["fwhm_4fold_ps"])

    h2 = run("hom2", lambda: hom(setup, 2, cfg.float("scan", "accumulation_2fold_power_mw"),
                                 accumulation=cfg.float("report", "accumulation_2fold_s"),
                                 workers=workers).to_dict())
    checks["fwhm_2fold_ps"] = _check(h2 and h2["fit"]["fwhm_s"] * 1e12, tol["fwhm_2fold_ps"])
    checks["visibility_2fold_max"] = _bound(h2 and h2["visibility"], tol["visibility_2fold_max"][0], "max")
    return out


def report_json(report):
    return json.dumps(report, indent=2, sort_keys=True, default=_json_default) + "\n"


def _json_default(obj):
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"cannot serialise {type(obj).__name__}")
