"""Delay scans, Gaussian dip fits and multi-pair background correction."""
from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.optimize import least_squares

from .coincidence import count
from .errors import FitError
from .pipeline import Selection, simulate_runs

FOUR_LN2 = 4.0 * np.log(2.0)


def dip_model(tau, baseline, depth, center, fwhm):
    return baseline * (1.0 - depth * np.exp(-FOUR_LN2 * (tau - center) ** 2 / fwhm**2))


@dataclass(frozen=True)
class GaussianFit:
    baseline: float
    depth: float
    center: float
    fwhm: float
    covariance: np.ndarray = field(repr=False)
    residual: float = 0.0
    has_dip: bool = True

    @property
    def errors(self):
        return np.sqrt(np.clip(np.diag(self.covariance), 0.0, None))

    def to_dict(self):
        e = self.errors
        return {
            "baseline": self.baseline, "baseline_err": float(e[0]),
            "depth": self.depth, "depth_err": float(e[1]),
            "center_s": self.center, "center_err_s": float(e[2]),
            "fwhm_s": self.fwhm, "fwhm_err_s": float(e[3]),
            "chi2": self.residual, "has_dip": self.has_dip,
        }


def gaussian_fit(delays, counts, sigma=None, max_nfev=2000):
    """Weighted least squares of ``B (1 - v exp(-4 ln2 (t - t0)^2 / w^2))``.

    Default per-point errors are ``sqrt(max(counts, 1))``.  The depth is not
    restricted to [0, 1].  ``has_dip`` records whether any point lies two
    standard errors below the baseline estimate from the outer points.
    """
    t = np.asarray(delays, dtype=float)
    y = np.asarray(counts, dtype=float)
    if t.size < 5 or t.size != y.size:
        raise ValueError(f"need at least 5 matching (delay, count) points, got {t.size}")
    s = np.sqrt(np.maximum(y, 1.0)) if sigma is None else np.asarray(sigma, dtype=float)
    order = np.argsort(t)
    t, y, s = t[order], y[order], s[order]
    span = t[-1] - t[0]
    n_outer = max(1, int(round(0.125 * t.size)))
    outer = np.r_[y[:n_outer], y[-n_outer:]]
    b0 = float(np.mean(outer)) if np.mean(outer) > 0 else float(np.max(y) or 1.0)
    i_min = int(np.argmin(y))
    v0 = 1.0 - y[i_min] / b0 if b0 else 0.0
    has_dip = bool(np.any(y < b0 - 2.0 * s))
    # rescale so all parameters are O(1)
    scale_t = span / 2 if span > 0 else 1.0
    p0 = np.array([1.0, v0, (t[i_min] - t[0]) / scale_t - 1.0, 1.0])
    lo = np.array([1e-9, -5.0, -1.0, 1e-3])
    hi = np.array([np.inf, 5.0, 1.0, 20.0])
    p0 = np.clip(p0, lo + 1e-9, np.where(np.isfinite(hi), hi - 1e-9, p0))
    x = (t - t[0]) / scale_t - 1.0

    def resid(p):
        return (dip_model(x, p[0] * b0, p[1], p[2], p[3]) - y) / s

    res = least_squares(resid, p0, bounds=(lo, hi), method="trf", x_scale="jac",
                        xtol=1e-15, ftol=1e-15, gtol=1e-15, max_nfev=max_nfev)
    chi2 = float(np.sum(res.fun**2))
    if res.status <= 0 or not np.all(np.isfinite(res.x)):
        raise FitError(f"dip fit did not converge: {res.message}", chi2)
    jac = res.jac
    try:
        cov = np.linalg.inv(jac.T @ jac)
    except np.linalg.LinAlgError:
        cov = np.full((4, 4), np.inf)
    scale = np.array([b0, 1.0, scale_t, scale_t])
    cov = cov * np.outer(scale, scale)
    b, v, c, w = res.x
    return GaussianFit(float(b * b0), float(v), float(t[0] + (c + 1.0) * scale_t), float(w * scale_t),
                       cov, chi2, has_dip)


def visibility(fit):
    """Fractional dip depth and its standard error from the fit covariance."""
    return fit.depth, float(fit.errors[1])


@dataclass(frozen=True)
class BackgroundMeasurement:
    both_open: float
    signal1_blocked: float
    signal2_blocked: float
    accumulation: float

    def __post_init__(self):
        if min(self.both_open, self.signal1_blocked, self.signal2_blocked) < 0 or self.accumulation <= 0:
            raise ValueError("background counts must be non-negative and accumulation positive")

    @property
    def total(self):
        return self.signal1_blocked + self.signal2_blocked

    def to_dict(self):
        return {"both_open": self.both_open, "signal1_blocked": self.signal1_blocked,
                "signal2_blocked": self.signal2_blocked, "accumulation_s": self.accumulation,
                "background_total": self.total}


@dataclass(frozen=True)
class DipScanResult:
    delays: np.ndarray
    counts: np.ndarray
    accumulation: np.ndarray
    fold: int
    power: float
    fit: GaussianFit
    corrected_counts: np.ndarray | None = None
    corrected_sigma: np.ndarray | None = None
    corrected_fit: GaussianFit | None = None
    background: BackgroundMeasurement | None = None
    flags: tuple = ()

    @property
    def sigma(self):
        return np.sqrt(self.counts)

    @property
    def visibility(self):
        return visibility(self.fit)

    @property
    def corrected_visibility(self):
        return visibility(self.corrected_fit) if self.corrected_fit is not None else None

    def to_dict(self):
        d = {
            "fold": self.fold, "power_mw": self.power,
            "delays_ps": [float(x) for x in self.delays * 1e12],
            "counts": [int(c) for c in self.counts],
            "accumulation_s": [float(a) for a in self.accumulation],
            "fit": self.fit.to_dict(),
            "visibility": self.visibility[0], "visibility_err": self.visibility[1],
            "flags": list(self.flags),
        }
        if self.corrected_fit is not None:
            d["corrected_fit"] = self.corrected_fit.to_dict()
            d["corrected_visibility"], d["corrected_visibility_err"] = self.corrected_visibility
            d["background"] = self.background.to_dict()
        return d


def background_correct(scan, bg):
    """Subtract the blocked-arm counts (rescaled per point) and refit."""
    scale = scan.accumulation / bg.accumulation
    corrected = scan.counts - bg.total * scale
    sigma = np.sqrt(np.maximum(scan.counts, 1.0) + bg.total * scale**2)
    if bg.total == 0:
        sigma = np.sqrt(np.maximum(scan.counts, 1.0))
    fit = gaussian_fit(scan.delays, corrected, sigma)
    flags = tuple(scan.flags)
    if fit.baseline <= 0 or np.mean(corrected) <= 0:
        flags += ("negative_corrected_baseline",)
    return replace(scan, corrected_counts=corrected, corrected_sigma=sigma, corrected_fit=fit,
                   background=bg, flags=flags)


def fold_selection(fold):
    if fold == 4:
        return Selection(sources=(1, 2), heralds=(1, 2), min_live=2), ((1, 2, 3, 4),)
    if fold == 2:
        return Selection(sources=(1, 2), heralds=(), min_live=2), ((2, 3),)
    raise ValueError(f"fold must be 2 or 4, got {fold!r}")


def default_delays(setup):
    cfg = setup.config
    half = cfg.float("scan", "delay_half_range_ps") * 1e-12
    return np.linspace(-half, half, cfg.int("scan", "delay_points"))


def default_accumulation(setup, fold, power):
    cfg = setup.config
    if fold == 2:
        return cfg.float("scan", "accumulation_2fold_s")
    if abs(power - 100.0) < 1e-9:
        return cfg.float("scan", "accumulation_4fold_100mw_s")
    return cfg.float("scan", "accumulation_4fold_s")


def _dark_mode(setup, fold):
    return setup.config.str("simulation", "dark_mode_4fold") if fold == 4 else "full"


def _counts(setup, plans, sets, workers):
    cfg = replace(setup.coincidence, sets=sets)
    streams = simulate_runs(plans, workers=workers)
    return [count(s, cfg, duration=p.duration).cc(*sets[0]) for s, p in zip(streams, plans)]


def run_delay_scan(setup, fold, power, delays=None, accumulation=None, workers=None):
    """Simulated coincidence counts versus delay, with a Gaussian fit."""
    delays = default_delays(setup) if delays is None else np.asarray(delays, dtype=float)
    acc = default_accumulation(setup, fold, power) if accumulation is None else float(accumulation)
    selection, sets = fold_selection(fold)
    plans = [setup.plan(power_mw=power, duration=acc, selection=selection, key=("hom", fold, power, i),
                        delay=tau, dark_mode=_dark_mode(setup, fold))
             for i, tau in enumerate(delays)]
    counts = np.array(_counts(setup, plans, sets, setup.workers if workers is None else workers), dtype=float)
    acc_eff = np.full(delays.size, plans[0].duration)
    return DipScanResult(delays, counts, acc_eff, fold, float(power), gaussian_fit(delays, counts))


def measure_background(setup, power, accumulation=None, far_delay=None, workers=None):
    """4-fold counts with signal 1 blocked, with signal 2 blocked, and with
    both open far outside the dip."""
    acc = setup.config.float("scan", "background_accumulation_s") if accumulation is None else float(accumulation)
    far = default_delays(setup)[-1] if far_delay is None else far_delay
    selection, sets = fold_selection(4)
    plans = [setup.plan(power_mw=power, duration=acc, selection=selection, key=("background", power, name),
                        delay=far, blocked=blocked, dark_mode=_dark_mode(setup, 4))
             for name, blocked in (("open", ()), ("block1", (1,)), ("block2", (2,)))]
    n_open, n1, n2 = _counts(setup, plans, sets, setup.workers if workers is None else workers)
    return BackgroundMeasurement(float(n_open), float(n1), float(n2), plans[0].duration)


def write_scan_csv(path, scan):
    corr = scan.corrected_counts
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["delay_ps", "counts", "sigma", "corrected_counts", "corrected_sigma"])
        for i in range(scan.delays.size):
            w.writerow([
                f"{scan.delays[i] * 1e12:.6f}", int(scan.counts[i]), f"{np.sqrt(scan.counts[i]):.6f}",
                "" if corr is None else f"{corr[i]:.6f}",
                "" if corr is None else f"{scan.corrected_sigma[i]:.6f}",
            ])


def write_fit_json(path, scan):
    with open(path, "w") as fh:
        json.dump(scan.to_dict(), fh, indent=2, sort_keys=True)
