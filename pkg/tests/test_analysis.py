import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from heraldsim import rates
from heraldsim.analysis import (BackgroundMeasurement, DipScanResult, background_correct, dip_model,
                                gaussian_fit, visibility, write_fit_json, write_scan_csv)
from heraldsim.errors import FitError

PS = 1e-12
DELAYS = np.linspace(-15, 15, 21) * PS


def test_noiseless_recovery():
    y = dip_model(DELAYS, 100.0, 0.5, 0.7 * PS, 5.4 * PS)
    fit = gaussian_fit(DELAYS, y)
    for got, want in ((fit.baseline, 100.0), (fit.depth, 0.5), (fit.center, 0.7 * PS), (fit.fwhm, 5.4 * PS)):
        assert got == pytest.approx(want, rel=1e-6)
    assert fit.has_dip


def test_flat_series_has_no_dip(rng):
    y = rng.poisson(2000, DELAYS.size).astype(float)
    fit = gaussian_fit(DELAYS, y)
    v, err = visibility(fit)
    assert abs(v) <= 3 * err
    assert not fit.has_dip or abs(v) <= 3 * err


def test_full_dip_gives_unit_visibility():
    t = np.linspace(-30, 30, 61) * PS
    y = np.round(dip_model(t, 500.0, 1.0, 0.0, 6 * PS))
    assert y[30] == 0
    assert visibility(gaussian_fit(t, y))[0] == pytest.approx(1.0, abs=5e-3)


def test_synthetic_two_fold_width(rng):
    # 2-fold scan at the reference scale: about 1.2e5 counts per point, 20 % deep
    y = rng.poisson(dip_model(DELAYS, 1.26e5, 0.201, 0.0, 5.4 * PS)).astype(float)
    fit = gaussian_fit(DELAYS, y)
    assert fit.fwhm / PS == pytest.approx(5.4, abs=0.5)
    assert fit.depth == pytest.approx(0.201, abs=0.01)


def test_fit_uncertainty_matches_scatter():
    # covariance errors agree with the spread of repeated noisy fits
    rng = np.random.default_rng(7)
    truth = dip_model(DELAYS, 3000.0, 0.6, 0.0, 6 * PS)
    fits = [gaussian_fit(DELAYS, rng.poisson(truth).astype(float)) for _ in range(300)]
    depths = np.array([f.depth for f in fits])
    mean_err = np.mean([f.errors[1] for f in fits])
    assert np.std(depths) == pytest.approx(mean_err, rel=0.2)


def test_fit_failure_reports_residual():
    y = dip_model(DELAYS, 100.0, 0.5, 3 * PS, 5.4 * PS)
    with pytest.raises(FitError) as exc:
        gaussian_fit(DELAYS, y + 7.0, max_nfev=1)
    assert exc.value.residual >= 0


def test_too_few_points():
    with pytest.raises(ValueError):
        gaussian_fit(DELAYS[:4], np.ones(4))


def _scan(rng, base=3000.0, v=0.6):
    y = rng.poisson(dip_model(DELAYS, base, v, 0.0, 6 * PS)).astype(float)
    return DipScanResult(DELAYS, y, np.full(DELAYS.size, 900.0), 4, 100.0, gaussian_fit(DELAYS, y))


def test_background_zero_is_identity(rng):
    scan = _scan(rng)
    out = background_correct(scan, BackgroundMeasurement(0.0, 0.0, 0.0, 900.0))
    np.testing.assert_array_equal(out.corrected_counts, scan.counts)
    np.testing.assert_array_equal(out.corrected_sigma, scan.sigma)
    assert out.corrected_visibility[0] == pytest.approx(scan.visibility[0], abs=1e-12)
    assert out.corrected_fit.fwhm == pytest.approx(scan.fit.fwhm, rel=1e-9)
    assert out.flags == ()


@settings(max_examples=30, deadline=None)
@given(a=st.floats(0, 500), b=st.floats(0, 500), acc=st.floats(100, 5000))
def test_background_correction_linear(a, b, acc):
    scan = _scan(np.random.default_rng(0))
    ca = background_correct(scan, BackgroundMeasurement(0.0, a, 0.0, acc)).corrected_counts
    cb = background_correct(scan, BackgroundMeasurement(0.0, 0.0, b, acc)).corrected_counts
    cab = background_correct(scan, BackgroundMeasurement(0.0, a, b, acc)).corrected_counts
    np.testing.assert_allclose(cab - scan.counts, (ca - scan.counts) + (cb - scan.counts), atol=1e-9)
    np.testing.assert_allclose(scan.counts - ca, a * 900.0 / acc, rtol=1e-12, atol=1e-9)


def test_background_correction_raises_visibility_and_flags(rng):
    scan = _scan(rng)
    out = background_correct(scan, BackgroundMeasurement(2000.0, 300.0, 300.0, 900.0))
    assert out.corrected_visibility[0] > scan.visibility[0]
    # sigma adds the background in quadrature
    np.testing.assert_allclose(out.corrected_sigma, np.sqrt(scan.counts + 600.0))
    over = background_correct(scan, BackgroundMeasurement(0.0, 3000.0, 3000.0, 900.0))
    assert "negative_corrected_baseline" in over.flags


def test_background_validation():
    with pytest.raises(ValueError):
        BackgroundMeasurement(-1.0, 0.0, 0.0, 1.0)
    with pytest.raises(ValueError):
        BackgroundMeasurement(1.0, 0.0, 0.0, 0.0)


def test_sigma_is_square_root(rng):
    scan = _scan(rng)
    np.testing.assert_array_equal(scan.sigma, np.sqrt(scan.counts))


def test_outputs(tmp_path, rng):
    scan = background_correct(_scan(rng), BackgroundMeasurement(1.0, 50.0, 50.0, 900.0))
    write_scan_csv(tmp_path / "s.csv", scan)
    lines = (tmp_path / "s.csv").read_text().splitlines()
    assert lines[0] == "delay_ps,counts,sigma,corrected_counts,corrected_sigma"
    assert len(lines) == 22
    write_fit_json(tmp_path / "f.json", scan)
    d = json.loads((tmp_path / "f.json").read_text())
    assert d["corrected_visibility"] == pytest.approx(scan.corrected_visibility[0])
    assert d["background"]["background_total"] == 100.0


def test_ideal_pure_sources_reach_unit_visibility():
    # closed form: pure identical sources, mu -> 0, zero distinguishability
    for mu in (1e-2, 1e-3, 1e-4):
        pmf = rates.pair_pmf(np.array([mu]))
        v = rates.dip_prediction(pmf, pmf, (0.2, 0.2, 0.2, 0.2), 1.0)["raw"]
        assert v > 1 - 20 * mu
