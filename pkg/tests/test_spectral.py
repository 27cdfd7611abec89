import numpy as np
import pytest

from heraldsim.dispersion import C_LIGHT
from heraldsim.errors import ConfigError, DispersionRangeError
from heraldsim.schmidt import decompose, purity
from heraldsim.spectral import (FrequencyGrid, SourceParams, build_jsa, phase_matched_temperature,
                                phase_matching_slope, phase_mismatch, pump_envelope, read_jsi_binary,
                                write_jsi_binary, write_jsi_csv)

PARAMS = SourceParams()


def test_pump_envelope_peak_and_width():
    assert abs(pump_envelope(0.0, PARAMS)) == pytest.approx(1.0)
    assert abs(pump_envelope(PARAMS.pump_sigma, PARAMS)) == pytest.approx(np.exp(-0.5), rel=1e-12)


def test_pump_bandwidth_time_bandwidth_product():
    # numerically Fourier-transform a 2 ps Gaussian intensity pulse and measure its spectral FWHM
    t = np.linspace(-2e-9, 2e-9, 2**16)
    dt = t[1] - t[0]
    field = np.exp(-2 * np.log(2) * t**2 / PARAMS.pump_duration_fwhm**2)
    power = np.abs(np.fft.fftshift(np.fft.fft(field))) ** 2
    power /= power.max()
    nu = np.fft.fftshift(np.fft.fftfreq(t.size, dt))
    pos = nu >= 0
    # half-maximum crossing on the decreasing positive-frequency flank
    half = np.interp(0.5, power[pos][::-1], nu[pos][::-1])
    fwhm_hz = 2 * half
    assert fwhm_hz * PARAMS.pump_duration_fwhm == pytest.approx(0.441, abs=0.01)
    assert PARAMS.pump_bandwidth_fwhm / (2 * np.pi) * PARAMS.pump_duration_fwhm == pytest.approx(0.4413, abs=1e-3)
    assert PARAMS.pump_bandwidth_fwhm_wavelength * 1e9 == pytest.approx(0.46, abs=0.01)
    # the envelope's intensity halves at half the bandwidth
    half = PARAMS.pump_bandwidth_fwhm / 2
    assert abs(pump_envelope(half, PARAMS)) ** 2 == pytest.approx(0.5, rel=1e-12)


def test_phase_matched_at_degeneracy():
    T = phase_matched_temperature(PARAMS)
    w = PARAMS.pump_omega / 2
    assert abs(phase_mismatch(w, w, PARAMS, T)) < 1e-3 * 2 * np.pi / PARAMS.poling_period
    assert 0 < T < 100


def test_phase_mismatch_is_continuous():
    w = PARAMS.pump_omega / 2
    base = phase_mismatch(w, w, PARAMS)
    steps = [phase_mismatch(w + d, w, PARAMS) - base for d in (1e9, 1e7, 1e5)]
    assert abs(steps[0]) > abs(steps[1]) > abs(steps[2])
    assert abs(steps[2]) < 1e-2


def test_ridge_slope_is_positive_unity():
    # group-velocity matching: the dk = 0 ridge runs along w_s - w_i
    assert phase_matching_slope(PARAMS) == pytest.approx(1.0, abs=0.1)


def test_out_of_range_wavelength_rejected():
    with pytest.raises(DispersionRangeError):
        phase_mismatch(2 * np.pi * C_LIGHT / 10e-6, 2 * np.pi * C_LIGHT / 1584e-9, PARAMS)


@pytest.mark.parametrize("field,value", [
    ("poling_period", 0.0), ("poling_period", -1e-6), ("crystal_length", 0.0),
    ("pump_duration_fwhm", -1.0), ("pump_center_wavelength", float("nan")),
])
def test_invalid_params_name_the_field(field, value):
    with pytest.raises(ConfigError) as exc:
        SourceParams(**{field: value})
    assert exc.value.field == field


def test_degenerate_wavelength_must_be_twice_pump():
    with pytest.raises(ConfigError, match="degenerate_wavelength"):
        SourceParams(degenerate_wavelength=1585e-9)


def test_grid_validation():
    with pytest.raises(ConfigError):
        FrequencyGrid(15, 1.0, 1.0, 1.0)
    narrow = FrequencyGrid.around_degeneracy(PARAMS, 64, span_sigmas=6.0)
    with pytest.raises(ConfigError, match="span"):
        build_jsa(PARAMS, narrow)


@pytest.fixture(scope="module")
def jsa():
    return build_jsa(PARAMS, FrequencyGrid.around_degeneracy(PARAMS, 256))


def test_jsa_normalised(jsa):
    assert jsa.norm() == pytest.approx(1.0, abs=1e-9)


def test_jsi_single_lobe_at_degeneracy(jsa):
    i = jsa.intensity
    s, k = np.unravel_index(np.argmax(i), i.shape)
    n = jsa.grid.n_points
    assert abs(s - (n - 1) / 2) <= 1 and abs(k - (n - 1) / 2) <= 1
    lam = lambda w: 2 * np.pi * C_LIGHT / w * 1e9
    ws = np.sum(i.sum(1) * jsa.grid.signal_axis) / i.sum()
    wi = np.sum(i.sum(0) * jsa.grid.idler_axis) / i.sum()
    assert lam(ws) == pytest.approx(1584.0, abs=0.05)
    assert lam(wi) == pytest.approx(1584.0, abs=0.05)
    # single lobe: side lobes of the sinc stay far below the peak
    assert np.sort(i.ravel())[-1] == i.max()
    marg = i.sum(1)
    peaks = np.flatnonzero((marg[1:-1] > marg[:-2]) & (marg[1:-1] > marg[2:]))
    assert all(marg[p + 1] < 0.05 * marg.max() for p in peaks if abs(p + 1 - s) > 3)


def test_purity_near_reference(jsa):
    assert purity(decompose(jsa)) == pytest.approx(0.82, abs=0.05)


def test_grid_convergence():
    coarse = purity(decompose(build_jsa(PARAMS, FrequencyGrid.around_degeneracy(PARAMS, 128))))
    fine = purity(decompose(build_jsa(PARAMS, FrequencyGrid.around_degeneracy(PARAMS, 256))))
    assert abs(coarse - fine) < 0.005


def test_longer_crystal_lowers_purity(jsa):
    from dataclasses import replace

    long = replace(PARAMS, crystal_length=10 * PARAMS.crystal_length)
    p_long = purity(decompose(build_jsa(long, FrequencyGrid.around_degeneracy(long, 256))))
    assert p_long < purity(decompose(jsa))


def test_jsi_file_roundtrip(jsa, tmp_path):
    write_jsi_binary(tmp_path / "jsi.bin", jsa)
    s, i, inten = read_jsi_binary(tmp_path / "jsi.bin")
    np.testing.assert_allclose(s, jsa.grid.signal_axis, rtol=1e-12)
    np.testing.assert_allclose(i, jsa.grid.idler_axis, rtol=1e-12)
    np.testing.assert_array_equal(inten, jsa.intensity)
    write_jsi_csv(tmp_path / "jsi.csv", jsa)
    table = np.loadtxt(tmp_path / "jsi.csv", delimiter=",", skiprows=1)
    assert table.shape == (jsa.grid.n_points**2, 3)
    np.testing.assert_allclose(table[:, 2].reshape(inten.shape), inten, rtol=1e-11, atol=1e-300)


def test_truncated_binary_rejected(jsa, tmp_path):
    path = tmp_path / "bad.bin"
    write_jsi_binary(path, jsa)
    path.write_bytes(path.read_bytes()[:-8])
    with pytest.raises(ValueError, match="truncated"):
        read_jsi_binary(path)
