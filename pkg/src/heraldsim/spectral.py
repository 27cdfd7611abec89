"""Joint spectral amplitude of a type-II PPKTP down-converter.

All quantities are SI: wavelengths and lengths in metres, durations in
seconds, frequencies as angular frequency (rad/s).
"""
from __future__ import annotations

import struct
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq

from .dispersion import C_LIGHT, load_ktp
from .errors import ConfigError, DispersionRangeError

# Type-II polarisation assignment: pump and signal on y (H), idler on z (V).
PUMP_AXIS = "y"
SIGNAL_AXIS = "y"
IDLER_AXIS = "z"

JSI_MAGIC = b"JSI1"


@dataclass(frozen=True)
class SourceParams:
    pump_center_wavelength: float = 792e-9
    pump_duration_fwhm: float = 2e-12
    crystal_length: float = 30e-3
    poling_period: float = 46.1e-6
    crystal_temperature: float = 28.8
    degenerate_wavelength: float = 1584e-9
    # Rigid shift of the whole JSA along both frequency axes (rad/s); models
    # residual centre-wavelength mismatch between two nominally equal sources.
    center_offset: float = 0.0
    # Build at the temperature that phase-matches exact degeneracy instead of
    # using ``crystal_temperature`` verbatim.
    tune_temperature: bool = True

    def __post_init__(self):
        for name in ("pump_center_wavelength", "pump_duration_fwhm", "crystal_length",
                     "poling_period", "degenerate_wavelength"):
            value = getattr(self, name)
            if not np.isfinite(value) or value <= 0:
                raise ConfigError(name, f"must be strictly positive, got {value!r}")
        if abs(self.degenerate_wavelength - 2 * self.pump_center_wavelength) > 0.1e-9:
            raise ConfigError(
                "degenerate_wavelength",
                f"{self.degenerate_wavelength * 1e9:.3f} nm is not twice the pump wavelength "
                f"{self.pump_center_wavelength * 1e9:.3f} nm",
            )

    @property
    def pump_omega(self):
        return 2 * np.pi * C_LIGHT / self.pump_center_wavelength

    @property
    def pump_sigma(self):
        """Amplitude 1/e half-width of the pump spectrum: |E| = exp(-d^2 / (2 sigma^2)).

        For a transform-limited Gaussian pulse the intensity FWHMs satisfy
        dw * dt = 4 ln 2, and the intensity FWHM is 2 sqrt(ln 2) sigma.
        """
        return 2 * np.sqrt(np.log(2)) / self.pump_duration_fwhm

    @property
    def pump_bandwidth_fwhm(self):
        """Intensity FWHM of the pump spectrum in rad/s."""
        return 4 * np.log(2) / self.pump_duration_fwhm

    @property
    def pump_bandwidth_fwhm_wavelength(self):
        lam = self.pump_center_wavelength
        return self.pump_bandwidth_fwhm * lam * lam / (2 * np.pi * C_LIGHT)


@dataclass(frozen=True)
class FrequencyGrid:
    n_points: int
    signal_center: float
    idler_center: float
    span: float
    labels: tuple = ("signal", "idler")

    def __post_init__(self):
        if int(self.n_points) != self.n_points or self.n_points < 16:
            raise ConfigError("n_points", f"need an integer >= 16, got {self.n_points!r}")
        if not self.span > 0:
            raise ConfigError("span", f"must be positive, got {self.span!r}")

    @classmethod
    def around_degeneracy(cls, params, n_points=256, span_sigmas=10.0):
        """Square grid centred on degeneracy covering ``span_sigmas`` pump sigmas in total."""
        center = params.pump_omega / 2
        return cls(int(n_points), center, center, span_sigmas * params.pump_sigma)

    @property
    def step(self):
        return self.span / (self.n_points - 1)

    def _axis(self, center):
        return center + np.linspace(-self.span / 2, self.span / 2, self.n_points)

    @property
    def signal_axis(self):
        return self._axis(self.signal_center)

    @property
    def idler_axis(self):
        return self._axis(self.idler_center)

    def check_covers(self, params, n_sigma=4.0):
        if self.span / 2 < n_sigma * params.pump_sigma:
            raise ConfigError(
                "span",
                f"grid half-span {self.span / 2:.3g} rad/s is below {n_sigma} pump sigmas "
                f"({n_sigma * params.pump_sigma:.3g} rad/s)",
            )


@dataclass(frozen=True)
class JointSpectralAmplitude:
    grid: FrequencyGrid
    amplitude: np.ndarray = field(repr=False)  # [signal, idler]
    temperature: float = float("nan")

    @property
    def intensity(self):
        return np.abs(self.amplitude) ** 2

    def norm(self):
        return float(np.sum(self.intensity) * self.grid.step**2)

    def matrix(self):
        """Discrete amplitude with unit Frobenius norm (for decompositions)."""
        return self.amplitude * self.grid.step


def pump_envelope(detuning_sum, params):
    """Unit-peak Gaussian pump amplitude at ``w_s + w_i - w_p0``."""
    d = np.asarray(detuning_sum, dtype=float)
    return np.exp(-(d * d) / (2 * params.pump_sigma**2)).astype(complex)


def phase_mismatch(omega_s, omega_i, params, temperature=None):
    """Quasi-phase-matched wave-vector mismatch (rad/m).

    dk = k_p(w_s + w_i) - k_s(w_s) - k_i(w_i) + 2 pi / Lambda, with the grating
    vector oriented to cancel the material mismatch.
    """
    ktp = load_ktp()
    T = params.crystal_temperature if temperature is None else temperature
    ws = np.asarray(omega_s, dtype=float)
    wi = np.asarray(omega_i, dtype=float)
    kp = ktp.wavenumber(PUMP_AXIS, ws + wi, T)
    ks = ktp.wavenumber(SIGNAL_AXIS, ws, T)
    ki = ktp.wavenumber(IDLER_AXIS, wi, T)
    return kp - ks - ki + 2 * np.pi / params.poling_period


def phase_matched_temperature(params):
    """Crystal temperature at which degenerate emission is exactly phase matched."""
    ktp = load_ktp()
    w = np.pi * C_LIGHT / params.pump_center_wavelength
    lo, hi = ktp.temperature_range
    f = lambda T: float(phase_mismatch(w, w, params, temperature=T))
    if f(lo) * f(hi) > 0:
        raise DispersionRangeError(
            f"no phase-matching temperature in {lo}-{hi} C for poling period {params.poling_period * 1e6:.3f} um"
        )
    return brentq(f, lo, hi, xtol=1e-10)


def operating_temperature(params):
    return phase_matched_temperature(params) if params.tune_temperature else params.crystal_temperature


def phase_matching_slope(params, temperature=None, rel_step=1e-6):
    """Slope d(w_i)/d(w_s) of the dk = 0 ridge at degeneracy."""
    T = operating_temperature(params) if temperature is None else temperature
    w = params.pump_omega / 2
    h = w * rel_step
    dks = (phase_mismatch(w + h, w, params, T) - phase_mismatch(w - h, w, params, T)) / (2 * h)
    dki = (phase_mismatch(w, w + h, params, T) - phase_mismatch(w, w - h, params, T)) / (2 * h)
    return float(-dks / dki)


def build_jsa(params, grid):
    grid.check_covers(params)
    T = operating_temperature(params)
    ws, wi = np.meshgrid(grid.signal_axis - params.center_offset,
                         grid.idler_axis - params.center_offset, indexing="ij")
    dk = phase_mismatch(ws, wi, params, T)
    x = dk * params.crystal_length / 2
    f = pump_envelope(ws + wi - params.pump_omega, params) * np.sinc(x / np.pi)
    norm = np.sqrt(np.sum(np.abs(f) ** 2) * grid.step**2)
    return JointSpectralAmplitude(grid, f / norm, temperature=T)


def write_jsi_csv(path, jsa):
    ws, wi = np.meshgrid(jsa.grid.signal_axis, jsa.grid.idler_axis, indexing="ij")
    table = np.column_stack([ws.ravel(), wi.ravel(), jsa.intensity.ravel()])
    np.savetxt(path, table, delimiter=",", header="signal_omega_rad_s,idler_omega_rad_s,intensity",
               comments="", fmt="%.12e")


def write_jsi_binary(path, jsa):
    """Little-endian: magic, uint32 n_signal, uint32 n_idler, 4 float64 axis
    descriptors (signal start, signal step, idler start, idler step), then the
    intensity as float64, signal-major."""
    g = jsa.grid
    with open(path, "wb") as fh:
        fh.write(JSI_MAGIC)
        fh.write(struct.pack("<II", g.n_points, g.n_points))
        fh.write(struct.pack("<4d", g.signal_axis[0], g.step, g.idler_axis[0], g.step))
        fh.write(np.ascontiguousarray(jsa.intensity, dtype="<f8").tobytes())


def read_jsi_binary(path):
    """Return (signal_axis, idler_axis, intensity)."""
    with open(path, "rb") as fh:
        if fh.read(4) != JSI_MAGIC:
            raise ValueError(f"{path}: not a JSI grid file")
        ns, ni = struct.unpack("<II", fh.read(8))
        s0, ds, i0, di = struct.unpack("<4d", fh.read(32))
        data = np.frombuffer(fh.read(8 * ns * ni), dtype="<f8")
    if data.size != ns * ni:
        raise ValueError(f"{path}: truncated grid ({data.size} of {ns * ni} values)")
    return s0 + ds * np.arange(ns), i0 + di * np.arange(ni), data.reshape(ns, ni).copy()
