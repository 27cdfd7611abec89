"""Temperature-dependent KTP refractive indices.

Coefficients live in ``data/ktp_sellmeier.ini`` so that every golden value in
the test-suite is tied to one pinned coefficient set.
"""
from __future__ import annotations

import configparser
from dataclasses import dataclass
from functools import lru_cache
from importlib import resources

import numpy as np

from .errors import DispersionRangeError

C_LIGHT = 299_792_458.0


def _floats(text):
    return tuple(float(v) for v in text.split(","))


@dataclass(frozen=True)
class AxisModel:
    A: float
    B: tuple
    C: tuple
    D: float
    a: tuple
    b: tuple

    def index_25c(self, lam_um):
        lam2 = lam_um * lam_um
        n2 = self.A - self.D * lam2
        for b, c in zip(self.B, self.C):
            n2 = n2 + b / (1.0 - c / lam2)
        return np.sqrt(n2)

    def thermal_shift(self, lam_um, dT):
        n1 = sum(coef / lam_um**m for m, coef in enumerate(self.a))
        n2 = sum(coef / lam_um**m for m, coef in enumerate(self.b))
        return n1 * dT + n2 * dT * dT


@dataclass(frozen=True)
class KTPModel:
    version: int
    reference_temperature: float
    wavelength_range: tuple  # metres
    temperature_range: tuple  # degC
    y: AxisModel
    z: AxisModel

    def check_wavelength(self, wavelength):
        lo, hi = self.wavelength_range
        w = np.asarray(wavelength)
        if w.size and (np.min(w) < lo or np.max(w) > hi or not np.all(np.isfinite(w))):
            raise DispersionRangeError(
                f"wavelength {np.min(w) * 1e9:.1f}-{np.max(w) * 1e9:.1f} nm outside "
                f"model range {lo * 1e9:.0f}-{hi * 1e9:.0f} nm"
            )

    def check_temperature(self, temperature):
        lo, hi = self.temperature_range
        if not lo <= temperature <= hi:
            raise DispersionRangeError(f"temperature {temperature} C outside model range {lo}-{hi} C")

    def index(self, axis, wavelength, temperature):
        """Refractive index along ``axis`` ('y' or 'z'); wavelength in metres."""
        self.check_wavelength(wavelength)
        self.check_temperature(temperature)
        model = self.y if axis == "y" else self.z
        lam_um = np.asarray(wavelength, dtype=float) * 1e6
        dT = temperature - self.reference_temperature
        return model.index_25c(lam_um) + model.thermal_shift(lam_um, dT)

    def wavenumber(self, axis, omega, temperature):
        omega = np.asarray(omega, dtype=float)
        return self.index(axis, 2 * np.pi * C_LIGHT / omega, temperature) * omega / C_LIGHT

    def group_index(self, axis, wavelength, temperature, rel_step=1e-5):
        """n_g = n - lambda dn/dlambda by central difference in wavelength."""
        h = wavelength * rel_step
        dn = (self.index(axis, wavelength + h, temperature) - self.index(axis, wavelength - h, temperature)) / (2 * h)
        return self.index(axis, wavelength, temperature) - wavelength * dn


def _axis(section):
    return AxisModel(
        A=float(section["A"]),
        B=_floats(section["B"]),
        C=_floats(section["C"]),
        D=float(section["D"]),
        a=_floats(section["a"]),
        b=_floats(section["b"]),
    )


@lru_cache(maxsize=None)
def load_ktp(path=None):
    parser = configparser.ConfigParser()
    parser.optionxform = str
    if path is None:
        parser.read_string(resources.files("heraldsim").joinpath("data/ktp_sellmeier.ini").read_text())
    else:
        with open(path) as fh:
            parser.read_file(fh)
    meta = parser["model"]
    return KTPModel(
        version=int(meta["version"]),
        reference_temperature=float(meta["reference_temperature_c"]),
        wavelength_range=(float(meta["wavelength_min_um"]) * 1e-6, float(meta["wavelength_max_um"]) * 1e-6),
        temperature_range=(float(meta["temperature_min_c"]), float(meta["temperature_max_c"])),
        y=_axis(parser["y"]),
        z=_axis(parser["z"]),
    )
