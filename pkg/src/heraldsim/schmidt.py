"""Schmidt decomposition, spectral purity and heralded-photon density matrices."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class SchmidtDecomposition:
    """Schmidt form of a discrete, unit-norm joint amplitude.

    ``signal_modes[k]`` and ``idler_modes[k]`` are orthonormal vectors over the
    respective grid axes so that ``F = sum_k sqrt(lambda_k) u_k v_k^T``.
    """

    coefficients: np.ndarray
    signal_modes: np.ndarray = field(repr=False)
    idler_modes: np.ndarray = field(repr=False)
    signal_axis: np.ndarray | None = field(default=None, repr=False)
    idler_axis: np.ndarray | None = field(default=None, repr=False)

    @property
    def n_modes(self):
        return len(self.coefficients)

    def reconstruct(self):
        w = np.sqrt(self.coefficients)
        return (self.signal_modes.T * w) @ self.idler_modes

    def truncated(self, cutoff=1e-6):
        """Coefficients above ``cutoff``, renormalised to sum to one."""
        lam = self.coefficients[self.coefficients >= cutoff]
        return lam / lam.sum()


def _svd_coefficients(matrix):
    m = np.asarray(matrix)
    if not np.all(np.isfinite(m)):
        raise ValueError("matrix contains non-finite entries")
    u, s, vh = np.linalg.svd(m, full_matrices=False)
    power = s * s
    total = power.sum()
    if total == 0:
        raise ValueError("matrix is identically zero")
    return u, power / total, vh


def decompose(jsa):
    """Singular-value factorisation of a JointSpectralAmplitude (or raw matrix)."""
    if hasattr(jsa, "matrix"):
        m, s_axis, i_axis = jsa.matrix(), jsa.grid.signal_axis, jsa.grid.idler_axis
    else:
        m, s_axis, i_axis = np.asarray(jsa), None, None
    u, lam, vh = _svd_coefficients(m)
    return SchmidtDecomposition(lam, u.T.copy(), vh.copy(), s_axis, i_axis)


def purity(d):
    lam = d.coefficients if isinstance(d, SchmidtDecomposition) else np.asarray(d)
    return float(np.sum(lam * lam))


def schmidt_number(d):
    return 1.0 / purity(d)


def schmidt_number_of_jsi(jsi):
    """Schmidt number of the intensity matrix treated as if it were an amplitude."""
    m = np.asarray(jsi, dtype=float)
    if np.any(m < 0):
        raise ValueError("joint spectral intensity must be non-negative")
    if not np.any(m):
        raise ValueError("joint spectral intensity is identically zero")
    _, lam, _ = _svd_coefficients(m)
    return 1.0 / float(np.sum(lam * lam))


@dataclass(frozen=True)
class SpectralDensityMatrix:
    axis: np.ndarray = field(repr=False)
    matrix: np.ndarray = field(repr=False)

    def validate(self, atol_herm=1e-10, atol_trace=1e-9, atol_eig=1e-10):
        m = self.matrix
        if np.max(np.abs(m - m.conj().T)) > atol_herm:
            raise ValueError("density matrix is not Hermitian")
        if abs(np.trace(m).real - 1) > atol_trace:
            raise ValueError(f"density matrix trace {np.trace(m).real} != 1")
        if np.linalg.eigvalsh(m).min() < -atol_eig:
            raise ValueError("density matrix has negative eigenvalues")
        return self

    def purity(self):
        return float(np.real(np.vdot(self.matrix.conj().T, self.matrix)))


def heralded_density_matrix(d, which_arm="signal"):
    """Reduced spectral state of one arm: rho = sum_k lambda_k |u_k><u_k|."""
    if which_arm == "signal":
        modes, axis = d.signal_modes, d.signal_axis
    elif which_arm == "idler":
        modes, axis = d.idler_modes, d.idler_axis
    else:
        raise ValueError(f"which_arm must be 'signal' or 'idler', got {which_arm!r}")
    rho = (modes.T * d.coefficients) @ modes.conj()
    if axis is None:
        axis = np.arange(modes.shape[1], dtype=float)
    return SpectralDensityMatrix(np.asarray(axis, dtype=float), rho)


def _check_same_axis(rho1, rho2):
    if rho1.axis.shape != rho2.axis.shape or not np.allclose(rho1.axis, rho2.axis, rtol=0, atol=1e-9 * np.max(np.abs(rho1.axis))):
        raise ValueError("density matrices are defined on different grids")
    steps = np.diff(rho1.axis)
    if steps.size and np.ptp(steps) > 1e-6 * abs(steps[0]):
        raise ValueError("overlap needs a uniform frequency axis")


def _diagonal_sums(rho1, rho2):
    # M[a, b] = rho1[a, b] rho2[b, a]; D[m] = sum over b - a = m.
    m = rho1.matrix * rho2.matrix.T
    n = m.shape[0]
    offsets = np.arange(-(n - 1), n)
    sums = np.array([np.trace(m, offset=k) for k in offsets])
    return offsets, sums


def overlap_complex(rho1, rho2, delay):
    """Tr[rho1 rho2(tau)] before discarding the (numerically zero) imaginary part."""
    _check_same_axis(rho1, rho2)
    offsets, sums = _diagonal_sums(rho1, rho2)
    step = rho1.axis[1] - rho1.axis[0]
    tau = np.atleast_1d(np.asarray(delay, dtype=float))
    values = np.exp(1j * np.outer(tau, offsets * step)) @ sums
    return values if np.ndim(delay) else values[0]


def overlap(rho1, rho2, delay=0.0):
    """Delay-dependent overlap Tr[rho1 rho2(tau)] with
    rho2(tau)[v, v'] = rho2[v, v'] exp(i (v - v') tau)."""
    return np.real(overlap_complex(rho1, rho2, delay))


def overlap_fwhm(rho1, rho2, half_range=40e-12, n=4001):
    """Full width at half maximum of the overlap-versus-delay curve."""
    tau = np.linspace(-half_range, half_range, n)
    o = overlap(rho1, rho2, tau)
    peak = np.argmax(o)
    half = o[peak] / 2
    above = np.nonzero(o >= half)[0]
    lo, hi = above[0], above[-1]
    # linear interpolation of the two half-maximum crossings
    t_lo = np.interp(half, [o[lo - 1], o[lo]], [tau[lo - 1], tau[lo]])
    t_hi = np.interp(half, [o[hi + 1], o[hi]], [tau[hi + 1], tau[hi]])
    return float(t_hi - t_lo)


def overlap_table(rho1, rho2, half_range=40e-12, n=801):
    tau = np.linspace(-half_range, half_range, n)
    return tau, np.clip(overlap(rho1, rho2, tau), 0.0, None)


@dataclass(frozen=True)
class OverlapTerms:
    visibility: float
    purity_1: float
    purity_2: float
    distance_sq: float

    @property
    def decomposed(self):
        return (self.purity_1 + self.purity_2 - self.distance_sq) / 2


def overlap_terms(rho1, rho2):
    """Tr[rho1 rho2] together with its purity/distance decomposition.

    ``distance_sq`` is the Hilbert-Schmidt norm Tr[(rho1 - rho2)^dagger (rho1 - rho2)].
    """
    a, b = rho1.matrix, rho2.matrix
    diff = a - b
    return OverlapTerms(
        visibility=float(np.real(np.trace(a @ b))),
        purity_1=float(np.real(np.trace(a @ a))),
        purity_2=float(np.real(np.trace(b @ b))),
        distance_sq=float(np.real(np.trace(diff.conj().T @ diff))),
    )
