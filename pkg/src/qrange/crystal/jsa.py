"""Joint spectral amplitude of down-converted pairs on a wavelength grid.

f(lambda_s, lambda_i) = alpha(lambda_sum) * Phi(dk(lambda_s, lambda_i))

where ``lambda_sum = 1 / (1/lambda_s + 1/lambda_i)`` is the pump wavelength
that energy conservation assigns to the pair, ``alpha`` is a Gaussian pump
amplitude in that coordinate and ``Phi`` the phase-matching function of the
poling structure.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..covertness import SpectralDensity
from ..errors import InvalidGridError, InvalidParameterError
from .dispersion import DispersionModel
from .poling import PolingStructure, phase_matching_amplitude

CW_WIDTH_FRACTION = 1e-3


@dataclass(frozen=True)
class PumpSpectrum:
    """Gaussian pump amplitude; ``bandwidth`` is its standard deviation in nm.

    With ``cw=True`` the pump is a narrow Gaussian of width ``cw_width`` nm;
    ``None`` means 1/1000 of the signal-axis span of the grid it is used on.
    """

    center: float
    bandwidth: float = 0.0
    cw: bool = True
    cw_width: float | None = None

    def __post_init__(self):
        if not self.center > 0:
            raise InvalidParameterError(f"pump wavelength must be positive, got {self.center!r}")
        if self.bandwidth < 0:
            raise InvalidParameterError(f"pump bandwidth must be >= 0, got {self.bandwidth!r}")
        if self.cw_width is not None and not self.cw_width > 0:
            raise InvalidParameterError(f"CW width must be positive, got {self.cw_width!r}")
        if not self.cw and self.bandwidth == 0:
            raise InvalidParameterError("a pulsed pump needs a positive bandwidth (or set cw=True)")

    def width(self, grid_span: float) -> float:
        if self.cw:
            return self.cw_width if self.cw_width is not None else CW_WIDTH_FRACTION * grid_span
        return self.bandwidth


@dataclass(frozen=True)
class GridSpec:
    signal_range: tuple
    idler_range: tuple
    points: tuple = (512, 512)

    def axes(self) -> tuple[np.ndarray, np.ndarray]:
        ns, ni = (int(p) for p in self.points)
        if ns < 2 or ni < 2:
            raise InvalidGridError(f"grid needs at least 2 points per axis, got {self.points!r}")
        (s0, s1), (i0, i1) = self.signal_range, self.idler_range
        if not (0 < s0 < s1 and 0 < i0 < i1):
            raise InvalidGridError("grid ranges must be positive and increasing")
        return np.linspace(s0, s1, ns), np.linspace(i0, i1, ni)


@dataclass(frozen=True)
class JSAGrid:
    signal: np.ndarray
    idler: np.ndarray
    amplitude: np.ndarray

    def __post_init__(self):
        s = np.asarray(self.signal, dtype=float)
        i = np.asarray(self.idler, dtype=float)
        a = np.asarray(self.amplitude, dtype=complex)
        if s.ndim != 1 or i.ndim != 1 or s.size < 2 or i.size < 2:
            raise InvalidGridError("JSA axes must be 1-D with at least 2 points")
        if a.shape != (s.size, i.size):
            raise InvalidGridError(f"amplitude shape {a.shape} does not match axes ({s.size}, {i.size})")
        if np.any(np.diff(s) <= 0) or np.any(np.diff(i) <= 0):
            raise InvalidGridError("JSA axes must be strictly increasing")
        if not np.all(np.isfinite(a)):
            raise InvalidGridError("JSA amplitude has non-finite entries")
        object.__setattr__(self, "signal", s)
        object.__setattr__(self, "idler", i)
        object.__setattr__(self, "amplitude", a)

    @property
    def intensity(self) -> np.ndarray:
        return np.abs(self.amplitude) ** 2

    def signal_weights(self) -> np.ndarray:
        return trapezoid_weights(self.signal)

    def idler_weights(self) -> np.ndarray:
        return trapezoid_weights(self.idler)

    def total_weight(self) -> float:
        """Quadrature-weighted sum of |f|^2."""
        return float(self.signal_weights() @ self.intensity @ self.idler_weights())


def trapezoid_weights(x: np.ndarray) -> np.ndarray:
    d = np.diff(np.asarray(x, dtype=float))
    w = np.zeros(len(x))
    w[:-1] += 0.5 * d
    w[1:] += 0.5 * d
    return w


def energy_conserving_idler(pump_nm, signal_nm):
    """Idler wavelength fixed by 1/lambda_p = 1/lambda_s + 1/lambda_i."""
    inv = 1.0 / np.asarray(pump_nm, dtype=float) - 1.0 / np.asarray(signal_nm, dtype=float)
    if np.any(inv <= 0):
        raise InvalidParameterError("signal wavelength must exceed the pump wavelength")
    out = 1.0 / inv
    return float(out) if np.ndim(out) == 0 else out


ENVELOPE_CUTOFF = 10.0


def pump_equivalent(signal_nm, idler_nm):
    return 1.0 / (1.0 / np.asarray(signal_nm, dtype=float) + 1.0 / np.asarray(idler_nm, dtype=float))


def phase_mismatch(dispersion: DispersionModel, pump_nm, signal_nm, idler_nm):
    """dk = 2 pi (n_p/lambda_p - n_s/lambda_s - n_i/lambda_i) in 1/um.

    Wavelengths are in nm and broadcast against each other.
    """
    lp = np.asarray(pump_nm, dtype=float) * 1e-3
    ls = np.asarray(signal_nm, dtype=float) * 1e-3
    li = np.asarray(idler_nm, dtype=float) * 1e-3
    n_p = dispersion.index(pump_nm, "pump")
    n_s = dispersion.index(signal_nm, "signal")
    n_i = dispersion.index(idler_nm, "idler")
    dk = 2.0 * np.pi * (n_p / lp - n_s / ls - n_i / li)
    return float(dk) if np.ndim(dk) == 0 else dk


def compute_jsa(
    pump: PumpSpectrum,
    poling: PolingStructure,
    dispersion: DispersionModel,
    grid: GridSpec,
) -> JSAGrid:
    """Evaluate the JSA on ``grid``.

    The pump envelope is cut off beyond ``ENVELOPE_CUTOFF`` widths
    (relative amplitude below 1e-21); those cells are exactly zero and are not
    passed to the phase-matching sum or the dispersion window check.
    """
    ls, li = grid.axes()
    dispersion.check_window(ls)
    dispersion.check_window(li)
    s2, i2 = np.meshgrid(ls, li, indexing="ij")
    lsum = pump_equivalent(s2, i2)
    width = pump.width(ls[-1] - ls[0])
    z = (lsum - pump.center) / width
    live = np.abs(z) <= ENVELOPE_CUTOFF
    alpha = np.where(live, np.exp(-0.5 * z * z), 0.0)
    amp = np.zeros(alpha.shape, dtype=complex)
    if np.any(live) and poling.n_domains > 0:
        dispersion.check_window(lsum[live])
        dk = phase_mismatch(dispersion, lsum[live], s2[live], i2[live])
        amp[live] = alpha[live] * phase_matching_amplitude(poling, dk)
    return JSAGrid(ls, li, amp)


def marginal_spectra(jsa: JSAGrid) -> tuple[SpectralDensity, SpectralDensity]:
    """Normalised signal and idler spectra from the joint intensity."""
    inten = jsa.intensity
    if not np.any(inten > 0):
        raise InvalidParameterError("cannot form marginals of an all-zero JSA")
    sig = inten @ jsa.idler_weights()
    idl = jsa.signal_weights() @ inten
    return (
        SpectralDensity(jsa.signal, sig).normalized(),
        SpectralDensity(jsa.idler, idl).normalized(),
    )


def energy_conservation_mass(jsa: JSAGrid, pump_nm: float, width: float, n_widths: float = 3.0) -> float:
    """Fraction of the weighted |f|^2 within ``n_widths * width`` of the pump curve.

    Distance from the curve is measured in the pump-equivalent wavelength.
    """
    s2, i2 = np.meshgrid(jsa.signal, jsa.idler, indexing="ij")
    near = np.abs(pump_equivalent(s2, i2) - pump_nm) <= n_widths * width
    wmat = np.outer(jsa.signal_weights(), jsa.idler_weights()) * jsa.intensity
    total = wmat.sum()
    if total <= 0:
        raise InvalidParameterError("JSA has no weight")
    return float(wmat[near].sum() / total)
