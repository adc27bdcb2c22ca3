"""Photon statistics and distinguishability of the transmitted beam.

One arm of a two-mode squeezed vacuum is thermal; a target that wants to tell
the probe from ambient light can only exploit a spectral mismatch, whose
effect after N photons is bracketed by fidelity-based error-probability
bounds.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy import stats
from scipy.integrate import trapezoid

from .errors import InvalidParameterError

TAIL_TOLERANCE = 1e-12


def default_fock_cutoff(mean: float, tol: float = TAIL_TOLERANCE) -> int:
    """Smallest n_max with thermal tail ``(m/(1+m))**(n_max+1) < tol``."""
    if mean < 0:
        raise InvalidParameterError(f"mean photon number must be >= 0, got {mean!r}")
    if mean == 0:
        return 0
    log_q = -math.log1p(1.0 / mean)
    n_max = max(int(math.ceil(math.log(tol) / log_q)) - 1, 0)
    while (n_max + 1) * log_q >= math.log(tol):
        n_max += 1
    return n_max


@dataclass(frozen=True)
class TMSVState:
    """Two-mode squeezed vacuum with squeezing ``r`` and phase ``theta``."""

    r: float
    theta: float = 0.0
    n_max: int | None = None

    def __post_init__(self):
        if not (self.r >= 0 and math.isfinite(self.r)):
            raise InvalidParameterError(f"squeezing r must be finite and >= 0, got {self.r!r}")
        if self.n_max is None:
            object.__setattr__(self, "n_max", default_fock_cutoff(self.mean_photon_number))
        elif self.n_max < 0:
            raise InvalidParameterError(f"n_max must be >= 0, got {self.n_max!r}")

    @classmethod
    def from_mean(cls, mean: float, theta: float = 0.0, n_max: int | None = None) -> "TMSVState":
        if mean < 0:
            raise InvalidParameterError(f"mean photon number must be >= 0, got {mean!r}")
        return cls(math.asinh(math.sqrt(mean)), theta, n_max)

    @property
    def mean_photon_number(self) -> float:
        return math.sinh(self.r) ** 2

    @property
    def mu(self) -> float:
        return math.cosh(self.r)

    @property
    def nu(self) -> complex:
        return complex(math.cos(self.theta), math.sin(self.theta)) * math.sinh(self.r)


@dataclass(frozen=True)
class PhotonDistribution:
    """Truncated photon-number distribution P_0 .. P_n_max.

    ``tail_ratio`` is set for geometric (thermal) distributions so the mass
    beyond the cutoff can be bounded exactly.
    """

    probabilities: np.ndarray
    tail_ratio: float | None = None

    @property
    def n_max(self) -> int:
        return len(self.probabilities) - 1

    def tail_mass(self) -> float:
        if self.tail_ratio is None:
            return max(0.0, 1.0 - float(np.sum(self.probabilities)))
        return self.tail_ratio ** (self.n_max + 1)

    def mean(self, tail_correction: bool = True) -> float:
        n = np.arange(self.n_max + 1)
        m = float(np.sum(n * self.probabilities))
        if tail_correction and self.tail_ratio is not None and self.tail_ratio > 0:
            q, k = self.tail_ratio, self.n_max + 1
            # sum_{n>=k} n (1-q) q^n
            m += q**k * (k * (1.0 - q) + q) / (1.0 - q)
        return m


def tmsv_coefficients(state: TMSVState) -> np.ndarray:
    """Fock amplitudes C_nn of the two-mode squeezed vacuum, n = 0..n_max."""
    n = np.arange(state.n_max + 1)
    t = math.tanh(state.r)
    sign = np.where(n % 2 == 0, 1.0, -1.0)
    return sign * np.exp(1j * n * state.theta) * t**n / math.cosh(state.r)


def reduced_photon_distribution(state: TMSVState) -> PhotonDistribution:
    """Photon-number distribution of one arm after tracing out the other."""
    n = np.arange(state.n_max + 1)
    t2 = math.tanh(state.r) ** 2
    probs = t2**n / math.cosh(state.r) ** 2
    return PhotonDistribution(probs, tail_ratio=t2)


def thermal_pn(mean: float, n):
    """Thermal (Bose-Einstein) probability of n photons at mean ``mean``."""
    if mean < 0:
        raise InvalidParameterError(f"mean photon number must be >= 0, got {mean!r}")
    n_arr = np.asarray(n)
    if np.any(n_arr < 0):
        raise InvalidParameterError("photon number must be >= 0")
    q = mean / (1.0 + mean)
    out = np.power(q, n_arr) / (1.0 + mean)
    return float(out) if np.ndim(out) == 0 else out


def g2_from_schmidt(coefficients: Sequence[float]) -> float:
    """Zero-delay g2 of one arm: ``1 + sum(lambda_k**2)`` with normalised weights."""
    r = np.asarray(coefficients, dtype=float)
    if r.ndim != 1 or r.size == 0 or np.any(r < 0) or not np.all(np.isfinite(r)):
        raise InvalidParameterError("Schmidt coefficients must be a non-empty list of finite values >= 0")
    w = r**2
    total = w.sum()
    if total <= 0:
        raise InvalidParameterError("at least one Schmidt coefficient must be positive")
    lam = w / total
    return float(1.0 + np.sum(lam**2))


@dataclass(frozen=True)
class SpectralDensity:
    """Sampled spectral density (wavelength in nm, density in 1/nm)."""

    wavelength: np.ndarray
    density: np.ndarray

    def __post_init__(self):
        wl = np.asarray(self.wavelength, dtype=float)
        d = np.asarray(self.density, dtype=float)
        if wl.ndim != 1 or wl.shape != d.shape or wl.size < 2:
            raise InvalidParameterError("spectral density needs matching 1-D arrays of at least 2 samples")
        if np.any(np.diff(wl) <= 0):
            raise InvalidParameterError("wavelength grid must be strictly increasing")
        if np.any(d < 0) or not np.all(np.isfinite(d)):
            raise InvalidParameterError("spectral density must be finite and non-negative")
        object.__setattr__(self, "wavelength", wl)
        object.__setattr__(self, "density", d)

    @classmethod
    def gaussian(cls, center: float, sigma: float, wavelength) -> "SpectralDensity":
        wl = np.asarray(wavelength, dtype=float)
        d = np.exp(-0.5 * ((wl - center) / sigma) ** 2) / (sigma * math.sqrt(2 * math.pi))
        return cls(wl, d)

    @classmethod
    def flat(cls, lo: float, hi: float, points: int = 1001) -> "SpectralDensity":
        wl = np.linspace(lo, hi, points)
        return cls(wl, np.full(points, 1.0 / (hi - lo)))

    def integral(self) -> float:
        return float(trapezoid(self.density, self.wavelength))

    def normalized(self) -> "SpectralDensity":
        total = self.integral()
        if total <= 0:
            raise InvalidParameterError("cannot normalise a spectral density with zero integral")
        return SpectralDensity(self.wavelength, self.density / total)

    def mean_wavelength(self) -> float:
        d = self.normalized()
        return float(trapezoid(d.wavelength * d.density, d.wavelength))


def _resample(sd: SpectralDensity, grid: np.ndarray) -> np.ndarray:
    return np.interp(grid, sd.wavelength, sd.density, left=0.0, right=0.0)


def spectral_overlap(f: SpectralDensity, g: SpectralDensity) -> float:
    """Fidelity of two spectrally mixed states, ``integral sqrt(f g)``.

    Both densities are linearly interpolated onto the union of their grids
    (zero outside their own support) and renormalised there.
    """
    grid = np.union1d(f.wavelength, g.wavelength)
    fv, gv = _resample(f, grid), _resample(g, grid)
    fi, gi = trapezoid(fv, grid), trapezoid(gv, grid)
    if fi <= 0 or gi <= 0:
        raise InvalidParameterError("spectral densities must have positive integral")
    o = float(trapezoid(np.sqrt((fv / fi) * (gv / gi)), grid))
    return min(o, 1.0)


@dataclass(frozen=True)
class OverlapBounds:
    lower: np.ndarray | float
    upper: np.ndarray | float


def error_prob_bounds(overlap: float, n_photons) -> OverlapBounds:
    """Bounds on the minimum error probability after ``n_photons`` copies.

    lower = (1 - sqrt(1 - O**(2N))) / 2,  upper = O**N / 2.
    ``n_photons`` may be an integer or an array of integers.
    """
    o = float(overlap)
    if not (0.0 <= o <= 1.0):
        raise InvalidParameterError(f"overlap must lie in [0, 1], got {overlap!r}")
    n = np.asarray(n_photons)
    if np.any(n < 0) or not np.all(np.equal(np.mod(n, 1), 0)):
        raise InvalidParameterError("photon count must be a non-negative integer")
    n = n.astype(float)
    upper = 0.5 * np.power(o, n)
    if o == 0.0:
        one_minus = np.where(n > 0, 1.0, 0.0)
    else:
        # 1 - O^(2N) without cancellation for O close to 1
        one_minus = -np.expm1(2.0 * n * math.log(o))
    lower = 0.5 * (1.0 - np.sqrt(one_minus))
    if lower.ndim == 0:
        return OverlapBounds(float(lower), float(upper))
    return OverlapBounds(lower, upper)


@dataclass(frozen=True)
class TVDistance:
    """Truncated total-variation distance; the exact value lies in [value, value + tail_bound]."""

    value: float
    tail_bound: float


def poisson_vs_thermal_distance(mean: float, n_max: int | None = None) -> TVDistance:
    """Total-variation distance between Poisson and thermal light of equal mean."""
    if mean < 0:
        raise InvalidParameterError(f"mean photon number must be >= 0, got {mean!r}")
    if n_max is None:
        n_max = max(default_fock_cutoff(mean), int(mean + 40 * math.sqrt(mean) + 40))
    n = np.arange(n_max + 1)
    p_poisson = stats.poisson.pmf(n, mean) if mean > 0 else (n == 0).astype(float)
    p_thermal = thermal_pn(mean, n)
    value = 0.5 * float(np.sum(np.abs(p_poisson - p_thermal)))
    tail_poisson = float(stats.poisson.sf(n_max, mean)) if mean > 0 else 0.0
    tail_thermal = (mean / (1.0 + mean)) ** (n_max + 1)
    return TVDistance(value, 0.5 * (tail_poisson + tail_thermal))


def photon_number_table(mean: float, n_max: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Columns n, thermal P_n and Poisson P_n for the CLI distribution table."""
    n = np.arange(n_max + 1)
    p_poisson = stats.poisson.pmf(n, mean) if mean > 0 else (n == 0).astype(float)
    return n, thermal_pn(mean, n), p_poisson
