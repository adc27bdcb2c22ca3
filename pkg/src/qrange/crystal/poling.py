"""Poling structures and their phase-matching function.

A structure is a list of domain boundaries (um) with one sign of the
nonlinear coefficient per domain.  The phase-matching function is the exact
piecewise integral

    Phi(dk) = sum_j s_j integral_{z_j}^{z_j+1} exp(i dk z) dz
            = sum_j s_j w_j exp(i dk m_j) sinc(dk w_j / 2)

with domain widths w_j and midpoints m_j.  The sinc form stays exact at
dk -> 0, so no special case is needed.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import InvalidParameterError

# cells per chunk when evaluating Phi on large dk arrays
_CHUNK_ELEMENTS = 1 << 22


@dataclass(frozen=True)
class PolingStructure:
    boundaries: np.ndarray
    signs: np.ndarray

    def __post_init__(self):
        z = np.asarray(self.boundaries, dtype=float).ravel()
        s = np.asarray(self.signs, dtype=float).ravel()
        if z.size < 1:
            raise InvalidParameterError("a poling structure needs at least one boundary")
        if s.size != z.size - 1:
            raise InvalidParameterError(f"expected {z.size - 1} domain signs, got {s.size}")
        if np.any(np.diff(z) <= 0):
            raise InvalidParameterError("domain boundaries must be strictly increasing")
        if z[0] < 0 or not np.all(np.isfinite(z)):
            raise InvalidParameterError("domain boundaries must be finite and start at z >= 0")
        if not np.all(np.isin(s, (-1.0, 1.0))):
            raise InvalidParameterError("domain signs must be +1 or -1")
        object.__setattr__(self, "boundaries", z)
        object.__setattr__(self, "signs", s)

    @property
    def widths(self) -> np.ndarray:
        return np.diff(self.boundaries)

    @property
    def length(self) -> float:
        return float(self.boundaries[-1] - self.boundaries[0])

    @property
    def n_domains(self) -> int:
        return self.signs.size

    @classmethod
    def from_periods(cls, periods_um, start_sign: int = 1) -> "PolingStructure":
        """Two half-period domains of opposite sign per listed period."""
        periods = np.asarray(periods_um, dtype=float)
        if np.any(periods <= 0):
            raise InvalidParameterError("poling periods must be positive")
        widths = np.repeat(periods / 2.0, 2)
        return cls(np.concatenate([[0.0], np.cumsum(widths)]), _alternating(widths.size, start_sign))

    @classmethod
    def single_domain(cls, length_um: float, sign: int = 1) -> "PolingStructure":
        return cls(np.array([0.0, float(length_um)]), np.array([float(sign)]))

    @classmethod
    def empty(cls) -> "PolingStructure":
        """Zero-length crystal."""
        return cls(np.array([0.0]), np.array([]))

    def sub_structure(self, start: int, stop: int) -> "PolingStructure":
        """Domains ``start:stop`` kept at their original positions."""
        return PolingStructure(self.boundaries[start : stop + 1], self.signs[start:stop])


def _alternating(count: int, start_sign: int = 1) -> np.ndarray:
    s = np.ones(count)
    s[1::2] = -1.0
    return s * (1.0 if start_sign >= 0 else -1.0)


def build_chirped_poling(lambda_start: float, lambda_end: float, crystal_length: float) -> PolingStructure:
    """Half-period domains whose local period varies linearly along the crystal.

    ``lambda_start`` / ``lambda_end`` are poling periods in um at the input
    and output faces; ``crystal_length`` is in mm.  Each new domain takes half
    of the period evaluated at its start position; the last domain may
    overshoot the nominal length by less than one half-period.
    """
    if not (lambda_start > 0 and lambda_end > 0):
        raise InvalidParameterError("poling periods must be positive")
    if not crystal_length > 0:
        raise InvalidParameterError("crystal length must be positive")
    length_um = crystal_length * 1e3
    slope = (lambda_end - lambda_start) / length_um
    tol = 1e-9 * length_um
    z = 0.0
    boundaries = [0.0]
    while length_um - z > tol:
        z = z + 0.5 * (lambda_start + slope * z)
        boundaries.append(z)
    bounds = np.array(boundaries)
    return PolingStructure(bounds, _alternating(bounds.size - 1))


def phase_matching_amplitude(poling: PolingStructure, dk):
    """Phase-matching function Phi(dk) in um for ``dk`` in 1/um (array-aware).

    Summation over domains runs in domain order for each dk value (numpy
    pairwise reduction along a contiguous axis), so results do not depend on
    chunking.
    """
    dk_arr = np.asarray(dk, dtype=float)
    flat = dk_arr.ravel()
    out = np.zeros(flat.shape, dtype=complex)
    if poling.n_domains == 0:
        return complex(out[0]) if dk_arr.ndim == 0 else out.reshape(dk_arr.shape)
    w = poling.widths
    mid = poling.boundaries[:-1] + 0.5 * w
    sw = poling.signs * w
    half_w_over_pi = w / (2.0 * np.pi)
    step = max(1, _CHUNK_ELEMENTS // w.size)
    for start in range(0, flat.size, step):
        x = flat[start : start + step, None]
        terms = np.sinc(x * half_w_over_pi) * np.exp(1j * x * mid)
        terms *= sw
        out[start : start + step] = terms.sum(axis=1)
    if dk_arr.ndim == 0:
        return complex(out[0])
    return out.reshape(dk_arr.shape)
