"""Schmidt decomposition of a sampled JSA.

The continuous decomposition f(s, i) = sum_k r_k psi_k(s) phi_k(i) with
orthonormal mode functions is obtained from an SVD of the quadrature-weighted
matrix W_s^1/2 F W_i^1/2; dividing the singular vectors by the square-root
weights gives modes that are orthonormal under the same quadrature.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import InvalidParameterError
from .jsa import JSAGrid, trapezoid_weights


@dataclass(frozen=True)
class SchmidtDecomposition:
    coefficients: np.ndarray
    signal_modes: np.ndarray  # shape (K, len(signal))
    idler_modes: np.ndarray  # shape (K, len(idler))
    signal: np.ndarray
    idler: np.ndarray

    @property
    def weights(self) -> np.ndarray:
        """Normalised weights lambda_k = r_k^2 / sum r^2."""
        w = self.coefficients**2
        return w / w.sum()

    def reconstruct(self) -> JSAGrid:
        amp = (self.signal_modes.T * self.coefficients) @ self.idler_modes
        return JSAGrid(self.signal, self.idler, amp)


def schmidt(jsa: JSAGrid, weight_floor: float = 0.0) -> SchmidtDecomposition:
    """Decompose ``jsa``; modes with normalised weight <= ``weight_floor`` are dropped.

    The dominant mode is always kept.
    """
    amp = jsa.amplitude
    if not np.any(amp != 0):
        raise InvalidParameterError("cannot Schmidt-decompose an all-zero JSA")
    ws = np.sqrt(trapezoid_weights(jsa.signal))
    wi = np.sqrt(trapezoid_weights(jsa.idler))
    u, r, vh = np.linalg.svd(ws[:, None] * amp * wi[None, :], full_matrices=False)
    lam = r**2 / np.sum(r**2)
    keep = lam > weight_floor
    keep[0] = True
    return SchmidtDecomposition(
        coefficients=r[keep],
        signal_modes=(u[:, keep] / ws[:, None]).T,
        idler_modes=vh[keep, :] / wi[None, :],
        signal=jsa.signal,
        idler=jsa.idler,
    )


def schmidt_number(decomposition: SchmidtDecomposition | np.ndarray) -> float:
    """Effective mode number K = (sum r^2)^2 / sum r^4."""
    r = decomposition.coefficients if isinstance(decomposition, SchmidtDecomposition) else decomposition
    r = np.asarray(r, dtype=float)
    w = r**2
    if w.size == 0 or np.sum(w) <= 0:
        raise InvalidParameterError("Schmidt number needs at least one positive coefficient")
    return float(np.sum(w) ** 2 / np.sum(w**2))
