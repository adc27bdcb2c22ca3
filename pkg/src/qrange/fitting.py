"""Gaussian fits to sample histograms by Levenberg-Marquardt.

The model is ``A exp(-(x - mu)^2 / (2 sigma^2))`` fitted to histogram counts
at bin centres.  Parameter uncertainties come from the residuals:
``cov = inv(J^T J) * RSS / (m - 3)``.

Samples are integer counts, so histograms use integer-aligned bins whose
width is the Freedman-Diaconis width rounded up to a whole number.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

MAX_ITER = 200
REL_TOL = 1e-8


@dataclass(frozen=True)
class GaussianFit:
    amplitude: float
    mean: float
    sigma: float
    amplitude_err: float
    mean_err: float
    sigma_err: float
    converged: bool
    fallback: bool = False
    iterations: int = 0
    n_samples: int = 0


def _model_and_jacobian(p, x):
    a, mu, s = p
    z = (x - mu) / s
    e = np.exp(-0.5 * z * z)
    f = a * e
    jac = np.empty((x.size, 3))
    jac[:, 0] = e
    jac[:, 1] = f * z / s
    jac[:, 2] = f * z * z / s
    return f, jac


def levenberg_marquardt(x, y, p0, max_iter: int = MAX_ITER, rel_tol: float = REL_TOL):
    """Minimise sum (y - model)^2 for the Gaussian model.

    Returns ``(params, jacobian, rss, iterations, converged)``.  Damping uses
    Marquardt's diagonal scaling.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    p = np.asarray(p0, dtype=float).copy()
    f, jac = _model_and_jacobian(p, x)
    r = y - f
    rss = float(r @ r)
    lam = 1e-3
    for it in range(1, max_iter + 1):
        jtj = jac.T @ jac
        g = jac.T @ r
        accepted = False
        while lam < 1e16:
            a = jtj + lam * np.diag(np.diag(jtj))
            try:
                step = np.linalg.solve(a, g)
            except np.linalg.LinAlgError:
                lam *= 10.0
                continue
            trial = p + step
            if trial[2] <= 0:
                lam *= 10.0
                continue
            f_t, jac_t = _model_and_jacobian(trial, x)
            r_t = y - f_t
            rss_t = float(r_t @ r_t)
            if rss_t <= rss:
                accepted = True
                break
            lam *= 10.0
        if not accepted:
            # no downhill step left: at a minimum to machine precision
            return p, jac, rss, it, True
        change = np.max(np.abs(step) / np.maximum(np.abs(trial), 1e-300))
        p, jac, r, rss = trial, jac_t, r_t, rss_t
        lam = max(lam / 10.0, 1e-12)
        if change < rel_tol:
            return p, jac, rss, it, True
    return p, jac, rss, max_iter, False


def gaussian_fit(x, y, p0=None, n_samples: int = 0) -> GaussianFit:
    """Fit a Gaussian to histogram points ``(x, y)``.

    Needs at least three occupied bins and one residual degree of freedom;
    otherwise, or on non-convergence, the moment estimates of the histogram
    are returned with ``fallback=True``.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    occupied = np.count_nonzero(y > 0)
    total = y.sum()
    if total > 0:
        m = float((x * y).sum() / total)
        s = float(math.sqrt(max((y * (x - m) ** 2).sum() / total, 0.0)))
    else:
        m, s = float("nan"), float("nan")
    moments = GaussianFit(float(y.max(initial=0.0)), m, s, math.nan, math.nan, math.nan, False, True, 0, n_samples)
    if occupied < 3 or x.size < 4 or not s > 0:
        return moments
    if p0 is None:
        p0 = (float(y.max()), m, s)
    p, jac, rss, it, ok = levenberg_marquardt(x, y, p0)
    if not ok or not np.all(np.isfinite(p)):
        return moments
    try:
        cov = np.linalg.inv(jac.T @ jac) * (rss / (x.size - 3))
        err = np.sqrt(np.abs(np.diag(cov)))
    except np.linalg.LinAlgError:
        err = np.full(3, math.nan)
    return GaussianFit(
        float(p[0]), float(p[1]), abs(float(p[2])), float(err[0]), float(err[1]), float(err[2]), True, False, it,
        n_samples,
    )


def integer_histogram(sample) -> tuple[np.ndarray, np.ndarray, int]:
    """Histogram of integer data on integer-aligned bins.

    Returns ``(centres, counts, width)``; a bin ``[a, a+w)`` holds the
    integers ``a .. a+w-1`` and its centre is ``a + (w-1)/2``.
    """
    v = np.asarray(sample)
    v = np.rint(v).astype(np.int64)
    q75, q25 = np.percentile(v, [75, 25])
    fd = 2.0 * (q75 - q25) / v.size ** (1.0 / 3.0)
    width = max(1, int(math.ceil(fd)))
    lo = int(v.min())
    idx = (v - lo) // width
    counts = np.bincount(idx).astype(float)
    centres = lo + width * np.arange(counts.size) + 0.5 * (width - 1)
    return centres, counts, width


def moment_fit(sample) -> GaussianFit:
    """Sample mean and standard deviation, with their standard errors."""
    v = np.asarray(sample, dtype=float)
    m = v.size
    mean = float(v.mean())
    sd = float(v.std(ddof=1)) if m > 1 else 0.0
    mean_err = sd / math.sqrt(m) if m > 0 else math.nan
    sd_err = sd / math.sqrt(2.0 * (m - 1)) if m > 1 else math.nan
    return GaussianFit(float(m), mean, sd, math.nan, mean_err, sd_err, False, True, 0, m)


def fit_sample(sample) -> GaussianFit:
    """Histogram an integer sample and fit a Gaussian to it.

    Degenerate samples (zero spread, or fewer than three occupied bins)
    return the closed-form moment estimates flagged as ``fallback``.
    """
    v = np.asarray(sample)
    if v.size < 2:
        raise ValueError("need at least two samples")
    if np.all(v == v.flat[0]):
        return moment_fit(v)
    x, y, _ = integer_histogram(v)
    fit = gaussian_fit(x, y, n_samples=v.size)
    if fit.fallback:
        return moment_fit(v)
    return fit
