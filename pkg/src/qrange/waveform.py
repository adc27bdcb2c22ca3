"""LIDAR waveforms from time tags: correlation, channel combining, ranging, SNR.

A waveform is the start-multi-stop histogram of ``idler - signal`` time
differences: every idler tag in ``[t_s, t_s + W)`` after a signal tag at
``t_s`` adds one count, at bin ``floor(dt / bin_width)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .errors import GeometryMismatchError, InvalidParameterError, NoPeakError, UndefinedSNRError
from .fitting import GaussianFit, fit_sample
from .montecarlo import IDLER, SIGNAL, SPEED_OF_LIGHT, EventStream, mirror_map

COMBINE_MODES = ("all", "energy-conserving")
DEFAULT_GUARD_BINS = 2


@dataclass
class Waveform:
    bin_width_ps: float
    window_ps: float
    counts: np.ndarray
    integration_time_s: float = 1.0

    def __post_init__(self):
        if not (self.bin_width_ps > 0 and self.window_ps > 0):
            raise InvalidParameterError("bin width and window must be > 0")
        c = np.asarray(self.counts, dtype=np.int64)
        if c.ndim != 1 or c.size != n_bins(self.window_ps, self.bin_width_ps):
            raise InvalidParameterError(
                f"expected {n_bins(self.window_ps, self.bin_width_ps)} bins, got shape {c.shape}"
            )
        if np.any(c < 0):
            raise InvalidParameterError("waveform counts must be >= 0")
        self.counts = c

    @property
    def n_bins(self) -> int:
        return self.counts.size

    @property
    def delays_ps(self) -> np.ndarray:
        """Lower bin edges in ps."""
        return np.arange(self.n_bins) * self.bin_width_ps

    def same_geometry(self, other: "Waveform") -> bool:
        return (
            self.bin_width_ps == other.bin_width_ps
            and self.window_ps == other.window_ps
            and self.integration_time_s == other.integration_time_s
        )

    def __eq__(self, other):
        if not isinstance(other, Waveform):
            return NotImplemented
        return self.same_geometry(other) and np.array_equal(self.counts, other.counts)


def n_bins(window_ps: float, bin_width_ps: float) -> int:
    return int(math.ceil(window_ps / bin_width_ps - 1e-12))


def _pair_differences(t_sig: np.ndarray, t_idl: np.ndarray, window_units: float):
    """Indices (signal, idler) and differences for all pairs with 0 <= dt < window."""
    lo = np.searchsorted(t_idl, t_sig, side="left")
    if t_idl.size == 0:
        return np.empty(0, dtype=np.int64), np.empty(0, dtype=np.int64)
    # most starts see no stop at all; search the upper edge only where one exists
    first = t_idl[np.minimum(lo, t_idl.size - 1)]
    has = (lo < t_idl.size) & (first < t_sig + window_units)
    hi = lo.copy()
    hi[has] = np.searchsorted(t_idl, t_sig[has] + window_units, side="left")
    k = hi - lo
    total = int(k.sum())
    if total == 0:
        return np.empty(0, dtype=np.int64), np.empty(0, dtype=np.int64)
    s_idx = np.repeat(np.arange(t_sig.size), k)
    # position within each run of stops
    offs = np.arange(total) - np.repeat(np.cumsum(k) - k, k)
    i_idx = np.repeat(lo, k) + offs
    return s_idx, i_idx


def _bin_index(dt_units: np.ndarray, resolution_ps: float, bin_width_ps: float) -> np.ndarray:
    return np.floor(dt_units * (resolution_ps / bin_width_ps)).astype(np.int64)


def correlate(
    stream: EventStream,
    signal_channels: Sequence[int],
    idler_channels: Sequence[int],
    bin_width_ps: float,
    window_ps: float,
) -> Waveform:
    """Waveform for the union of the given signal and idler detectors."""
    if not signal_channels or not idler_channels:
        raise InvalidParameterError("detector sets must be non-empty")
    if not (bin_width_ps > 0 and window_ps > 0):
        raise InvalidParameterError("bin width and window must be > 0")
    nb = n_bins(window_ps, bin_width_ps)
    ts = stream.select(SIGNAL, signal_channels)
    ti = stream.select(IDLER, idler_channels)
    s_idx, i_idx = _pair_differences(ts, ti, window_ps / stream.resolution_ps)
    b = _bin_index(ti[i_idx] - ts[s_idx], stream.resolution_ps, bin_width_ps)
    b = b[b < nb]
    return Waveform(bin_width_ps, window_ps, np.bincount(b, minlength=nb), stream.duration_s)


def correlate_pairings(stream: EventStream, n: int, bin_width_ps: float, window_ps: float) -> np.ndarray:
    """Counts for all n x n (signal channel, idler channel) pairings at once.

    Returns an int64 array of shape ``(n, n, bins)`` indexed by
    ``[signal_channel - 1, idler_channel - 1]``.
    """
    if n < 1:
        raise InvalidParameterError("n must be >= 1")
    nb = n_bins(window_ps, bin_width_ps)
    sig = stream.side == SIGNAL
    ts, cs = stream.time[sig], stream.channel[sig]
    ti, ci = stream.time[~sig], stream.channel[~sig]
    s_idx, i_idx = _pair_differences(ts, ti, window_ps / stream.resolution_ps)
    b = _bin_index(ti[i_idx] - ts[s_idx], stream.resolution_ps, bin_width_ps)
    keep = b < nb
    pairing = (cs[s_idx[keep]].astype(np.int64) - 1) * n + (ci[i_idx[keep]] - 1)
    flat = np.bincount(pairing * nb + b[keep], minlength=n * n * nb)
    return flat.reshape(n, n, nb)


def combine_channels(
    pairings: Mapping[tuple, Waveform],
    mode: str,
    channel_map: Sequence[int] | None = None,
) -> Waveform:
    """Sum per-pairing waveforms keyed by ``(signal_channel, idler_channel)``.

    ``all`` sums every one of the n^2 pairings; ``energy-conserving`` sums only
    the n pairings ``(i, channel_map[i-1])`` (mirror map by default).
    """
    if mode not in COMBINE_MODES:
        raise InvalidParameterError(f"mode must be one of {COMBINE_MODES}, got {mode!r}")
    if not pairings:
        raise InvalidParameterError("no waveforms to combine")
    n = max(max(k) for k in pairings)
    ref = next(iter(pairings.values()))
    for w in pairings.values():
        if not ref.same_geometry(w) or w.n_bins != ref.n_bins:
            raise GeometryMismatchError("waveforms do not share bin geometry")
    cmap = mirror_map(n) if channel_map is None else tuple(channel_map)
    if mode == "all":
        keys = [(i, j) for i in range(1, n + 1) for j in range(1, n + 1)]
    else:
        keys = [(i, cmap[i - 1]) for i in range(1, n + 1)]
    missing = [k for k in keys if k not in pairings]
    if missing:
        raise InvalidParameterError(f"missing pairings {missing}")
    total = np.zeros(ref.n_bins, dtype=np.int64)
    for k in keys:
        total += pairings[k].counts
    return Waveform(ref.bin_width_ps, ref.window_ps, total, ref.integration_time_s)


def combine_pairing_array(counts: np.ndarray, mode: str, channel_map: Sequence[int] | None = None) -> np.ndarray:
    """Array version of ``combine_channels`` over the leading (n, n) axes."""
    if mode not in COMBINE_MODES:
        raise InvalidParameterError(f"mode must be one of {COMBINE_MODES}, got {mode!r}")
    n = counts.shape[-3]
    if mode == "all":
        return counts.sum(axis=(-3, -2))
    cmap = mirror_map(n) if channel_map is None else tuple(channel_map)
    rows = np.arange(n)
    return counts[..., rows, np.asarray(cmap) - 1, :].sum(axis=-2)


@dataclass(frozen=True)
class RangeEstimate:
    peak_bin: int
    delay_ps: float
    distance_m: float
    resolution_m: float


def detect_peak(waveform: Waveform) -> RangeEstimate:
    """Range from the highest bin (first one on ties), taken at the bin centre."""
    if not np.any(waveform.counts > 0):
        raise NoPeakError("waveform has no counts")
    b = int(np.argmax(waveform.counts))
    delay = (b + 0.5) * waveform.bin_width_ps
    return RangeEstimate(
        peak_bin=b,
        delay_ps=delay,
        distance_m=SPEED_OF_LIGHT * delay * 1e-12 / 2.0,
        resolution_m=SPEED_OF_LIGHT * waveform.bin_width_ps * 1e-12 / 2.0,
    )


@dataclass(frozen=True)
class PeakStats:
    peak_bin: int
    guard_bins: int
    peak_heights: np.ndarray
    floor_samples: np.ndarray
    peak_fit: GaussianFit
    floor_fit: GaussianFit

    @property
    def fallback(self) -> bool:
        return self.peak_fit.fallback or self.floor_fit.fallback


def peak_statistics(waveforms, peak_bin: int | None = None, guard_bins: int = DEFAULT_GUARD_BINS) -> PeakStats:
    """Peak-height and noise-floor distributions over M waveforms.

    ``waveforms`` is a list of ``Waveform`` or an ``(M, bins)`` count array.
    The peak bin defaults to the argmax of the summed waveform.  The floor
    sample is every bin farther than ``guard_bins`` from the peak, pooled
    over all waveforms.
    """
    if isinstance(waveforms, np.ndarray):
        counts = np.asarray(waveforms, dtype=np.int64)
    else:
        ws = list(waveforms)
        if ws and any(not ws[0].same_geometry(w) or w.n_bins != ws[0].n_bins for w in ws):
            raise GeometryMismatchError("waveforms do not share bin geometry")
        counts = np.array([w.counts for w in ws], dtype=np.int64)
    if counts.ndim != 2 or counts.shape[0] < 2:
        raise InvalidParameterError("peak statistics need at least two waveforms")
    if peak_bin is None:
        total = counts.sum(axis=0)
        if not np.any(total > 0):
            raise NoPeakError("all waveforms are empty")
        peak_bin = int(np.argmax(total))
    nb = counts.shape[1]
    far = np.abs(np.arange(nb) - peak_bin) > guard_bins
    if not far.any():
        raise InvalidParameterError("guard band leaves no noise-floor bins")
    peaks = counts[:, peak_bin]
    floor = counts[:, far].ravel()
    return PeakStats(peak_bin, guard_bins, peaks, floor, fit_sample(peaks), fit_sample(floor))


@dataclass(frozen=True)
class SNREstimate:
    value: float
    error: float
    fallback: bool = False


def empirical_snr(stats: PeakStats, combined_sigma: bool = False) -> SNREstimate:
    """(peak mean - floor mean) / sigma, with first-order error propagation.

    ``sigma`` is the fitted peak width, or ``sqrt(sigma_peak^2 + sigma_floor^2)``
    when ``combined_sigma`` is set.
    """
    pf, ff = stats.peak_fit, stats.floor_fit
    diff = pf.mean - ff.mean
    var_diff = pf.mean_err**2 + ff.mean_err**2
    if combined_sigma:
        sig = math.hypot(pf.sigma, ff.sigma)
        var_sig = ((pf.sigma * pf.sigma_err) ** 2 + (ff.sigma * ff.sigma_err) ** 2) / sig**2 if sig > 0 else math.nan
    else:
        sig = pf.sigma
        var_sig = pf.sigma_err**2
    if not sig > 0:
        raise UndefinedSNRError("peak distribution has zero width; SNR undefined")
    value = diff / sig
    err = math.sqrt(var_diff / sig**2 + value**2 * var_sig / sig**2)
    return SNREstimate(value, err, stats.fallback)
