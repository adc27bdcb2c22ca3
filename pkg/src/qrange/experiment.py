"""Repeated simulated acquisitions and their statistics.

Waveform ``k`` of a run is simulated from child ``k`` of
``SeedSequence(seed)``, so the result does not depend on whether the
waveforms are computed serially or in worker processes.  Set
``QRANGE_THREADS`` to use a process pool.
"""

from __future__ import annotations

import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from .errors import InvalidParameterError
from .montecarlo import DetectorConfig, ScenarioConfig, simulate
from .snr import all_pairings_params, snr
from .waveform import (
    COMBINE_MODES,
    DEFAULT_GUARD_BINS,
    PeakStats,
    SNREstimate,
    Waveform,
    combine_pairing_array,
    correlate_pairings,
    empirical_snr,
    peak_statistics,
)

THREADS_ENV = "QRANGE_THREADS"


def worker_count() -> int:
    raw = os.environ.get(THREADS_ENV, "1")
    try:
        n = int(raw)
    except ValueError:
        raise InvalidParameterError(f"{THREADS_ENV} must be an integer, got {raw!r}") from None
    return max(1, n)


@dataclass(frozen=True)
class Acquisition:
    scenario: ScenarioConfig
    detectors: DetectorConfig
    bin_width_ps: float
    window_ps: float


def _one(args) -> np.ndarray:
    acq, child = args
    stream = simulate(acq.scenario, acq.detectors, seed=child)
    return correlate_pairings(stream, acq.scenario.channels, acq.bin_width_ps, acq.window_ps)


@dataclass
class RunResult:
    acquisition: Acquisition
    seed: int
    pairings: np.ndarray  # (M, n, n, bins)

    @property
    def n_waveforms(self) -> int:
        return self.pairings.shape[0]

    def combined(self, mode: str) -> np.ndarray:
        return combine_pairing_array(self.pairings, mode, self.acquisition.scenario.channel_map)

    def waveforms(self, mode: str) -> list[Waveform]:
        a = self.acquisition
        T = a.scenario.params.integration_time
        return [Waveform(a.bin_width_ps, a.window_ps, c, T) for c in self.combined(mode)]


def run_waveforms(
    scenario: ScenarioConfig,
    detectors: DetectorConfig | None,
    n_waveforms: int,
    bin_width_ps: float,
    window_ps: float,
    seed=None,
) -> RunResult:
    """Simulate and correlate ``n_waveforms`` acquisitions.

    ``seed`` is an int or a ``SeedSequence`` (default ``scenario.rng_seed``).
    """
    if n_waveforms < 1:
        raise InvalidParameterError("need at least one waveform")
    if isinstance(seed, np.random.SeedSequence):
        ss = seed
    else:
        ss = np.random.SeedSequence(int(scenario.rng_seed if seed is None else seed))
    acq = Acquisition(scenario, detectors or DetectorConfig(), float(bin_width_ps), float(window_ps))
    children = ss.spawn(n_waveforms)
    jobs = [(acq, c) for c in children]
    workers = min(worker_count(), n_waveforms)
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            out = list(pool.map(_one, jobs, chunksize=max(1, n_waveforms // (4 * workers))))
    else:
        out = [_one(j) for j in jobs]
    return RunResult(acq, int(ss.entropy), np.stack(out))


@dataclass(frozen=True)
class ModeSummary:
    mode: str
    stats: PeakStats | None
    snr: SNREstimate | None
    model_snr: float


def model_snr(scenario: ScenarioConfig, bin_width_ps: float, mode: str) -> float:
    p = scenario.params.replace(bin_width=bin_width_ps * 1e-12)
    if mode == "all":
        p = all_pairings_params(p)
    return snr(p)


def summarize(result: RunResult, mode: str, guard_bins: int = DEFAULT_GUARD_BINS, combined_sigma: bool = False):
    if mode not in COMBINE_MODES:
        raise InvalidParameterError(f"unknown mode {mode!r}")
    a = result.acquisition
    prediction = model_snr(a.scenario, a.bin_width_ps, mode)
    if result.n_waveforms < 2:
        return ModeSummary(mode, None, None, prediction)
    stats = peak_statistics(result.combined(mode), guard_bins=guard_bins)
    return ModeSummary(mode, stats, empirical_snr(stats, combined_sigma), prediction)
