"""Closed-form signal-to-noise model for frequency-multiplexed pair LIDAR.

Noise terms are labelled ``N_xy`` where ``x`` is the event on the local
(signal) detector and ``y`` the event on the target-facing (idler) detector:
``c`` photon-pair photon, ``s`` unpaired single, ``B`` ambient background,
``d`` dark count.  Each term is an expected number of accidental counts in
one histogram bin of width ``bin_width`` after ``integration_time``.

The terms fall in three groups by how they scale with the channel count n:

* proportional (dark-dark, one per detector pair)
* constant (anything involving exactly one dark count)
* inverse (everything the energy-conservation filter suppresses)

and the SNR is ``S / sqrt(S + N_c + n N_p + N_i / n)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Iterable, Sequence

import numpy as np

from .errors import InvalidGridError, InvalidParameterError, UnboundedOptimumError

TERM_LABELS = (
    "S",
    "N_dd",
    "N_dc",
    "N_ds",
    "N_dB",
    "N_cd",
    "N_sd",
    "N_Bd",
    "N_cB",
    "N_sB",
    "N_BB",
    "N_Bs",
    "N_Bc",
    "N_cs",
    "N_sc",
    "N_ss",
)
PROPORTIONAL_TERMS = ("N_dd",)
CONSTANT_TERMS = ("N_dc", "N_ds", "N_dB", "N_cd", "N_sd", "N_Bd")
INVERSE_TERMS = ("N_cB", "N_sB", "N_BB", "N_Bs", "N_Bc", "N_cs", "N_sc", "N_ss")

SWEEP_AXES = ("gain", "background", "channels")


@dataclass(frozen=True)
class SystemParams:
    """Rates and efficiencies of one rangefinder configuration.

    Rates are in events/s, ``background_density`` in events/(s nm),
    ``bandwidth`` in nm, ``bin_width`` and ``integration_time`` in s.
    """

    pair_rate: float
    unpaired_rate: float = 0.0
    dark_rate: float = 0.0
    background_density: float = 0.0
    bandwidth: float = 0.0
    gain: float = 1.0
    bin_width: float = 1e-9
    integration_time: float = 1.0
    channels: int = 1

    def __post_init__(self):
        for name in ("pair_rate", "unpaired_rate", "dark_rate", "background_density", "bandwidth"):
            value = getattr(self, name)
            if not math.isfinite(value) or value < 0:
                raise InvalidParameterError(f"{name} must be a finite non-negative number, got {value!r}")
        if not (0.0 <= self.gain <= 1.0):
            raise InvalidParameterError(f"gain must lie in [0, 1], got {self.gain!r}")
        if not (self.bin_width > 0 and math.isfinite(self.bin_width)):
            raise InvalidParameterError(f"bin_width must be > 0, got {self.bin_width!r}")
        if not (self.integration_time > 0 and math.isfinite(self.integration_time)):
            raise InvalidParameterError(f"integration_time must be > 0, got {self.integration_time!r}")
        if isinstance(self.channels, bool) or int(self.channels) != self.channels or self.channels < 1:
            raise InvalidParameterError(f"channels must be a positive integer, got {self.channels!r}")
        object.__setattr__(self, "channels", int(self.channels))

    @classmethod
    def with_heralding_efficiency(cls, pair_rate: float, heralding_efficiency: float, **kwargs) -> "SystemParams":
        """Build params with ``unpaired_rate = pair_rate (1 - eta) / eta``."""
        eta = heralding_efficiency
        if not (0.0 < eta <= 1.0):
            raise InvalidParameterError(f"heralding efficiency must lie in (0, 1], got {eta!r}")
        return cls(pair_rate=pair_rate, unpaired_rate=pair_rate * (1.0 - eta) / eta, **kwargs)

    @property
    def heralding_efficiency(self) -> float:
        total = self.pair_rate + self.unpaired_rate
        if self.pair_rate == 0:
            return float("nan")
        return self.pair_rate / total

    @property
    def background_rate(self) -> float:
        """Total ambient background rate reaching the idler detectors."""
        return self.background_density * self.bandwidth

    def replace(self, **changes) -> "SystemParams":
        return replace(self, **changes)


@dataclass(frozen=True)
class NoiseBreakdown:
    signal: float
    constant_total: float
    proportional_total: float
    inverse_total: float
    per_term: dict = field(default_factory=dict)

    @property
    def S(self):
        return self.signal

    @property
    def N_c(self):
        return self.constant_total

    @property
    def N_p(self):
        return self.proportional_total

    @property
    def N_i(self):
        return self.inverse_total

    def noise(self, channels: float) -> float:
        """Total accidental count in one bin for ``channels`` frequency channels."""
        return self.constant_total + channels * self.proportional_total + self.inverse_total / channels


def signal_count(params: SystemParams) -> float:
    """Expected true coincidences in the range bin: ``c_p Q T``."""
    return params.pair_rate * params.gain * params.integration_time


def noise_breakdown(params: SystemParams) -> NoiseBreakdown:
    p = params
    cp, cs, cd, q = p.pair_rate, p.unpaired_rate, p.dark_rate, p.gain
    bg = p.background_density * p.bandwidth
    dtt = p.bin_width * p.integration_time

    terms = {
        "S": signal_count(p),
        "N_dd": cd * cd * dtt,
        # one dark count, local side
        "N_dc": cd * q * cp * dtt,
        "N_ds": cd * q * cs * dtt,
        "N_dB": cd * bg * dtt,
        # one dark count, target side; local photons are not attenuated
        "N_cd": cp * cd * dtt,
        "N_sd": cs * cd * dtt,
        "N_Bd": 0.0,
        "N_cB": cp * bg * dtt,
        "N_sB": cs * bg * dtt,
        "N_BB": 0.0,
        "N_Bs": 0.0,
        "N_Bc": 0.0,
        "N_cs": cp * q * cs * dtt,
        "N_sc": cs * q * cp * dtt,
        "N_ss": q * cs * cs * dtt,
    }
    return NoiseBreakdown(
        signal=terms["S"],
        constant_total=math.fsum(terms[k] for k in CONSTANT_TERMS),
        proportional_total=math.fsum(terms[k] for k in PROPORTIONAL_TERMS),
        inverse_total=math.fsum(terms[k] for k in INVERSE_TERMS),
        per_term=terms,
    )


def snr(params: SystemParams, channels: float | None = None) -> float:
    """SNR of the range bin.

    ``channels`` overrides ``params.channels`` and may be any real >= 1, which
    is how the continuous optimum is evaluated.  A zero denominator gives 0.
    """
    n = params.channels if channels is None else float(channels)
    if not n > 0:
        raise InvalidParameterError(f"channel count must be positive, got {channels!r}")
    nb = noise_breakdown(params)
    denom = nb.signal + nb.noise(n)
    if denom <= 0 or nb.signal == 0:
        return 0.0
    return nb.signal / math.sqrt(denom)


def optimal_channels(params: SystemParams) -> float:
    """Channel count maximising SNR, ``sqrt(N_i / N_p)``."""
    nb = noise_breakdown(params)
    if nb.proportional_total <= 0:
        raise UnboundedOptimumError(
            "no dark-dark coincidences (N_p = 0): SNR increases without bound in the channel count"
        )
    return math.sqrt(nb.inverse_total / nb.proportional_total)


def all_pairings_params(params: SystemParams) -> SystemParams:
    """Params equivalent to summing all n^2 detector pairings.

    Merging every pairing behaves like a single channel whose detectors each
    carry the dark counts of all n physical detectors on that side.
    """
    return params.replace(channels=1, dark_rate=params.dark_rate * params.channels)


@dataclass(frozen=True)
class SweepRow:
    axis: str
    value: float
    snr: float
    S: float
    N_c: float
    N_p: float
    N_i: float


def _check_grid(axis: str, grid: Sequence[float]) -> np.ndarray:
    if axis not in SWEEP_AXES:
        raise InvalidGridError(f"unknown sweep axis {axis!r}; expected one of {SWEEP_AXES}")
    values = np.asarray(list(grid), dtype=float)
    if values.ndim != 1 or values.size == 0:
        raise InvalidGridError("sweep grid must be a non-empty 1-D sequence")
    if not np.all(np.isfinite(values)):
        raise InvalidGridError("sweep grid contains non-finite values")
    if values.size > 1:
        d = np.diff(values)
        if not (np.all(d > 0) or np.all(d < 0)):
            raise InvalidGridError("sweep grid must be strictly monotone")
    return values


def snr_sweep(
    params: SystemParams,
    axis: str,
    grid: Iterable[float],
    channels: float | str | None = None,
) -> list[SweepRow]:
    """Evaluate the SNR along one axis.

    ``gain`` sweeps Q, ``background`` sweeps B0 (events/(s nm)) and
    ``channels`` sweeps n (real values allowed).  For the first two axes
    ``channels`` fixes n (default ``params.channels``); ``"opt"`` uses the
    optimal channel count of each grid point.
    """
    values = _check_grid(axis, list(grid))
    if channels == "opt" and axis == "channels":
        raise InvalidGridError("channels='opt' makes no sense on a channel sweep")
    rows = []
    for v in values:
        v = float(v)
        if axis == "gain":
            p, n = params.replace(gain=v), channels
        elif axis == "background":
            p, n = params.replace(background_density=v), channels
        else:
            if v <= 0:
                raise InvalidGridError(f"channel counts must be positive, got {v!r}")
            p, n = params, v
        if n == "opt":
            n = optimal_channels(p)
        nb = noise_breakdown(p)
        rows.append(
            SweepRow(axis, v, snr(p, n), nb.signal, nb.constant_total, nb.proportional_total, nb.inverse_total)
        )
    return rows
