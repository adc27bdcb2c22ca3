"""Time-tag Monte Carlo of the pair rangefinder.

Each event origin (pairs, unpaired singles on either side, background on
either side, dark counts) is a homogeneous Poisson process drawn from its own
random substream.  Substreams are spawned from one ``SeedSequence`` in a fixed
order, so a stream depends only on the seed and the configuration, never on
how work is scheduled.

Times are kept in picoseconds until the final quantisation to integer
multiples of ``time_resolution_ps``.  Sides are 0 (signal, kept locally) and
1 (idler, sent to the target); channels are 1-based.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import struct
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import InvalidParameterError
from .snr import SystemParams

SPEED_OF_LIGHT = 299_792_458.0  # m/s
FWHM_TO_SIGMA = 1.0 / (2.0 * np.sqrt(2.0 * np.log(2.0)))

SIGNAL, IDLER = 0, 1
ORIGINS = ("pair", "single", "background", "dark")
PAIR, SINGLE, BACKGROUND, DARK = range(4)

# substream order; changing it changes every simulated stream
SUBSTREAMS = ("pairs", "singles_signal", "singles_idler", "background_idler", "background_signal", "darks")

MAX_CHANNELS = 128


def jitter_from_fwhm(fwhm_ps: float) -> float:
    """Gaussian sigma for a jitter quoted as FWHM."""
    if fwhm_ps < 0:
        raise InvalidParameterError("jitter FWHM must be >= 0")
    return fwhm_ps * FWHM_TO_SIGMA


def round_trip_delay_ps(distance_m: float) -> float:
    return 2.0 * distance_m / SPEED_OF_LIGHT * 1e12


def mirror_map(n: int) -> tuple[int, ...]:
    return tuple(n + 1 - i for i in range(1, n + 1))


def channel_assign(i: int, n: int, channel_map: Sequence[int] | None = None) -> int:
    """Idler channel paired with signal channel ``i`` (mirror pairing by default)."""
    if n < 1:
        raise InvalidParameterError(f"channel count must be >= 1, got {n}")
    if not (1 <= i <= n):
        raise InvalidParameterError(f"signal channel {i} outside 1..{n}")
    if channel_map is None:
        return n + 1 - i
    return int(channel_map[i - 1])


@dataclass(frozen=True)
class DetectorConfig:
    """Per-detector imperfections, shared by all 2n detectors.

    ``dark_rate`` of ``None`` takes the dark rate from the system parameters.
    """

    jitter_sigma_ps: float = 0.0
    dead_time_ps: float = 0.0
    dark_rate: float | None = None

    def __post_init__(self):
        if self.jitter_sigma_ps < 0 or self.dead_time_ps < 0:
            raise InvalidParameterError("jitter and dead time must be >= 0")
        if self.dark_rate is not None and self.dark_rate < 0:
            raise InvalidParameterError("dark rate must be >= 0")


@dataclass(frozen=True)
class ScenarioConfig:
    params: SystemParams
    target_distance_m: float
    channel_map: tuple | None = None
    time_resolution_ps: float = 50.0
    rng_seed: int = 0
    background_signal_rate: float = 0.0
    channel_weights: tuple | None = None

    def __post_init__(self):
        n = self.channels
        if n > MAX_CHANNELS:
            raise InvalidParameterError(f"at most {MAX_CHANNELS} channels are supported, got {n}")
        if not (self.target_distance_m >= 0 and np.isfinite(self.target_distance_m)):
            raise InvalidParameterError("target distance must be finite and >= 0")
        if not self.time_resolution_ps > 0:
            raise InvalidParameterError("time resolution must be > 0")
        if self.background_signal_rate < 0:
            raise InvalidParameterError("signal-side background rate must be >= 0")
        if not (0 <= int(self.rng_seed) < 2**64):
            raise InvalidParameterError("seed must be an unsigned 64-bit integer")
        if self.channel_map is None:
            object.__setattr__(self, "channel_map", mirror_map(n))
        cmap = tuple(int(c) for c in self.channel_map)
        if sorted(cmap) != list(range(1, n + 1)):
            raise InvalidParameterError(f"channel_map {cmap} is not a bijection on 1..{n}")
        object.__setattr__(self, "channel_map", cmap)
        if self.channel_weights is not None:
            w = tuple(float(x) for x in self.channel_weights)
            if len(w) != n or min(w) < 0 or sum(w) <= 0:
                raise InvalidParameterError("channel_weights needs n non-negative entries with a positive sum")
            object.__setattr__(self, "channel_weights", w)

    @property
    def channels(self) -> int:
        return self.params.channels

    @property
    def delay_ps(self) -> float:
        return round_trip_delay_ps(self.target_distance_m)

    def replace(self, **changes) -> "ScenarioConfig":
        data = {f: getattr(self, f) for f in self.__dataclass_fields__}
        data.update(changes)
        if "params" in changes and "channel_map" not in changes:
            data["channel_map"] = None
        return ScenarioConfig(**data)


def config_hash(*parts) -> str:
    """sha256 over a canonical JSON rendering of dataclasses / plain values."""

    def plain(x):
        if hasattr(x, "__dataclass_fields__"):
            return {k: plain(v) for k, v in asdict(x).items()}
        if isinstance(x, dict):
            return {str(k): plain(v) for k, v in x.items()}
        if isinstance(x, (list, tuple)):
            return [plain(v) for v in x]
        if isinstance(x, np.generic):
            return x.item()
        if isinstance(x, float):
            return repr(x)
        return x

    blob = json.dumps([plain(p) for p in parts], sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()


@dataclass
class EventStream:
    """Time-sorted detector clicks stored column-wise."""

    time: np.ndarray  # int64, units of resolution_ps
    side: np.ndarray  # uint8
    channel: np.ndarray  # int32, 1-based
    origin: np.ndarray  # uint8
    resolution_ps: float
    duration_s: float
    seed: int = 0
    config_sha256: str = field(default="0" * 64)

    def __len__(self) -> int:
        return int(self.time.size)

    def select(self, side: int, channels: Sequence[int] | None = None) -> np.ndarray:
        """Sorted tag times on one side, optionally restricted to ``channels``."""
        mask = self.side == side
        if channels is not None:
            mask &= np.isin(self.channel, np.asarray(list(channels)))
        return self.time[mask]

    def counts_by_origin(self) -> dict:
        out = {}
        for s, sname in ((SIGNAL, "signal"), (IDLER, "idler")):
            for o, oname in enumerate(ORIGINS):
                out[(sname, oname)] = int(np.count_nonzero((self.side == s) & (self.origin == o)))
        return out

    def detector_ids(self) -> np.ndarray:
        """Byte ids: signal k -> k-1, idler k -> 128+k-1."""
        return (self.side.astype(np.int32) * MAX_CHANNELS + self.channel - 1).astype(np.uint8)

    def __eq__(self, other) -> bool:
        if not isinstance(other, EventStream):
            return NotImplemented
        return (
            self.resolution_ps == other.resolution_ps
            and self.duration_s == other.duration_s
            and self.seed == other.seed
            and self.config_sha256 == other.config_sha256
            and all(
                np.array_equal(getattr(self, k), getattr(other, k)) for k in ("time", "side", "channel", "origin")
            )
        )


def _uniform_sorted(rng: np.random.Generator, count: int, span: float) -> np.ndarray:
    """``count`` sorted uniforms on [0, span) via normalised exponential spacings."""
    if count == 0:
        return np.empty(0)
    g = rng.standard_exponential(count + 1)
    c = np.cumsum(g)
    return c[:-1] * (span / c[-1])


def _poisson_times(rng, rate: float, span_ps: float) -> np.ndarray:
    if rate <= 0:
        return np.empty(0)
    k = int(rng.poisson(rate * span_ps * 1e-12))
    return _uniform_sorted(rng, k, span_ps)


def _draw_channels(rng, count: int, n: int, weights=None) -> np.ndarray:
    if n == 1:
        return np.ones(count, dtype=np.int32)
    if weights is None:
        return rng.integers(1, n + 1, size=count, dtype=np.int32)
    p = np.asarray(weights) / np.sum(weights)
    return (rng.choice(n, size=count, p=p) + 1).astype(np.int32)


def _jitter(rng, t: np.ndarray, sigma: float) -> np.ndarray:
    if sigma > 0 and t.size:
        return t + rng.normal(0.0, sigma, size=t.size)
    return t


def _apply_dead_time(time: np.ndarray, keys: np.ndarray, dead_units: float) -> np.ndarray:
    """Keep-mask for a non-paralysable dead time, applied per detector key."""
    keep = np.zeros(time.size, dtype=bool)
    for k in np.unique(keys):
        idx = np.flatnonzero(keys == k)
        t = time[idx]
        j = 0
        while j < t.size:
            keep[idx[j]] = True
            j = int(np.searchsorted(t, t[j] + dead_units, side="left"))
    return keep


def simulate(
    scenario: ScenarioConfig,
    detectors: DetectorConfig | None = None,
    duration: float | None = None,
    seed=None,
) -> EventStream:
    """Simulate all detector clicks over ``[0, duration)`` seconds.

    ``seed`` may be an int or a ``numpy.random.SeedSequence``; it defaults to
    ``scenario.rng_seed``.  ``duration`` defaults to the integration time of
    the system parameters.
    """
    det = detectors or DetectorConfig()
    p = scenario.params
    T = p.integration_time if duration is None else float(duration)
    if not (T > 0 and np.isfinite(T)):
        raise InvalidParameterError(f"duration must be > 0, got {duration!r}")
    if isinstance(seed, np.random.SeedSequence):
        ss = seed
    else:
        ss = np.random.SeedSequence(int(scenario.rng_seed if seed is None else seed))
    root_seed = int(ss.entropy) if isinstance(ss.entropy, int) else 0
    gens = dict(zip(SUBSTREAMS, (np.random.default_rng(c) for c in ss.spawn(len(SUBSTREAMS)))))

    n = scenario.channels
    span = T * 1e12
    sigma = det.jitter_sigma_ps
    dark = p.dark_rate if det.dark_rate is None else det.dark_rate
    cmap = np.asarray(scenario.channel_map, dtype=np.int32)
    parts = []  # (times_ps, side, channel, origin) in fixed merge order

    rng = gens["pairs"]
    t = _poisson_times(rng, p.pair_rate, span)
    ch = _draw_channels(rng, t.size, n, scenario.channel_weights)
    returned = rng.random(t.size) < p.gain if p.gain < 1 else np.ones(t.size, dtype=bool)
    ts = _jitter(rng, t, sigma)
    ti = _jitter(rng, t[returned] + scenario.delay_ps, sigma)
    parts.append((ts, SIGNAL, ch, PAIR))
    parts.append((ti, IDLER, cmap[ch[returned] - 1], PAIR))

    rng = gens["singles_signal"]
    t = _poisson_times(rng, p.unpaired_rate, span)
    parts.append((_jitter(rng, t, sigma), SIGNAL, _draw_channels(rng, t.size, n, scenario.channel_weights), SINGLE))

    rng = gens["singles_idler"]
    t = _poisson_times(rng, p.unpaired_rate * p.gain, span)
    ch = _draw_channels(rng, t.size, n, scenario.channel_weights)
    parts.append((_jitter(rng, t, sigma), IDLER, cmap[ch - 1], SINGLE))

    rng = gens["background_idler"]
    t = _poisson_times(rng, p.background_rate, span)
    parts.append((_jitter(rng, t, sigma), IDLER, _draw_channels(rng, t.size, n), BACKGROUND))

    rng = gens["background_signal"]
    t = _poisson_times(rng, scenario.background_signal_rate, span)
    parts.append((_jitter(rng, t, sigma), SIGNAL, _draw_channels(rng, t.size, n), BACKGROUND))

    rng = gens["darks"]
    for side in (SIGNAL, IDLER):
        for c in range(1, n + 1):
            t = _poisson_times(rng, dark, span)
            parts.append((_jitter(rng, t, sigma), side, np.full(t.size, c, dtype=np.int32), DARK))

    inv_res = 1.0 / scenario.time_resolution_ps
    times, sides, chans, origins = [], [], [], []
    for tp, side, ch, origin in parts:
        q = np.floor(tp * inv_res).astype(np.int64)
        times.append(q)
        sides.append(np.full(q.size, side, dtype=np.uint8))
        chans.append(np.broadcast_to(np.asarray(ch, dtype=np.int32), q.shape))
        origins.append(np.full(q.size, origin, dtype=np.uint8))
    time = np.concatenate(times)
    side = np.concatenate(sides)
    chan = np.concatenate(chans)
    orig = np.concatenate(origins)

    end = int(np.floor(span * inv_res))
    inside = (time >= 0) & (time < end)
    if not inside.all():
        time, side, chan, orig = time[inside], side[inside], chan[inside], orig[inside]
    order = np.argsort(time, kind="stable")
    time, side, chan, orig = time[order], side[order], chan[order], orig[order]

    if det.dead_time_ps > 0 and time.size:
        keys = side.astype(np.int32) * MAX_CHANNELS + chan
        keep = _apply_dead_time(time, keys, det.dead_time_ps * inv_res)
        time, side, chan, orig = time[keep], side[keep], chan[keep], orig[keep]

    return EventStream(
        time=time,
        side=side,
        channel=chan,
        origin=orig,
        resolution_ps=float(scenario.time_resolution_ps),
        duration_s=T,
        seed=root_seed,
        config_sha256=config_hash(scenario, det, T),
    )


# -- serialisation ---------------------------------------------------------

MAGIC = b"QRTT"
FORMAT_VERSION = 1
_HEADER = struct.Struct("<4sHddQ32sQ")
RECORD_DTYPE = np.dtype([("detector", "u1"), ("time", "<i8"), ("origin", "u1")])  # 10 bytes, packed


def write_binary(stream: EventStream, path) -> None:
    """Flat binary file: fixed header then 10-byte records.

    Header (little-endian): magic ``QRTT``, u16 version, f64 resolution_ps,
    f64 duration_s, u64 seed, 32-byte sha256 of the config, u64 record count.
    Record: u8 detector id, i64 time in resolution units, u8 origin.
    """
    rec = np.empty(len(stream), dtype=RECORD_DTYPE)
    rec["detector"] = stream.detector_ids()
    rec["time"] = stream.time
    rec["origin"] = stream.origin
    header = _HEADER.pack(
        MAGIC,
        FORMAT_VERSION,
        stream.resolution_ps,
        stream.duration_s,
        int(stream.seed),
        bytes.fromhex(stream.config_sha256),
        len(stream),
    )
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(rec.tobytes())


def read_binary(path) -> EventStream:
    data = Path(path).read_bytes()
    if len(data) < _HEADER.size:
        raise InvalidParameterError(f"{path}: truncated event file")
    magic, version, res, dur, seed, digest, count = _HEADER.unpack_from(data)
    if magic != MAGIC or version != FORMAT_VERSION:
        raise InvalidParameterError(f"{path}: not a version-{FORMAT_VERSION} event file")
    body = data[_HEADER.size :]
    if len(body) != count * RECORD_DTYPE.itemsize:
        raise InvalidParameterError(f"{path}: expected {count} records")
    rec = np.frombuffer(body, dtype=RECORD_DTYPE)
    det = rec["detector"].astype(np.int32)
    return EventStream(
        time=rec["time"].astype(np.int64),
        side=(det >= MAX_CHANNELS).astype(np.uint8),
        channel=(det % MAX_CHANNELS + 1).astype(np.int32),
        origin=rec["origin"].copy(),
        resolution_ps=res,
        duration_s=dur,
        seed=seed,
        config_sha256=digest.hex(),
    )


def write_csv(stream: EventStream, path) -> None:
    buf = io.StringIO()
    buf.write(f"# seed={stream.seed} config_sha256={stream.config_sha256}\n")
    buf.write(f"# resolution_ps={stream.resolution_ps!r} duration_s={stream.duration_s!r}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["detector", "side", "channel", "time", "origin"])
    names = ("signal", "idler")
    for t, s, c, o in zip(stream.time.tolist(), stream.side.tolist(), stream.channel.tolist(), stream.origin.tolist()):
        w.writerow([f"{names[s]}-{c}", names[s], c, t, ORIGINS[o]])
    Path(path).write_text(buf.getvalue(), encoding="utf-8", newline="\n")


def read_csv(path) -> EventStream:
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    meta = {}
    for line in lines[:2]:
        for item in line.lstrip("# ").split():
            k, _, v = item.partition("=")
            meta[k] = v
    rows = list(csv.DictReader(lines[2:]))
    sides = {"signal": SIGNAL, "idler": IDLER}
    return EventStream(
        time=np.array([int(r["time"]) for r in rows], dtype=np.int64),
        side=np.array([sides[r["side"]] for r in rows], dtype=np.uint8),
        channel=np.array([int(r["channel"]) for r in rows], dtype=np.int32),
        origin=np.array([ORIGINS.index(r["origin"]) for r in rows], dtype=np.uint8),
        resolution_ps=float(meta["resolution_ps"]),
        duration_s=float(meta["duration_s"]),
        seed=int(meta["seed"]),
        config_sha256=meta["config_sha256"],
    )
