"""TOML run configuration with file:line diagnostics.

Units live in key names (``bin_width_ps``, ``pair_rate_hz``); nothing is
converted implicitly.  Unknown keys are errors so typos do not silently fall
back to defaults.
"""

from __future__ import annotations

import hashlib
import math
import re
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ._toml import tomllib
from .errors import ConfigError, InvalidParameterError
from .snr import SystemParams

_MISSING = object()
_SECTION_RE = re.compile(r"^\s*\[\s*([A-Za-z0-9_.\-]+)\s*\]\s*(#.*)?$")
_KEY_RE = re.compile(r"^\s*([A-Za-z0-9_\-]+)\s*=")
_LINE_RE = re.compile(r"at line (\d+)")


@dataclass
class RunConfig:
    path: str
    text: str
    data: dict

    @property
    def sha256(self) -> str:
        return hashlib.sha256(self.text.encode("utf-8")).hexdigest()

    def line_of(self, section: str, key: str | None = None) -> int | None:
        """1-based line of ``key`` inside ``[section]`` (or of the header)."""
        current = ""
        for no, line in enumerate(self.text.splitlines(), 1):
            m = _SECTION_RE.match(line)
            if m:
                current = m.group(1)
                if key is None and current == section:
                    return no
                continue
            if key is not None and current == section:
                k = _KEY_RE.match(line)
                if k and k.group(1) == key:
                    return no
        return None

    def error(self, message: str, section: str = "", key: str | None = None) -> ConfigError:
        where = f"[{section}] {key}: " if section and key else (f"{key}: " if key else "")
        return ConfigError(where + message, self.path, self.line_of(section, key))

    def section(self, name: str, required: bool = True) -> "Section":
        if name not in self.data:
            if required:
                raise ConfigError(f"missing section [{name}]", self.path)
            return Section(self, name, {})
        value = self.data[name]
        if not isinstance(value, dict):
            raise self.error("expected a table", "", name)
        return Section(self, name, value)

    def has(self, name: str) -> bool:
        return name in self.data

    def check_sections(self, allowed) -> None:
        for k in self.data:
            if k not in allowed and k != "seed":
                raise self.error(f"unknown section or key (expected one of {sorted(allowed)})", "", k)


class Section:
    def __init__(self, cfg: RunConfig, name: str, data: dict):
        self.cfg, self.name, self.data = cfg, name, data
        self.used = set()

    def __contains__(self, key) -> bool:
        return key in self.data

    def _raw(self, key, default):
        self.used.add(key)
        if key in self.data:
            return self.data[key]
        if default is _MISSING:
            raise ConfigError(
                f"[{self.name}]: missing required key {key!r}", self.cfg.path, self.cfg.line_of(self.name)
            )
        return default

    def fail(self, key, message) -> ConfigError:
        return self.cfg.error(message, self.name, key)

    def number(self, key, default=_MISSING, minimum=None, maximum=None, positive=False) -> float:
        v = self._raw(key, default)
        if v is None:
            return v
        if isinstance(v, bool) or not isinstance(v, (int, float)):
            raise self.fail(key, f"expected a number, got {v!r}")
        v = float(v)
        if not math.isfinite(v):
            raise self.fail(key, "must be finite")
        if positive and not v > 0:
            raise self.fail(key, f"must be > 0, got {v!r}")
        if minimum is not None and v < minimum:
            raise self.fail(key, f"must be >= {minimum}, got {v!r}")
        if maximum is not None and v > maximum:
            raise self.fail(key, f"must be <= {maximum}, got {v!r}")
        return v

    def integer(self, key, default=_MISSING, minimum=None) -> int:
        v = self._raw(key, default)
        if isinstance(v, bool) or not isinstance(v, int):
            raise self.fail(key, f"expected an integer, got {v!r}")
        if minimum is not None and v < minimum:
            raise self.fail(key, f"must be >= {minimum}, got {v!r}")
        return v

    def boolean(self, key, default=_MISSING) -> bool:
        v = self._raw(key, default)
        if not isinstance(v, bool):
            raise self.fail(key, f"expected true/false, got {v!r}")
        return v

    def string(self, key, default=_MISSING, choices=None) -> str:
        v = self._raw(key, default)
        if not isinstance(v, str):
            raise self.fail(key, f"expected a string, got {v!r}")
        if choices is not None and v not in choices:
            raise self.fail(key, f"must be one of {list(choices)}, got {v!r}")
        return v

    def array(self, key, default=_MISSING, length=None, nonempty=True) -> list:
        v = self._raw(key, default)
        if v is None:
            return v
        if not isinstance(v, list):
            raise self.fail(key, f"expected an array, got {v!r}")
        if nonempty and not v:
            raise self.fail(key, "must not be empty")
        if length is not None and len(v) != length:
            raise self.fail(key, f"expected {length} entries, got {len(v)}")
        return v

    def numbers(self, key, default=_MISSING, length=None) -> list[float]:
        v = self.array(key, default, length)
        if v is None:
            return v
        for x in v:
            if isinstance(x, bool) or not isinstance(x, (int, float)) or not math.isfinite(x):
                raise self.fail(key, f"entries must be finite numbers, got {x!r}")
        return [float(x) for x in v]

    def finish(self) -> None:
        """Reject keys nobody asked for."""
        for k in self.data:
            if k not in self.used:
                raise self.fail(k, "unknown key")


def load_config(path) -> RunConfig:
    p = Path(path)
    try:
        text = p.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc.strerror}", str(p)) from None
    try:
        data = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        m = _LINE_RE.search(str(exc))
        raise ConfigError(f"TOML syntax error: {exc}", str(p), int(m.group(1)) if m else None) from None
    return RunConfig(str(p), text, data)


def grid_from(section: Section) -> list[float]:
    """Either explicit ``values`` or ``start``/``stop``/``points`` with ``scale``."""
    if "values" in section:
        return section.numbers("values")
    start = section.number("start")
    stop = section.number("stop")
    points = section.integer("points", minimum=1)
    scale = section.string("scale", "linear", choices=("linear", "log"))
    if scale == "log":
        if start <= 0 or stop <= 0:
            raise section.fail("scale", "log grids need positive start and stop")
        g = np.logspace(math.log10(start), math.log10(stop), points)
        g[0], g[-1] = start, stop  # exact endpoints
        return [float(x) for x in g]
    return [float(x) for x in np.linspace(start, stop, points)]


def system_params(section: Section) -> SystemParams:
    """Build ``SystemParams`` from a ``[system]`` table.

    Either ``unpaired_rate_hz`` or ``heralding_efficiency`` may be given, and
    either ``gain`` or ``gain_db``.
    """
    pair = section.number("pair_rate_hz", minimum=0)
    if "heralding_efficiency" in section and "unpaired_rate_hz" in section:
        raise section.fail("heralding_efficiency", "give either heralding_efficiency or unpaired_rate_hz")
    if "heralding_efficiency" in section:
        eta = section.number("heralding_efficiency")
        if not 0 < eta <= 1:
            raise section.fail("heralding_efficiency", f"must lie in (0, 1], got {eta!r}")
        unpaired = pair * (1.0 - eta) / eta
    else:
        unpaired = section.number("unpaired_rate_hz", 0.0, minimum=0)
    if "gain" in section and "gain_db" in section:
        raise section.fail("gain_db", "give either gain or gain_db")
    if "gain_db" in section:
        gain = 10.0 ** (section.number("gain_db", maximum=0.0) / 10.0)
    else:
        gain = section.number("gain", 1.0, minimum=0.0, maximum=1.0)
    try:
        params = SystemParams(
            pair_rate=pair,
            unpaired_rate=unpaired,
            dark_rate=section.number("dark_rate_hz", 0.0, minimum=0),
            background_density=section.number("background_density_hz_per_nm", 0.0, minimum=0),
            bandwidth=section.number("bandwidth_nm", 0.0, minimum=0),
            gain=gain,
            bin_width=section.number("bin_width_ps", positive=True) * 1e-12,
            integration_time=section.number("integration_time_s", 1.0, positive=True),
            channels=section.integer("channels", 1, minimum=1),
        )
    except InvalidParameterError as exc:
        raise ConfigError(str(exc), section.cfg.path, section.cfg.line_of(section.name)) from None
    section.finish()
    return params
