"""Refractive-index models keyed by polarisation role (pump, signal, idler).

Three forms are supported:

``sellmeier``  n^2 = A + sum_k B_k / (lambda^2 - C_k) - D lambda^2   (lambda in um)
``constant``   n = value
``linear``     n = a + b lambda                                      (lambda in um)

Models are loaded from TOML data files; ``ktp-kato2002`` ships with the
package.  The synthetic forms exist for exact tests.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

from .._toml import tomllib
from ..errors import DispersionWindowError, InvalidParameterError

ROLES = ("pump", "signal", "idler")


@dataclass(frozen=True)
class AxisIndex:
    form: str
    coefficients: dict

    def __call__(self, wavelength_um):
        lam = np.asarray(wavelength_um, dtype=float)
        c = self.coefficients
        if self.form == "constant":
            return np.full_like(lam, float(c["value"]))
        if self.form == "linear":
            return float(c["a"]) + float(c["b"]) * lam
        if self.form == "sellmeier":
            l2 = lam * lam
            n2 = np.full_like(lam, float(c["A"]))
            for b, cc in c.get("terms", []):
                n2 = n2 + b / (l2 - cc)
            n2 = n2 - float(c.get("D", 0.0)) * l2
            return np.sqrt(n2)
        raise InvalidParameterError(f"unknown dispersion form {self.form!r}")


@dataclass(frozen=True)
class DispersionModel:
    name: str
    axes: dict
    roles: dict
    window_um: tuple = (0.0, np.inf)
    temperature_c: float = 20.0
    source: str = field(default="", compare=False)

    def __post_init__(self):
        for role in ROLES:
            if role not in self.roles:
                raise InvalidParameterError(f"dispersion model {self.name!r} lacks a {role!r} role")
            if self.roles[role] not in self.axes:
                raise InvalidParameterError(
                    f"role {role!r} maps to undefined axis {self.roles[role]!r} in {self.name!r}"
                )
        lo, hi = self.window_um
        if not (0 <= lo < hi):
            raise InvalidParameterError(f"invalid validity window {self.window_um!r}")

    def check_window(self, wavelength_nm) -> None:
        lam = np.asarray(wavelength_nm, dtype=float) * 1e-3
        lo, hi = self.window_um
        if lam.size and (np.min(lam) < lo or np.max(lam) > hi):
            raise DispersionWindowError(
                f"wavelengths {np.min(lam) * 1e3:.6g}-{np.max(lam) * 1e3:.6g} nm fall outside the "
                f"{self.name!r} validity window {lo * 1e3:g}-{hi * 1e3:g} nm"
            )

    def index(self, wavelength_nm, role: str):
        """Refractive index for ``role`` at ``wavelength_nm`` (array-aware)."""
        if role not in ROLES:
            raise InvalidParameterError(f"role must be one of {ROLES}, got {role!r}")
        self.check_window(wavelength_nm)
        n = self.axes[self.roles[role]](np.asarray(wavelength_nm, dtype=float) * 1e-3)
        return float(n) if np.ndim(n) == 0 else n

    @classmethod
    def constant(cls, value: float = 1.0, name: str = "constant") -> "DispersionModel":
        axis = AxisIndex("constant", {"value": value})
        return cls(name, {"o": axis}, {r: "o" for r in ROLES})

    @classmethod
    def vacuum(cls) -> "DispersionModel":
        return cls.constant(1.0, name="vacuum")

    @classmethod
    def linear(cls, coefficients: dict, name: str = "linear") -> "DispersionModel":
        """``coefficients`` maps each role to ``(a, b)`` with n = a + b lambda[um]."""
        axes = {role: AxisIndex("linear", {"a": a, "b": b}) for role, (a, b) in coefficients.items()}
        return cls(name, axes, {r: r for r in ROLES})

    @classmethod
    def from_mapping(cls, data: dict, source: str = "") -> "DispersionModel":
        try:
            form = data.get("form", "sellmeier")
            axes = {ax: AxisIndex(form, dict(coeffs)) for ax, coeffs in data["axes"].items()}
            window = tuple(float(v) for v in data.get("window_um", (0.0, np.inf)))
            return cls(
                name=str(data.get("name", source or "custom")),
                axes=axes,
                roles=dict(data["roles"]),
                window_um=window,
                temperature_c=float(data.get("temperature_c", 20.0)),
                source=source,
            )
        except KeyError as exc:
            raise InvalidParameterError(f"dispersion data {source!r} is missing {exc}") from None


def builtin_models() -> list[str]:
    files = resources.files("qrange.data")
    return sorted(p.name[:-5] for p in files.iterdir() if p.name.endswith(".toml"))


def load_dispersion(name_or_path: str, temperature_c: float | None = None) -> DispersionModel:
    """Load a shipped model by name (e.g. ``ktp-kato2002``) or a TOML file path."""
    if name_or_path == "vacuum":
        return DispersionModel.vacuum()
    path = Path(name_or_path)
    if path.suffix == ".toml" and path.exists():
        text = path.read_text(encoding="utf-8")
        source = str(path)
    else:
        res = resources.files("qrange.data") / f"{name_or_path}.toml"
        if not res.is_file():
            raise InvalidParameterError(
                f"unknown dispersion model {name_or_path!r}; built-in models: {', '.join(builtin_models())}"
            )
        text = res.read_text(encoding="utf-8")
        source = name_or_path
    model = DispersionModel.from_mapping(tomllib.loads(text), source=source)
    if temperature_c is not None:
        model = DispersionModel(model.name, model.axes, model.roles, model.window_um, temperature_c, model.source)
    return model
