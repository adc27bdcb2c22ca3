"""Quasi-phase-matched crystals: poling, dispersion, JSA and Schmidt modes."""

from .dispersion import DispersionModel, builtin_models, load_dispersion
from .jsa import (
    GridSpec,
    JSAGrid,
    PumpSpectrum,
    compute_jsa,
    energy_conserving_idler,
    marginal_spectra,
    phase_mismatch,
)
from .poling import PolingStructure, build_chirped_poling, phase_matching_amplitude
from .schmidt import SchmidtDecomposition, schmidt, schmidt_number

__all__ = [
    "DispersionModel",
    "GridSpec",
    "JSAGrid",
    "PolingStructure",
    "PumpSpectrum",
    "SchmidtDecomposition",
    "build_chirped_poling",
    "builtin_models",
    "compute_jsa",
    "energy_conserving_idler",
    "load_dispersion",
    "marginal_spectra",
    "phase_matching_amplitude",
    "phase_mismatch",
    "schmidt",
    "schmidt_number",
]
