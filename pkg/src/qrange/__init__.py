"""Covert rangefinding workbench built around correlated photon pairs."""

__version__ = "0.1.0"
