"""Inverse-Gamma modeling of unknown uplink interference and outage-aware rate selection."""

__version__ = "0.1.0"
