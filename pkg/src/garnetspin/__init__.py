"""Spin physics toolkit for cerium ions in YAG: spectra, optical pumping,
pulse-sequence dynamics under classical and dipolar baths, and decay fits."""

from .crystal import FieldSpec, GTensor, SiteFrame, effective_g, lab_g_matrix, site_frames
from .errors import ConfigError, InputError
from .signals import Signal, read_signal, signal_to_csv

__version__ = "0.1.0"

__all__ = [
    "ConfigError", "FieldSpec", "GTensor", "InputError", "Signal", "SiteFrame",
    "effective_g", "lab_g_matrix", "read_signal", "signal_to_csv", "site_frames",
]
