"""Objective evaluation: NCC, SNR, noise sweep and disentanglement probe."""
from .metrics import MetricError, NccReport, SnrReport, ncc, snr_estimate, snr_with_reference
from .probe import ProbeConfig, ProbeError, ProbeReport, disentanglement_probe, extract_codes, probe_codes
from .sweep import SweepRow, noise_robustness_sweep, parse_levels, sweep_csv

__all__ = [
    "MetricError", "NccReport", "SnrReport", "ncc", "snr_estimate", "snr_with_reference",
    "ProbeConfig", "ProbeError", "ProbeReport", "disentanglement_probe", "extract_codes", "probe_codes",
    "SweepRow", "noise_robustness_sweep", "parse_levels", "sweep_csv",
]
