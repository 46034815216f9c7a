"""Scalar evaluation metrics: SNR, log relative squared error, flag recovery.

Degenerate cases map to IEEE infinities (perfect reconstruction gives
-inf dB, zero noise gives +inf dB); the CSV/JSON convention writes them as
the strings "inf" / "-inf", which round-trip losslessly through
:func:`format_metric` / :func:`parse_metric`.
"""

from __future__ import annotations

import math

import numpy as np

from .flags import StiefelFlag, flag_chordal
from .linalg import as_matrix


def snr_db(signal, noise) -> float:
    """Signal-to-noise ratio 10*log10(||D||_F^2 / ||eps||_F^2) in decibels."""
    d = as_matrix(signal, "signal")
    e = as_matrix(noise, "noise")
    if d.shape != e.shape:
        raise ValueError(f"shape mismatch: {d.shape} vs {e.shape}")
    noise_power = float(np.linalg.norm(e) ** 2)
    signal_power = float(np.linalg.norm(d) ** 2)
    if noise_power == 0.0:
        return math.inf
    if signal_power == 0.0:
        return -math.inf
    return 10.0 * math.log10(signal_power / noise_power)


def lrse_db(reference, estimate) -> float:
    """Log relative squared error 10*log10(||D - Dhat||_F^2 / ||D||_F^2)."""
    d = as_matrix(reference, "reference")
    d_hat = as_matrix(estimate, "estimate")
    if d.shape != d_hat.shape:
        raise ValueError(f"shape mismatch: {d.shape} vs {d_hat.shape}")
    ref_power = float(np.linalg.norm(d) ** 2)
    if ref_power == 0.0:
        raise ValueError("reference matrix has zero norm")
    err_power = float(np.linalg.norm(d - d_hat) ** 2)
    if err_power == 0.0:
        return -math.inf
    return 10.0 * math.log10(err_power / ref_power)


def flag_recovery_distance(truth: StiefelFlag, estimate: StiefelFlag) -> float:
    """Chordal distance between the true and estimated flags (trace form)."""
    return flag_chordal(truth, estimate)


def format_metric(value: float) -> str:
    """Serialize a metric value; infinities become "inf"/"-inf".

    Finite values use the shortest representation that round-trips exactly.
    """
    if math.isinf(value):
        return "inf" if value > 0 else "-inf"
    return repr(float(value))


def parse_metric(text: str) -> float:
    value = float(text)
    if math.isnan(value):
        raise ValueError("metric values cannot be NaN")
    return value
