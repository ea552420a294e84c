"""Ensembled ECG-derived respiration.

Derives a respiratory signal from one- or two-lead ECG by pooling several
beat-wise respiratory surrogates (amplitude, subspace, and kernel-eigenvector
constructions), fusing them through a lag-embedded SVD, and scoring the result
against reference signals with a lagged correlation index and a
time-frequency transport distance.
"""

from .signalcore import (
    DegenerateDataError,
    InsufficientDataError,
    SampledSignal,
    TimedSeries,
    local_zscore,
    pearson,
    resample,
    spline_interpolate,
)

__all__ = [
    "DegenerateDataError",
    "InsufficientDataError",
    "SampledSignal",
    "TimedSeries",
    "local_zscore",
    "pearson",
    "resample",
    "spline_interpolate",
]

__version__ = "0.1.0"
