"""Sampled-signal primitives shared by every stage of the pipeline.

Signals are numpy arrays tagged with a sampling rate and a time origin.
Missing values ("nulls") are represented as NaN: estimates carry nulls
outside their interpolation span, and consumers here either skip them
(``pearson``) or propagate them explicitly (``local_zscore``).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.interpolate import CubicSpline


class InsufficientDataError(ValueError):
    """Too few samples, knots, or beats for the requested operation."""


class DegenerateDataError(ValueError):
    """Input whose structure leaves the result undefined (zero variance etc.)."""


@dataclass(frozen=True)
class SampledSignal:
    """Uniformly sampled real signal; ``samples[i]`` is the value at ``t0 + i/rate``."""

    samples: np.ndarray
    rate: float
    t0: float = 0.0

    def __post_init__(self):
        samples = np.asarray(self.samples, dtype=float)
        if samples.ndim != 1:
            raise ValueError("samples must be one-dimensional")
        if not self.rate > 0:
            raise ValueError("rate must be positive")
        # NaN marks a null; infinities are never valid sample values
        if np.isinf(samples).any():
            raise ValueError("samples must not contain infinities")
        object.__setattr__(self, "samples", samples)

    def __len__(self) -> int:
        return self.samples.size

    @property
    def duration(self) -> float:
        """Record length in seconds (sample count over rate)."""
        return self.samples.size / self.rate

    def times(self) -> np.ndarray:
        return self.t0 + np.arange(self.samples.size) / self.rate


@dataclass(frozen=True)
class TimedSeries:
    """Values attached to strictly increasing, non-uniform time instants."""

    times: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        times = np.asarray(self.times, dtype=float)
        values = np.asarray(self.values, dtype=float)
        if times.ndim != 1 or values.ndim != 1:
            raise ValueError("times and values must be one-dimensional")
        if times.size != values.size:
            raise ValueError("times and values must have equal length")
        if times.size > 1 and not np.all(np.diff(times) > 0):
            raise ValueError("times must be strictly increasing")
        if times.size and not np.isfinite(times).all():
            raise ValueError("times must be finite")
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "values", values)

    def __len__(self) -> int:
        return self.times.size


def resample(signal: SampledSignal, target_rate: float) -> SampledSignal:
    """Resample onto a uniform grid at ``target_rate`` via a cubic spline.

    The output grid starts at the same origin and spans the same duration to
    within one output sample; the last output instant never extrapolates past
    the last input instant.  Equal rates return an identical copy.
    """
    if not target_rate > 0:
        raise ValueError("target rate must be positive")
    x = signal.samples
    if x.size < 4:
        raise InsufficientDataError("insufficient samples: need at least 4 to resample")
    if not np.isfinite(x).all():
        raise ValueError("cannot resample a signal containing nulls")
    if target_rate == signal.rate:
        return SampledSignal(x.copy(), signal.rate, signal.t0)
    t_in = np.arange(x.size) / signal.rate
    m = int(np.floor((x.size - 1) * target_rate / signal.rate)) + 1
    t_out = np.arange(m) / target_rate
    out = CubicSpline(t_in, x)(t_out)
    return SampledSignal(out, target_rate, signal.t0)


def spline_interpolate(knots: TimedSeries, grid: np.ndarray) -> np.ndarray:
    """Evaluate a not-a-knot cubic spline through ``knots`` on ``grid``.

    Grid points outside the knot span come back as NaN rather than being
    extrapolated.
    """
    if len(knots) < 4:
        raise InsufficientDataError("insufficient knots: need at least 4 for a cubic spline")
    if not np.isfinite(knots.values).all():
        raise ValueError("knot values must be finite")
    grid = np.asarray(grid, dtype=float)
    out = CubicSpline(knots.times, knots.values)(grid)
    inside = (grid >= knots.times[0]) & (grid <= knots.times[-1])
    out[~inside] = np.nan
    return out


def pearson(x: np.ndarray, y: np.ndarray) -> float:
    """Pearson correlation over positions where both inputs are non-null."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape or x.ndim != 1:
        raise ValueError("inputs must be one-dimensional and equally long")
    keep = ~(np.isnan(x) | np.isnan(y))
    x = x[keep]
    y = y[keep]
    if x.size < 2:
        raise InsufficientDataError("insufficient samples: need at least 2 overlapping values")
    xc = x - x.mean()
    yc = y - y.mean()
    denom = np.sqrt(np.dot(xc, xc) * np.dot(yc, yc))
    if denom == 0.0:
        raise DegenerateDataError("degenerate input: zero variance")
    return float(np.clip(np.dot(xc, yc) / denom, -1.0, 1.0))


def local_zscore(x: np.ndarray, half_window: int = 50) -> np.ndarray:
    """Sliding z-score with boundary-truncated windows.

    Sample ``i`` is standardized by the mean and sample standard deviation of
    the window ``[i - half_window + 1, i + half_window]``, truncated at the
    signal (or null-run) boundaries.  Windows with zero deviation map to 0.
    Nulls pass through untouched; statistics never cross a null run.
    """
    if half_window < 1:
        raise ValueError("half_window must be at least 1")
    x = np.asarray(x, dtype=float)
    if x.size < 2:
        raise InsufficientDataError("insufficient samples: need at least 2")
    out = np.full(x.size, np.nan)
    finite = np.isfinite(x)
    if not finite.any():
        return out
    # z-score each contiguous finite run independently
    edges = np.flatnonzero(np.diff(finite.astype(np.int8)) != 0) + 1
    bounds = np.concatenate([[0], edges, [x.size]])
    for s, e in zip(bounds[:-1], bounds[1:]):
        if finite[s]:
            out[s:e] = _zscore_run(x[s:e], half_window)
    return out


def _zscore_run(x: np.ndarray, hw: int) -> np.ndarray:
    n = x.size
    if n == 1:
        return np.zeros(1)
    x0 = x - x.mean()  # pre-centering: z-scores are shift invariant, sums stay small
    idx = np.arange(n)
    lo = np.maximum(idx - (hw - 1), 0)
    hi = np.minimum(idx + hw + 1, n)
    cs = np.concatenate([[0.0], np.cumsum(x0)])
    cs2 = np.concatenate([[0.0], np.cumsum(x0 * x0)])
    cnt = hi - lo
    mu = (cs[hi] - cs[lo]) / cnt
    ss = np.maximum((cs2[hi] - cs2[lo]) - cnt * mu * mu, 0.0)
    sd = np.zeros(n)
    multi = cnt > 1
    sd[multi] = np.sqrt(ss[multi] / (cnt[multi] - 1))
    z = np.zeros(n)
    ok = sd > 0
    z[ok] = (x0[ok] - mu[ok]) / sd[ok]
    return z
