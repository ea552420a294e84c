"""Scoring estimates against reference respiration.

Two figures of merit: a lagged correlation index (best absolute Pearson
correlation over a small integer-lag range, scaled to 0-100) and a spectral
transport index (mean 1-Wasserstein distance between time-frequency columns
of the estimate and the reference).  The time-frequency representation is a
de-shaped synchrosqueezed STFT: a cepstral mask strips harmonic structure,
then reassignment by instantaneous frequency sharpens what remains.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .signalcore import (
    DegenerateDataError,
    InsufficientDataError,
    SampledSignal,
    TimedSeries,
    pearson,
    spline_interpolate,
)

EDR_RATE = 10.0
EVAL_SECONDS = 120.0
MAX_LAG = 10
STFT_FLOOR = 1e-8  # relative magnitude below which bins are not reassigned


@dataclass(frozen=True)
class DsSstParams:
    """De-shaped synchrosqueezing parameters (samples unless stated)."""

    window: int = 200
    gaussian_bandwidth: float = 0.15  # window std = bandwidth * window / sqrt(2*pi)
    soft_log_power: float = 0.03
    hop: int = 1
    dft_points: int = 300

    def __post_init__(self):
        if self.window < 4:
            raise ValueError("window must be at least 4 samples")
        if not self.gaussian_bandwidth > 0:
            raise ValueError("gaussian_bandwidth must be positive")
        if not 0 < self.soft_log_power <= 1:
            raise ValueError("soft_log_power must lie in (0, 1]")
        if self.hop < 1:
            raise ValueError("hop must be at least 1")
        if self.dft_points < self.window:
            raise ValueError("dft_points must be at least the window length")


@dataclass(frozen=True)
class Tfr:
    """Nonnegative time-frequency representation, frequency by frame."""

    matrix: np.ndarray
    freq_axis: np.ndarray  # Hz
    time_axis: np.ndarray  # s


@dataclass(frozen=True)
class GammaResult:
    gamma: float
    tau_star: int
    lags: np.ndarray
    rho_per_lag: np.ndarray  # signed correlations, NaN where a lag was excluded


@dataclass(frozen=True)
class EtaResult:
    eta: float
    per_frame: np.ndarray  # distances for the frames that were comparable
    skipped_frames: int = 0  # frames where exactly one map had zero mass


def _shift(u: np.ndarray, tau: int) -> np.ndarray:
    """``out[i] = u[i + tau]`` with nulls where the index leaves the array."""
    out = np.full(u.size, np.nan)
    src = np.arange(u.size) + tau
    ok = (src >= 0) & (src < u.size)
    out[ok] = u[src[ok]]
    return out


def reference_on_grid(ref: SampledSignal | np.ndarray, n: int, rate: float = EDR_RATE) -> np.ndarray:
    """Reference values on the grid ``i / rate``; splined when rates differ."""
    if isinstance(ref, SampledSignal):
        if ref.rate == rate and ref.t0 == 0.0:
            v = np.full(n, np.nan)
            m = min(n, len(ref))
            v[:m] = ref.samples[:m]
            return v
        finite = np.isfinite(ref.samples)
        if finite.sum() < 4:
            raise InsufficientDataError("reference has too few samples")
        knots = TimedSeries(ref.times()[finite], ref.samples[finite])
        return spline_interpolate(knots, np.arange(n) / rate)
    v = np.asarray(ref, dtype=float)
    out = np.full(n, np.nan)
    m = min(n, v.size)
    out[:m] = v[:m]
    return out


def gamma_index(
    u: np.ndarray,
    v_ref: SampledSignal | np.ndarray,
    eval_seconds: float = EVAL_SECONDS,
    max_lag: int = MAX_LAG,
    rate: float = EDR_RATE,
) -> GammaResult:
    """Best lagged agreement over the leading evaluation window.

    The window starts at the first non-null sample of ``u`` and spans
    ``eval_seconds``.  For every integer lag the estimate is shifted, null
    pairs are dropped, and the Pearson correlation is taken; the index is 100
    times the largest absolute correlation.  Ties prefer the smallest |lag|,
    then the negative one.  Lags with fewer than two overlapping samples (or
    zero variance) are excluded; excluding every lag is an error.
    """
    if max_lag < 0:
        raise ValueError("max_lag must be non-negative")
    u = np.asarray(u, dtype=float)
    v = reference_on_grid(v_ref, u.size, rate)
    finite_u = np.flatnonzero(~np.isnan(u))
    if finite_u.size == 0:
        raise DegenerateDataError("estimate is entirely null")
    start = int(finite_u[0])
    end = min(start + int(round(eval_seconds * rate)), u.size)
    if end - start < 2:
        raise InsufficientDataError("evaluation window too short")
    vv = v[start:end]

    lags = np.arange(-max_lag, max_lag + 1)
    rhos = np.full(lags.size, np.nan)
    for t, tau in enumerate(lags):
        uu = _shift(u, int(tau))[start:end]
        try:
            rhos[t] = pearson(uu, vv)
        except (InsufficientDataError, DegenerateDataError):
            continue
    if np.isnan(rhos).all():
        raise DegenerateDataError("no evaluable lag: estimate and reference never overlap")

    # scan lags by increasing |tau| with the negative lag first, so the
    # first strict maximum implements the tie-break
    order = sorted(range(lags.size), key=lambda t: (abs(int(lags[t])), int(lags[t])))
    best_t = None
    best = -np.inf
    for t in order:
        if not np.isnan(rhos[t]) and abs(rhos[t]) > best:
            best = abs(rhos[t])
            best_t = t
    return GammaResult(100.0 * best, int(lags[best_t]), lags, rhos)


def _gauss_windows(params: DsSstParams, rate: float) -> tuple[np.ndarray, np.ndarray]:
    """Analysis window and its time derivative (per second).

    The window is ``exp(-pi * (u / bandwidth)**2)`` over the normalized
    position u = (m - window/2) / window, i.e. a Gaussian with standard
    deviation ``bandwidth * window / sqrt(2*pi)`` samples.
    """
    L = params.window
    half = L // 2
    m = np.arange(L, dtype=float)
    sigma = params.gaussian_bandwidth * L / np.sqrt(2.0 * np.pi)
    g = np.exp(-0.5 * ((m - half) / sigma) ** 2)
    dg = -((m - half) / sigma**2) * g * rate
    return g, dg


def dsSST(x: np.ndarray, params: DsSstParams | None = None, rate: float = EDR_RATE) -> Tfr:
    """De-shaped synchrosqueezed STFT of a uniformly sampled sequence.

    Per frame: Gaussian-window STFT, magnitude compressed by a small power,
    inverse DFT of that compressed spectrum (a cepstrum), mask at each
    frequency from the cepstrum at the reciprocal quefrency (negatives
    clipped), mask times magnitude, then reassignment of the masked energy to
    the nearest bin of the estimated instantaneous frequency.  Bins whose raw
    magnitude sits below a small fraction of the frame maximum are left out
    of the reassignment entirely.
    """
    params = params or DsSstParams()
    x = np.asarray(x, dtype=float)
    if not np.isfinite(x).all():
        raise ValueError("input must be free of nulls; trim them first")
    L = params.window
    if x.size < L:
        raise InsufficientDataError("signal shorter than the analysis window")
    nfft = params.dft_points
    nbins = nfft // 2 + 1
    half = L // 2

    g, dg = _gauss_windows(params, rate)

    padded = np.concatenate([np.zeros(half), x, np.zeros(L - 1 - half)])
    frames = np.lib.stride_tricks.sliding_window_view(padded, L)[:: params.hop]
    n_frames = frames.shape[0]

    spec = np.fft.rfft(frames * g, n=nfft, axis=1)
    dspec = np.fft.rfft(frames * dg, n=nfft, axis=1)
    mag = np.abs(spec)

    # cepstrum of the power-compressed magnitude (symmetric extension implied)
    softlog = mag ** params.soft_log_power
    ceps = np.fft.irfft(softlog, n=nfft, axis=1)

    # mask bin k by the cepstrum at quefrency nfft / k (linear interpolation)
    mask = np.zeros_like(mag)
    k = np.arange(1, nbins)
    quef = nfft / k
    ok = quef <= nfft - 1
    i0 = np.floor(quef[ok]).astype(int)
    i1 = np.minimum(i0 + 1, nfft - 1)
    frac = quef[ok] - i0
    interp = ceps[:, i0] * (1.0 - frac) + ceps[:, i1] * frac
    mask[:, 1:][:, ok] = np.clip(interp, 0.0, None)
    deshaped = mag * mask

    freqs = np.arange(nbins) * rate / nfft
    dfreq = rate / nfft
    power = mag**2
    with np.errstate(invalid="ignore", divide="ignore"):
        inst = freqs[None, :] - (dspec * spec.conj()).imag / (2.0 * np.pi * power)

    frame_max = mag.max(axis=1, keepdims=True)
    reassignable = mag > STFT_FLOOR * frame_max
    target = np.full(mag.shape, -1, dtype=np.int64)
    with np.errstate(invalid="ignore"):
        np.rint(inst / dfreq, out=inst)
        good = reassignable & np.isfinite(inst) & (inst >= 0) & (inst <= nbins - 1)
    target[good] = inst[good].astype(np.int64)

    frame_idx = np.broadcast_to(np.arange(n_frames)[:, None], mag.shape)
    flat = target[good] * n_frames + frame_idx[good]
    out = np.bincount(flat, weights=deshaped[good], minlength=nbins * n_frames)
    matrix = out.reshape(nbins, n_frames)

    time_axis = np.arange(n_frames) * params.hop / rate
    return Tfr(matrix, freqs, time_axis)


def plain_spectrogram(x: np.ndarray, params: DsSstParams | None = None, rate: float = EDR_RATE) -> Tfr:
    """Magnitude STFT with the same framing as ``dsSST``, for comparisons."""
    params = params or DsSstParams()
    x = np.asarray(x, dtype=float)
    if not np.isfinite(x).all():
        raise ValueError("input must be free of nulls; trim them first")
    L = params.window
    if x.size < L:
        raise InsufficientDataError("signal shorter than the analysis window")
    nfft = params.dft_points
    nbins = nfft // 2 + 1
    half = L // 2
    g, _ = _gauss_windows(params, rate)
    padded = np.concatenate([np.zeros(half), x, np.zeros(L - 1 - half)])
    frames = np.lib.stride_tricks.sliding_window_view(padded, L)[:: params.hop]
    mag = np.abs(np.fft.rfft(frames * g, n=nfft, axis=1))
    freqs = np.arange(nbins) * rate / nfft
    time_axis = np.arange(frames.shape[0]) * params.hop / rate
    return Tfr(mag.T, freqs, time_axis)


def wasserstein1(p: np.ndarray, q: np.ndarray, bin_width: float = 1.0) -> float:
    """1-Wasserstein distance between two nonnegative histograms.

    Both are normalized to unit mass first; the distance is the bin width
    times the summed absolute difference of the cumulative sums.  Two empty
    histograms are at distance zero; one empty histogram against mass is
    undefined.
    """
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    if p.shape != q.shape or p.ndim != 1:
        raise ValueError("histograms must be one-dimensional and equally long")
    if (p < 0).any() or (q < 0).any():
        raise ValueError("histograms must be nonnegative")
    sp = float(p.sum())
    sq = float(q.sum())
    if sp == 0.0 and sq == 0.0:
        return 0.0
    if sp == 0.0 or sq == 0.0:
        raise DegenerateDataError("zero-mass histogram compared against positive mass")
    return float(bin_width * np.abs(np.cumsum(p / sp) - np.cumsum(q / sq)).sum())


def eta_index(
    u: np.ndarray,
    v_ref: SampledSignal | np.ndarray,
    tau_star: int = 0,
    params: DsSstParams | None = None,
    rate: float = EDR_RATE,
) -> EtaResult:
    """Mean per-frame transport distance between the two time-frequency maps.

    The estimate is shifted by the lag the correlation index selected, both
    signals are restricted to their largest common non-null run, each gets a
    de-shaped synchrosqueezed transform, and each frame contributes the
    1-Wasserstein distance between the unit-mass normalized columns.  Frames
    where exactly one of the maps carries no mass (the cepstral mask can zero
    out a column) have no defined distance; they are left out of the mean and
    counted in ``skipped_frames``.  Two empty columns agree at distance zero.
    """
    params = params or DsSstParams()
    u = np.asarray(u, dtype=float)
    v = reference_on_grid(v_ref, u.size, rate)
    us = _shift(u, tau_star)
    both = np.isfinite(us) & np.isfinite(v)
    a, b = _longest_run(both)
    if b - a < params.window:
        raise InsufficientDataError("common non-null span shorter than the analysis window")
    tu = dsSST(us[a:b], params, rate)
    tv = dsSST(v[a:b], params, rate)
    dfreq = rate / params.dft_points
    per_frame, skipped = _column_w1(tu.matrix, tv.matrix, dfreq)
    return EtaResult(float(per_frame.mean()), per_frame, skipped)


def _longest_run(mask: np.ndarray) -> tuple[int, int]:
    """Bounds [a, b) of the longest True run."""
    best = (0, 0)
    start = None
    for i, v in enumerate(mask):
        if v and start is None:
            start = i
        elif not v and start is not None:
            if i - start > best[1] - best[0]:
                best = (start, i)
            start = None
    if start is not None and mask.size - start > best[1] - best[0]:
        best = (start, mask.size)
    return best


def _column_w1(a: np.ndarray, b: np.ndarray, bin_width: float) -> tuple[np.ndarray, int]:
    """Per-column 1-Wasserstein between two nonnegative matrices.

    Columns where exactly one matrix has zero mass are dropped; the return
    value is (distances for the kept columns, number dropped).  Dropping
    every column is an error.
    """
    sa = a.sum(axis=0)
    sb = b.sum(axis=0)
    one_sided = (sa == 0) != (sb == 0)
    keep = ~one_sided
    if not keep.any():
        raise DegenerateDataError("every frame pairs zero mass against positive mass")
    sa = np.where(sa == 0, 1.0, sa)[keep]
    sb = np.where(sb == 0, 1.0, sb)[keep]
    diff = np.cumsum(a[:, keep] / sa, axis=0) - np.cumsum(b[:, keep] / sb, axis=0)
    return bin_width * np.abs(diff).sum(axis=0), int(one_sided.sum())
