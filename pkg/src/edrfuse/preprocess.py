"""ECG conditioning and beat segmentation.

Raw leads are upsampled to 1 kHz, low-pass filtered with a zero-phase
Butterworth, and detrended with a running-median baseline.  R peaks are
detected per lead (two detector variants exist so a single lead can be
cross-checked against itself), beats are paired across detectors or leads,
S troughs are located, and a fixed window around every R peak is stacked
into a per-lead beat matrix.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.ndimage import median_filter, uniform_filter1d
from scipy.signal import butter, filtfilt, find_peaks

from .signalcore import (
    DegenerateDataError,
    InsufficientDataError,
    SampledSignal,
    resample,
)

ECG_RATE = 1000.0  # internal processing rate, Hz
QRS_LEFT = 30      # samples kept left of each R peak
QRS_RIGHT = 60     # samples kept right of each R peak
QRS_WIDTH = QRS_LEFT + QRS_RIGHT + 1
S_SEARCH = 60      # S trough search range after R, samples
REFRACTORY = 250   # minimum spacing between detections, samples
MATCH_TOLERANCE = 150  # beat pairing tolerance, samples

MIN_USABLE_BEATS = 10


@dataclass(frozen=True)
class EcgRecord:
    """Conditioned leads, all at the internal rate and equally long."""

    leads: tuple[SampledSignal, ...]

    def __post_init__(self):
        if not 1 <= len(self.leads) <= 2:
            raise ValueError("record must hold one or two leads")
        n = len(self.leads[0])
        if any(len(lead) != n for lead in self.leads):
            raise ValueError("leads must be equally long")
        object.__setattr__(self, "leads", tuple(self.leads))

    @property
    def n_leads(self) -> int:
        return len(self.leads)

    @property
    def duration(self) -> float:
        return self.leads[0].duration


@dataclass(frozen=True)
class BeatSet:
    """Matched fiducials: one R and one S index sequence per lead, aligned by beat."""

    r_peaks: tuple[np.ndarray, ...]
    s_peaks: tuple[np.ndarray, ...]

    def __post_init__(self):
        r = tuple(np.asarray(a, dtype=np.intp) for a in self.r_peaks)
        s = tuple(np.asarray(a, dtype=np.intp) for a in self.s_peaks)
        if len(r) != len(s):
            raise ValueError("need one S sequence per R sequence")
        n = r[0].size
        for rk, sk in zip(r, s):
            if rk.size != n or sk.size != n:
                raise ValueError("per-lead beat sequences must be aligned")
            if np.any(sk <= rk) or np.any(sk > rk + S_SEARCH):
                raise ValueError("each S index must lie in (r, r + %d]" % S_SEARCH)
        object.__setattr__(self, "r_peaks", r)
        object.__setattr__(self, "s_peaks", s)

    @property
    def n_beats(self) -> int:
        return self.r_peaks[0].size


@dataclass(frozen=True)
class QrsMatrix:
    """Beat-window matrix: row i holds lead samples ``r_i - 30 .. r_i + 60``."""

    values: np.ndarray
    lead: str
    r_peaks: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.ndim != 2 or values.shape[1] != QRS_WIDTH:
            raise ValueError("beat matrix must have %d columns" % QRS_WIDTH)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "r_peaks", np.asarray(self.r_peaks, dtype=np.intp))

    @property
    def n_beats(self) -> int:
        return self.values.shape[0]

    def beat_times(self) -> np.ndarray:
        return self.r_peaks / ECG_RATE


def lowpass_zero_phase(signal: SampledSignal, cutoff: float = 40.0, order: int = 3) -> SampledSignal:
    """Forward-backward Butterworth low-pass (doubled attenuation, zero lag)."""
    nyq = signal.rate / 2.0
    if not 0 < cutoff < nyq:
        raise ValueError("cutoff must lie strictly between 0 and the Nyquist rate")
    if len(signal) < 12 * order:
        raise InsufficientDataError("insufficient samples for zero-phase filtering")
    b, a = butter(order, cutoff, btype="low", fs=signal.rate)
    out = filtfilt(b, a, signal.samples)
    return SampledSignal(out, signal.rate, signal.t0)


def remove_baseline(signal: SampledSignal, window_ms: float = 200.0) -> SampledSignal:
    """Subtract a running median whose windows truncate at the record edges."""
    w = int(round(window_ms * signal.rate / 1000.0))
    w = max(w | 1, 3)  # odd window of at least 3 samples
    x = signal.samples
    if x.size < 2:
        raise InsufficientDataError("insufficient samples for baseline removal")
    return SampledSignal(x - _running_median(x, w), signal.rate, signal.t0)


def _running_median(x: np.ndarray, window: int) -> np.ndarray:
    n = x.size
    hw = window // 2
    if n <= window:
        return np.array([np.median(x[max(0, i - hw): min(n, i + hw + 1)]) for i in range(n)])
    base = median_filter(x, size=window, mode="nearest")
    # interior windows are complete; redo the edge medians with truncated windows
    for i in range(hw):
        base[i] = np.median(x[: i + hw + 1])
        base[n - 1 - i] = np.median(x[n - 1 - i - hw:])
    return base


def detect_r_peaks(signal: SampledSignal, variant: str = "a") -> np.ndarray:
    """Locate R peaks on a conditioned 1 kHz lead.

    Both variants share the classic energy chain (5-15 Hz band-pass,
    derivative, squaring, moving-window integration) and refine each accepted
    fiducial to the local maximum of the lead itself.  Variant "a" uses a
    150 ms integration window with an adaptive signal/noise threshold;
    variant "b" uses a 250 ms window with a fixed percentile threshold, which
    makes the two usefully independent on the same lead.
    """
    if variant not in ("a", "b"):
        raise ValueError("variant must be 'a' or 'b'")
    if signal.rate != ECG_RATE:
        raise ValueError("detector expects the internal %g Hz rate" % ECG_RATE)
    x = signal.samples
    if x.size < 2 * REFRACTORY:
        raise InsufficientDataError("insufficient samples for beat detection")
    if not np.any(x != 0.0):
        return np.empty(0, dtype=np.intp)

    b, a = butter(2, (5.0, 15.0), btype="band", fs=signal.rate)
    band = filtfilt(b, a, x)
    energy = np.gradient(band) ** 2
    size = 150 if variant == "a" else 250
    integ = uniform_filter1d(energy, size=size, mode="nearest")

    cands, _ = find_peaks(integ, distance=REFRACTORY)
    if cands.size == 0:
        return np.empty(0, dtype=np.intp)
    if variant == "a":
        accepted = cands[_adaptive_accept(integ[cands])]
    else:
        thr = 0.25 * np.percentile(integ[cands], 95)
        accepted = cands[integ[cands] >= thr]
    if accepted.size == 0:
        return np.empty(0, dtype=np.intp)

    # snap each fiducial to the R maximum of the lead
    half = 100
    refined = np.empty(accepted.size, dtype=np.intp)
    for k, c in enumerate(accepted):
        s0 = max(0, c - half)
        s1 = min(x.size, c + half + 1)
        refined[k] = s0 + int(np.argmax(x[s0:s1]))
    refined = np.unique(refined)

    # enforce the refractory spacing, keeping the taller of two close peaks
    out: list[int] = []
    for r in refined:
        if out and r - out[-1] < REFRACTORY:
            if x[r] > x[out[-1]]:
                out[-1] = int(r)
        else:
            out.append(int(r))
    return np.asarray(out, dtype=np.intp)


def _adaptive_accept(peak_values: np.ndarray) -> np.ndarray:
    """Running signal/noise level threshold over candidate peak heights."""
    spk = float(np.max(peak_values[: min(8, peak_values.size)]))
    npk = float(np.median(peak_values[: min(8, peak_values.size)]) * 0.1)
    keep = np.zeros(peak_values.size, dtype=bool)
    for i, v in enumerate(peak_values):
        thr = npk + 0.25 * (spk - npk)
        if v > thr:
            keep[i] = True
            spk = 0.125 * v + 0.875 * spk
        else:
            npk = 0.125 * v + 0.875 * npk
    return keep


def match_beats(
    peaks1: np.ndarray, peaks2: np.ndarray, tolerance: int = MATCH_TOLERANCE
) -> tuple[np.ndarray, np.ndarray]:
    """Greedy order-preserving pairing of two detection sequences.

    Walks both sequences in time, pairing detections within ``tolerance``
    samples and preferring the nearer neighbour when several qualify.
    Unpaired detections on either side are discarded.  Returns equally long
    index arrays, one per input.
    """
    a = np.asarray(peaks1, dtype=np.int64)
    b = np.asarray(peaks2, dtype=np.int64)
    for seq in (a, b):
        if seq.size > 1 and not np.all(np.diff(seq) > 0):
            raise ValueError("peak sequences must be strictly increasing")
    m1: list[int] = []
    m2: list[int] = []
    i = j = 0
    while i < a.size and j < b.size:
        d = b[j] - a[i]
        if d > tolerance:
            i += 1
        elif d < -tolerance:
            j += 1
        elif j + 1 < b.size and abs(b[j + 1] - a[i]) < abs(d):
            j += 1
        elif i + 1 < a.size and abs(b[j] - a[i + 1]) < abs(d):
            i += 1
        else:
            m1.append(int(a[i]))
            m2.append(int(b[j]))
            i += 1
            j += 1
    return np.asarray(m1, dtype=np.intp), np.asarray(m2, dtype=np.intp)


def locate_s_peaks(lead: SampledSignal, r_peaks: np.ndarray) -> np.ndarray:
    """S trough per beat: argmin of the lead over ``(r, r + 60]`` samples.

    Beats whose search window would run past the record end are dropped, so
    the result can be shorter than the input.
    """
    x = lead.samples
    r_peaks = np.asarray(r_peaks, dtype=np.intp)
    out = []
    for r in r_peaks:
        if r + S_SEARCH >= x.size:
            continue
        seg = x[r + 1: r + S_SEARCH + 1]
        out.append(r + 1 + int(np.argmin(seg)))
    return np.asarray(out, dtype=np.intp)


def extract_qrs_matrix(lead: SampledSignal, r_peaks: np.ndarray, tag: str) -> QrsMatrix:
    """Stack the ``[-30, +60]`` sample window around each R peak into rows."""
    x = lead.samples
    r_peaks = np.asarray(r_peaks, dtype=np.intp)
    if r_peaks.size == 0:
        raise InsufficientDataError("no usable beats")
    if np.any(r_peaks < QRS_LEFT) or np.any(r_peaks + QRS_RIGHT >= x.size):
        raise ValueError("beat window exceeds the record boundary")
    rows = x[r_peaks[:, None] + np.arange(-QRS_LEFT, QRS_RIGHT + 1)[None, :]]
    return QrsMatrix(rows, tag, r_peaks)


@dataclass(frozen=True)
class PreprocessedEcg:
    """Everything the estimators need: conditioned leads, beats, beat matrices."""

    record: EcgRecord
    beats: BeatSet
    qrs: tuple[QrsMatrix, ...]
    dropped_beats: int


def preprocess_record(raw_leads: list[SampledSignal] | tuple[SampledSignal, ...]) -> PreprocessedEcg:
    """Full conditioning chain from raw leads to matched, windowed beats.

    Two-lead records run detector variant "a" on each lead and pair beats
    across leads; single-lead records run variants "a" and "b" on the same
    lead and keep the beats both agree on.  Beats whose window leaves the
    record on any lead are dropped consistently everywhere.
    """
    if not 1 <= len(raw_leads) <= 2:
        raise ValueError("expected one or two leads")
    leads = []
    for raw in raw_leads:
        s = raw if raw.rate == ECG_RATE else resample(raw, ECG_RATE)
        s = lowpass_zero_phase(s)
        s = remove_baseline(s)
        leads.append(s)
    n = min(len(s) for s in leads)
    leads = [SampledSignal(s.samples[:n], s.rate, s.t0) for s in leads]
    record = EcgRecord(tuple(leads))

    if record.n_leads == 2:
        p1 = detect_r_peaks(record.leads[0], "a")
        p2 = detect_r_peaks(record.leads[1], "a")
        r1, r2 = match_beats(p1, p2)
        r_by_lead = [r1, r2]
    else:
        pa = detect_r_peaks(record.leads[0], "a")
        pb = detect_r_peaks(record.leads[0], "b")
        ra, _ = match_beats(pa, pb)
        r_by_lead = [ra]

    total = r_by_lead[0].size
    keep = np.ones(total, dtype=bool)
    for r in r_by_lead:
        keep &= (r >= QRS_LEFT) & (r + QRS_RIGHT < n)
    r_by_lead = [r[keep] for r in r_by_lead]
    dropped = total - int(keep.sum())
    if r_by_lead[0].size < MIN_USABLE_BEATS:
        raise DegenerateDataError(
            "segment unusable: %d matched beats, need at least %d"
            % (r_by_lead[0].size, MIN_USABLE_BEATS)
        )

    s_by_lead = [locate_s_peaks(lead, r) for lead, r in zip(record.leads, r_by_lead)]
    beats = BeatSet(tuple(r_by_lead), tuple(s_by_lead))
    qrs = tuple(
        extract_qrs_matrix(lead, r, str(k + 1))
        for k, (lead, r) in enumerate(zip(record.leads, r_by_lead))
    )
    return PreprocessedEcg(record, beats, qrs, dropped)
