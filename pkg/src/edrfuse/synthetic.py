"""Synthetic ECG with a known respiratory modulation.

Each lead is a train of fixed-shape QRS complexes whose amplitudes ride on a
respiratory envelope, optionally plus baseline wander and white noise.  The
generator records the envelope, the beat instants, and the S offsets, so the
whole pipeline can be scored against exact ground truth.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .signalcore import SampledSignal

ECG_FS = 1000.0      # generation rate, Hz
RESP_FS = 10.0       # ground-truth respiration export rate, Hz
LEAD2_SCALE = 0.8    # template scale of the second lead
S_OFFSET = 0.035     # S trough position after R, seconds

HEART_RATE_RANGE = (0.7, 2.0)   # Hz
RESP_RATE_RANGE = (0.1, 0.5)    # Hz

Profile = float | tuple[float, float]


@dataclass(frozen=True)
class SyntheticSpec:
    """Generation parameters; rate profiles are a constant or a (start, end) ramp."""

    duration: float = 300.0
    heart_rate: Profile = 1.2
    resp_rate: Profile = 0.25
    modulation_depth: float = 0.1
    lead_phase_offsets: tuple[float, ...] = (0.0, 0.9)
    noise_snr: float | None = None
    baseline_wander: tuple[float, float] | None = None
    seed: int = 0

    def validate(self) -> None:
        if not self.duration > 0:
            raise ValueError("duration must be positive")
        if not 1 <= len(self.lead_phase_offsets) <= 2:
            raise ValueError("lead_phase_offsets must list one or two leads")
        if not 0 < self.modulation_depth < 1:
            raise ValueError("modulation_depth must lie in (0, 1)")
        for name, prof, (lo, hi) in (
            ("heart_rate", self.heart_rate, HEART_RATE_RANGE),
            ("resp_rate", self.resp_rate, RESP_RATE_RANGE),
        ):
            for v in _profile_endpoints(prof):
                if not lo <= v <= hi:
                    raise ValueError(f"{name} must stay within [{lo}, {hi}] Hz, got {v}")
        if self.baseline_wander is not None:
            amp, freq = self.baseline_wander
            if amp < 0 or freq <= 0:
                raise ValueError("baseline_wander needs amplitude >= 0 and frequency > 0")


@dataclass(frozen=True)
class SyntheticRecord:
    """Generated leads plus the ground truth they were built from."""

    spec: SyntheticSpec
    leads: tuple[SampledSignal, ...]
    true_respiration: SampledSignal
    true_r_times: np.ndarray
    true_s_offsets: np.ndarray


def _profile_endpoints(profile: Profile) -> tuple[float, ...]:
    if isinstance(profile, (tuple, list)):
        if len(profile) != 2:
            raise ValueError("rate ramp must be a (start, end) pair")
        return (float(profile[0]), float(profile[1]))
    return (float(profile),)


def _phase(profile: Profile, t: np.ndarray, duration: float) -> np.ndarray:
    """Integral of an instantaneous rate profile, in cycles."""
    ends = _profile_endpoints(profile)
    if len(ends) == 1:
        return ends[0] * t
    r0, r1 = ends
    return r0 * t + (r1 - r0) * t * t / (2.0 * duration)


def _beat_times(profile: Profile, duration: float, first_phase: float = 0.6) -> np.ndarray:
    """Instants where the cardiac phase crosses successive integers."""
    ends = _profile_endpoints(profile)
    total = _phase(profile, np.array([duration]), duration)[0]
    targets = first_phase + np.arange(int(np.floor(total - first_phase)) + 1)
    if len(ends) == 1:
        times = targets / ends[0]
    else:
        r0, r1 = ends
        a = (r1 - r0) / (2.0 * duration)
        if a == 0:
            times = targets / r0
        else:
            # invert r0*t + a*t^2 = c on the increasing branch
            times = (-r0 + np.sqrt(r0 * r0 + 4.0 * a * targets)) / (2.0 * a)
    lo = 0.04
    hi = duration - 0.08
    return times[(times >= lo) & (times <= hi)]


def _bump(dt: np.ndarray, center: float, half_width: float) -> np.ndarray:
    u = (dt - center) / half_width
    out = np.zeros_like(dt)
    inside = np.abs(u) <= 1.0
    out[inside] = 0.5 * (1.0 + np.cos(np.pi * u[inside]))
    return out


def qrs_template(dt: np.ndarray) -> np.ndarray:
    """Raised-cosine QRS: Q dip -0.1, R peak 1.0 at 0, S dip -0.3 at +35 ms.

    Support is exactly [-30, +60] ms, so a complex fits the beat window the
    preprocessing stage extracts.
    """
    dt = np.asarray(dt, dtype=float)
    return (
        -0.1 * _bump(dt, -0.020, 0.010)
        + 1.0 * _bump(dt, 0.0, 0.010)
        - 0.3 * _bump(dt, S_OFFSET, 0.025)
    )


def generate(spec: SyntheticSpec) -> SyntheticRecord:
    """Build a deterministic record for ``spec`` (one rng, seeded once)."""
    spec.validate()
    rng = np.random.default_rng(spec.seed)
    n = int(round(spec.duration * ECG_FS))
    t = np.arange(n) / ECG_FS

    resp_phase = _phase(spec.resp_rate, t, spec.duration)
    m_raw = np.sin(2.0 * np.pi * resp_phase)
    mu, sd = float(m_raw.mean()), float(m_raw.std())
    beat_times = _beat_times(spec.heart_rate, spec.duration)
    beat_phase = _phase(spec.resp_rate, beat_times, spec.duration)
    m_beats = (np.sin(2.0 * np.pi * beat_phase) - mu) / sd

    half_support = 0.06
    window = np.arange(-int(0.03 * ECG_FS), int(half_support * ECG_FS) + 1)
    leads = []
    for k, phase_offset in enumerate(spec.lead_phase_offsets):
        scale = 1.0 if k == 0 else LEAD2_SCALE
        amps = 1.0 + spec.modulation_depth * m_beats * np.cos(phase_offset)
        x = np.zeros(n)
        for bt, amp in zip(beat_times, amps):
            center = int(round(bt * ECG_FS))
            idx = center + window
            ok = (idx >= 0) & (idx < n)
            x[idx[ok]] += amp * scale * qrs_template(idx[ok] / ECG_FS - bt)
        leads.append(x)

    if spec.baseline_wander is not None:
        amp, freq = spec.baseline_wander
        for k in range(len(leads)):
            wander_phase = rng.uniform(0.0, 2.0 * np.pi)
            leads[k] = leads[k] + amp * np.sin(2.0 * np.pi * freq * t + wander_phase)

    if spec.noise_snr is not None:
        for k in range(len(leads)):
            clean_power = float(np.mean(leads[k] ** 2))
            noise_power = clean_power / (10.0 ** (spec.noise_snr / 10.0))
            leads[k] = leads[k] + rng.normal(0.0, np.sqrt(noise_power), size=n)

    n_resp = int(np.floor(spec.duration * RESP_FS))
    t_resp = np.arange(n_resp) / RESP_FS
    resp = np.sin(2.0 * np.pi * _phase(spec.resp_rate, t_resp, spec.duration))
    resp = (resp - resp.mean()) / resp.std()

    return SyntheticRecord(
        spec=spec,
        leads=tuple(SampledSignal(x, ECG_FS) for x in leads),
        true_respiration=SampledSignal(resp, RESP_FS),
        true_r_times=beat_times,
        true_s_offsets=np.full(beat_times.size, S_OFFSET),
    )


def export_record(record: SyntheticRecord, out_dir: str | Path) -> dict[str, Path]:
    """Write the record in the CLI file formats; float text round-trips exactly."""
    from .fileio import write_ecg_csv, write_series_csv

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = {
        "ecg": out / "ecg.csv",
        "respiration": out / "respiration.csv",
        "beats": out / "beats.csv",
    }
    write_ecg_csv(paths["ecg"], list(record.leads))
    resp = record.true_respiration
    write_series_csv(paths["respiration"], resp.times(), resp.samples)
    with open(paths["beats"], "w") as fh:
        fh.write("r_time_s,s_offset_s\n")
        for rt, so in zip(record.true_r_times, record.true_s_offsets):
            fh.write("%.17g,%.17g\n" % (rt, so))
    return paths
