"""CSV readers and writers for the command-line surface.

All formats carry an explicit ``time_s`` column.  Floats are written with 17
significant digits so a write/read cycle reproduces them bit for bit.  Nulls
appear as empty fields.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np
import pandas as pd

from .signalcore import SampledSignal

MIN_ECG_RATE = 100.0
EDR_RATE = 10.0


class FileFormatError(ValueError):
    """Malformed or inconsistent input file."""


def _fmt(v: float) -> str:
    return "%.17g" % v


def _infer_rate(times: np.ndarray, what: str) -> tuple[float, float]:
    """Sampling rate and origin from a uniform time column."""
    if times.size < 2:
        raise FileFormatError(f"{what}: need at least two samples")
    diffs = np.diff(times)
    dt = float(np.median(diffs))
    if dt <= 0:
        raise FileFormatError(f"{what}: time column must be strictly increasing")
    if np.max(np.abs(diffs - dt)) > 0.01 * dt:
        raise FileFormatError(f"{what}: time column is not uniformly sampled")
    rate = 1.0 / dt
    nearest = round(rate)
    if nearest > 0 and abs(rate - nearest) < 1e-6 * rate:
        rate = float(nearest)
    return rate, float(times[0])


def write_ecg_csv(path: str | Path, leads: list[SampledSignal]) -> None:
    if not 1 <= len(leads) <= 2:
        raise ValueError("expected one or two leads")
    n = len(leads[0])
    if any(len(s) != n or s.rate != leads[0].rate for s in leads):
        raise ValueError("leads must share length and rate")
    times = leads[0].times()
    header = "time_s," + ",".join(f"lead{k + 1}" for k in range(len(leads)))
    cols = [s.samples for s in leads]
    with open(path, "w") as fh:
        fh.write(header + "\n")
        for i in range(n):
            row = [_fmt(times[i])] + [_fmt(c[i]) for c in cols]
            fh.write(",".join(row) + "\n")


def read_ecg_csv(path: str | Path) -> list[SampledSignal]:
    """Load ``time_s,lead1[,lead2]``; the rate is inferred and must be >= 100 Hz."""
    path = Path(path)
    try:
        frame = pd.read_csv(path, float_precision="round_trip")
    except Exception as exc:
        raise FileFormatError(f"{path}: {exc}") from exc
    cols = list(frame.columns)
    if cols[:2] != ["time_s", "lead1"] or cols not in (
        ["time_s", "lead1"],
        ["time_s", "lead1", "lead2"],
    ):
        raise FileFormatError(f"{path}: expected columns time_s,lead1[,lead2], got {cols}")
    times = frame["time_s"].to_numpy(dtype=float)
    rate, t0 = _infer_rate(times, str(path))
    if rate < MIN_ECG_RATE:
        raise FileFormatError(f"{path}: sampling rate {rate:g} Hz is below {MIN_ECG_RATE:g} Hz")
    leads = []
    for name in cols[1:]:
        values = frame[name].to_numpy(dtype=float)
        if not np.isfinite(values).all():
            raise FileFormatError(f"{path}: column {name} contains missing or non-finite values")
        leads.append(SampledSignal(values, rate, t0))
    return leads


def write_series_csv(path: str | Path, times: np.ndarray, values: np.ndarray) -> None:
    """Write ``time_s,value`` rows; NaN values become empty fields."""
    times = np.asarray(times, dtype=float)
    values = np.asarray(values, dtype=float)
    if times.shape != values.shape:
        raise ValueError("times and values must be equally long")
    with open(path, "w") as fh:
        fh.write("time_s,value\n")
        for t, v in zip(times, values):
            fh.write(_fmt(t) + "," + ("" if np.isnan(v) else _fmt(v)) + "\n")


def read_series_csv(path: str | Path) -> tuple[np.ndarray, np.ndarray]:
    """Load ``time_s,value``; empty value fields come back as NaN."""
    path = Path(path)
    try:
        frame = pd.read_csv(path, float_precision="round_trip")
    except Exception as exc:
        raise FileFormatError(f"{path}: {exc}") from exc
    if list(frame.columns) != ["time_s", "value"]:
        raise FileFormatError(f"{path}: expected columns time_s,value, got {list(frame.columns)}")
    times = frame["time_s"].to_numpy(dtype=float)
    values = frame["value"].to_numpy(dtype=float)
    if times.size and not np.all(np.diff(times) > 0):
        raise FileFormatError(f"{path}: time column must be strictly increasing")
    return times, values


def read_reference_csv(path: str | Path) -> SampledSignal:
    """A reference series must be uniformly sampled and free of nulls."""
    times, values = read_series_csv(path)
    rate, t0 = _infer_rate(times, str(path))
    if not np.isfinite(values).all():
        raise FileFormatError(f"{path}: reference signal contains missing values")
    return SampledSignal(values, rate, t0)


def read_edr_csv(path: str | Path) -> np.ndarray:
    """Load a derived respiratory series on the 10 Hz grid starting at t = 0."""
    times, values = read_series_csv(path)
    rate, t0 = _infer_rate(times, str(path))
    if abs(rate - EDR_RATE) > 1e-6 or abs(t0) > 1e-9:
        raise FileFormatError(f"{path}: expected a {EDR_RATE:g} Hz series starting at t=0")
    return values
