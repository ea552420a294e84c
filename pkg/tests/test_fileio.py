"""CSV formats: exact float round trips, rate inference, malformed inputs."""

import numpy as np
import pytest

from edrfuse.fileio import (
    FileFormatError,
    read_ecg_csv,
    read_edr_csv,
    read_reference_csv,
    read_series_csv,
    write_ecg_csv,
    write_series_csv,
)
from edrfuse.signalcore import SampledSignal


def _random_signal(rng, n=500, rate=1000.0):
    return SampledSignal(rng.standard_normal(n), rate)


# ------------------------------------------------------------------ ecg csv

def test_ecg_round_trip_two_leads(tmp_path):
    rng = np.random.default_rng(0)
    leads = [_random_signal(rng), _random_signal(rng)]
    path = tmp_path / "ecg.csv"
    write_ecg_csv(path, leads)
    back = read_ecg_csv(path)
    assert len(back) == 2
    for a, b in zip(back, leads):
        assert a.rate == 1000.0
        np.testing.assert_array_equal(a.samples, b.samples)


def test_ecg_round_trip_one_lead(tmp_path):
    rng = np.random.default_rng(1)
    path = tmp_path / "ecg.csv"
    write_ecg_csv(path, [_random_signal(rng, rate=250.0)])
    back = read_ecg_csv(path)
    assert len(back) == 1
    assert back[0].rate == 250.0


def test_ecg_write_validation(tmp_path):
    rng = np.random.default_rng(2)
    with pytest.raises(ValueError, match="one or two"):
        write_ecg_csv(tmp_path / "x.csv", [])
    with pytest.raises(ValueError, match="length and rate"):
        write_ecg_csv(
            tmp_path / "x.csv", [_random_signal(rng, 500), _random_signal(rng, 400)]
        )


def test_ecg_rejects_low_rate(tmp_path):
    rng = np.random.default_rng(3)
    path = tmp_path / "slow.csv"
    write_ecg_csv(path, [_random_signal(rng, n=200, rate=50.0)])
    with pytest.raises(FileFormatError, match="below"):
        read_ecg_csv(path)


def test_ecg_rejects_wrong_columns(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("time_s,channel\n0,1\n0.001,2\n")
    with pytest.raises(FileFormatError, match="expected columns"):
        read_ecg_csv(path)
    path.write_text("time_s,lead1,lead2,lead3\n0,1,1,1\n0.001,2,2,2\n")
    with pytest.raises(FileFormatError, match="expected columns"):
        read_ecg_csv(path)


def test_ecg_rejects_non_uniform_times(tmp_path):
    path = tmp_path / "jitter.csv"
    path.write_text("time_s,lead1\n0,1\n0.001,2\n0.0025,3\n0.003,4\n")
    with pytest.raises(FileFormatError, match="uniform"):
        read_ecg_csv(path)


def test_ecg_rejects_missing_values(tmp_path):
    path = tmp_path / "holes.csv"
    rows = "\n".join("%g,1.0" % (i / 1000.0) for i in range(10))
    path.write_text("time_s,lead1\n" + rows.replace("0.005,1.0", "0.005,") + "\n")
    with pytest.raises(FileFormatError, match="missing"):
        read_ecg_csv(path)


def test_ecg_missing_file(tmp_path):
    with pytest.raises(FileFormatError):
        read_ecg_csv(tmp_path / "absent.csv")


# --------------------------------------------------------------- series csv

def test_series_round_trip_with_nans(tmp_path):
    times = np.arange(20) / 10.0
    values = np.sin(times)
    values[[0, 7, 19]] = np.nan
    path = tmp_path / "series.csv"
    write_series_csv(path, times, values)
    t2, v2 = read_series_csv(path)
    np.testing.assert_array_equal(t2, times)
    np.testing.assert_array_equal(v2, values)
    assert np.isnan(v2[[0, 7, 19]]).all()


def test_series_write_shape_mismatch(tmp_path):
    with pytest.raises(ValueError):
        write_series_csv(tmp_path / "x.csv", np.arange(3.0), np.arange(4.0))


def test_series_rejects_non_increasing_times(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("time_s,value\n0,1\n0.2,2\n0.1,3\n")
    with pytest.raises(FileFormatError, match="increasing"):
        read_series_csv(path)


def test_series_empty_body(tmp_path):
    path = tmp_path / "empty.csv"
    path.write_text("time_s,value\n")
    times, values = read_series_csv(path)
    assert times.size == 0 and values.size == 0


# ------------------------------------------------------------ reference csv

def test_reference_infers_rate_and_origin(tmp_path):
    times = 2.0 + np.arange(50) / 25.0
    values = np.cos(times)
    path = tmp_path / "ref.csv"
    write_series_csv(path, times, values)
    sig = read_reference_csv(path)
    assert sig.rate == 25.0
    assert sig.t0 == 2.0
    np.testing.assert_array_equal(sig.samples, values)


def test_reference_rejects_missing_values(tmp_path):
    times = np.arange(30) / 10.0
    values = np.ones(30)
    values[4] = np.nan
    path = tmp_path / "ref.csv"
    write_series_csv(path, times, values)
    with pytest.raises(FileFormatError, match="missing"):
        read_reference_csv(path)


def test_reference_needs_two_samples(tmp_path):
    path = tmp_path / "ref.csv"
    path.write_text("time_s,value\n0,1\n")
    with pytest.raises(FileFormatError, match="two samples"):
        read_reference_csv(path)


# ------------------------------------------------------------------ edr csv

def test_edr_round_trip_on_grid(tmp_path):
    values = np.sin(np.arange(40) / 10.0)
    values[:9] = np.nan
    path = tmp_path / "edr.csv"
    write_series_csv(path, np.arange(40) / 10.0, values)
    back = read_edr_csv(path)
    np.testing.assert_array_equal(back, values)


def test_edr_rejects_wrong_rate(tmp_path):
    path = tmp_path / "edr.csv"
    write_series_csv(path, np.arange(40) / 25.0, np.ones(40))
    with pytest.raises(FileFormatError, match="10 Hz"):
        read_edr_csv(path)


def test_edr_rejects_shifted_origin(tmp_path):
    path = tmp_path / "edr.csv"
    write_series_csv(path, 0.5 + np.arange(40) / 10.0, np.ones(40))
    with pytest.raises(FileFormatError, match="t=0"):
        read_edr_csv(path)
