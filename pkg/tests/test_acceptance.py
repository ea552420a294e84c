"""Release gate: one check per acceptance criterion, each printing PASS/FAIL.

Every test ends with a single ``criterion N: PASS/FAIL`` line carrying the
measured numbers, then asserts.  Runtime bounds are part of the criteria and
are asserted alongside the numeric tolerances.
"""

import contextlib
import io
import json
import time

import numpy as np
from numpy.random import default_rng

from edrfuse.cli import main, run_pipeline
from edrfuse.ensemble import EstimatePool, fuse, lag_embed
from edrfuse.estimators import (
    _top_hermitian_magnitude,
    _top_real_part,
    _top_symmetric,
    build_kernels,
    compute_estimates,
)
from edrfuse.evaluation import (
    EDR_RATE,
    DsSstParams,
    dsSST,
    eta_index,
    gamma_index,
    plain_spectrogram,
    wasserstein1,
)
from edrfuse.preprocess import QrsMatrix, lowpass_zero_phase, preprocess_record
from edrfuse.signalcore import SampledSignal
from edrfuse.synthetic import SyntheticSpec, generate


def _emit(n: int, ok: bool, detail: str) -> None:
    print(f"criterion {n}: {'PASS' if ok else 'FAIL'} — {detail}")
    assert ok, detail


def test_criterion_1_pool_cardinality():
    rec = generate(SyntheticSpec(duration=120.0, heart_rate=(1.1, 1.3), seed=3))
    t0 = time.perf_counter()
    two = compute_estimates(preprocess_record(list(rec.leads)), 5)
    t_two = time.perf_counter() - t0
    t0 = time.perf_counter()
    one = compute_estimates(preprocess_record([rec.leads[0]]), 5)
    t_one = time.perf_counter() - t0
    labels = [e.label for e in two]
    ok = (
        len(two) == 52
        and len(one) == 11
        and len(set(labels)) == 52
        and t_two < 1.0
        and t_one < 1.0
    )
    _emit(1, ok, f"two-lead {len(two)} in {t_two:.2f} s, one-lead {len(one)} in {t_one:.2f} s")


def test_criterion_2_clean_synthetic_recovery():
    t0 = time.perf_counter()
    rec = generate(
        SyntheticSpec(
            duration=300.0,
            heart_rate=(1.1, 1.3),
            resp_rate=0.25,
            modulation_depth=0.10,
            seed=3,
        )
    )
    result = run_pipeline(list(rec.leads))
    ref = rec.true_respiration
    g_ens = gamma_index(result.edr.values, ref).gamma
    by_label = {e.label: e for e in result.estimates}
    singles = {
        label: gamma_index(by_label[label].series10, ref).gamma
        for label in ("trad/1", "pca/1/1", "dm/1/1")
    }
    elapsed = time.perf_counter() - t0
    ok = g_ens >= 95.0 and all(g >= 90.0 for g in singles.values()) and elapsed < 30.0
    parts = ", ".join(f"{k} {v:.2f}" for k, v in singles.items())
    _emit(2, ok, f"ensemble {g_ens:.2f}, {parts}, {elapsed:.1f} s")


def test_criterion_3_ensemble_improvement():
    families = {
        "trad": ("trad/1", "trad/2"),
        "pca": ("pca/1/1", "pca/2/1"),
        "dm": ("dm/1/1", "dm/2/1"),
        "cca": ("cca/1/1", "cca/2/1"),
        "ad": ("ad_re/joint/1", "ad_im/joint/1"),
        "dl": ("dl/joint/1",),
    }
    t0 = time.perf_counter()
    ens_g, ens_e = [], []
    fam_g = {k: [] for k in families}
    fam_e = {k: [] for k in families}
    for sd in range(20):
        rec = generate(
            SyntheticSpec(
                duration=300.0,
                heart_rate=(1.0, 1.4),
                resp_rate=(0.18, 0.35),
                modulation_depth=0.07,
                noise_snr=10.0,
                baseline_wander=(1.0, 0.08),
                seed=sd,
            )
        )
        result = run_pipeline(list(rec.leads))
        ref = rec.true_respiration
        g = gamma_index(result.edr.values, ref)
        ens_g.append(g.gamma)
        ens_e.append(eta_index(result.edr.values, ref, g.tau_star).eta)
        by_label = {e.label: e for e in result.estimates}
        for fam, members in families.items():
            for label in members:
                est = by_label[label]
                if est.degenerate:
                    continue
                mg = gamma_index(est.series10, ref)
                fam_g[fam].append(mg.gamma)
                fam_e[fam].append(eta_index(est.series10, ref, mg.tau_star).eta)
    elapsed = time.perf_counter() - t0
    mg_ens, me_ens = np.median(ens_g), np.median(ens_e)
    fam_mg = {f: np.median(v) for f, v in fam_g.items()}
    fam_me = {f: np.median(v) for f, v in fam_e.items()}
    ok = (
        all(mg_ens >= m for m in fam_mg.values())
        and all(me_ens <= m for m in fam_me.values())
        and elapsed < 600.0
    )
    best_g = max(fam_mg, key=fam_mg.get)
    best_e = min(fam_me, key=fam_me.get)
    _emit(
        3,
        ok,
        f"gamma {mg_ens:.2f} vs best family {best_g} {fam_mg[best_g]:.2f}; "
        f"eta {me_ens:.4f} vs best family {best_e} {fam_me[best_e]:.4f}; {elapsed:.1f} s",
    )


def test_criterion_4_spectral_correctness():
    t0 = time.perf_counter()
    rng = default_rng(17)
    errs = []
    for _ in range(3):
        q1 = QrsMatrix(rng.standard_normal((50, 91)), "1", np.arange(50) * 600 + 100)
        q2 = QrsMatrix(rng.standard_normal((50, 91)), "2", np.arange(50) * 600 + 100)
        k1, k2 = build_kernels(q1), build_kernels(q2)

        row_err = np.abs(k1.markov.sum(axis=1) - 1.0).max()
        sym_err = np.abs(k1.isotropic - k1.isotropic.T).max()
        basis = _top_symmetric(k1.isotropic, 3)
        w = np.sqrt(k1.degree_norm)
        w /= np.linalg.norm(w)
        v0 = basis.eigenvectors[:, 0]
        if v0 @ w < 0:
            v0 = -v0
        eig_err = max(abs(basis.eigenvalues[0] - 1.0), np.abs(v0 - w).max())

        cross = k1.markov @ k2.markov.T
        anti = 0.5 * (cross - cross.T)
        anti_err = np.abs(anti + anti.T).max()
        herm = 1j * anti
        resid = max(
            basis.residuals(k1.isotropic).max(),
            _top_hermitian_magnitude(herm, 3).residuals(herm).max(),
            _top_real_part(0.5 * (k1.markov + k2.markov), 3)
            .residuals(0.5 * (k1.markov + k2.markov))
            .max(),
        )
        errs.append((row_err, sym_err, eig_err, anti_err, resid))
    elapsed = time.perf_counter() - t0
    worst = [max(e[i] for e in errs) for i in range(5)]
    ok = (
        worst[0] <= 1e-10
        and worst[1] <= 1e-12
        and worst[2] <= 1e-8
        and worst[3] <= 1e-12
        and worst[4] <= 1e-8
        and elapsed < 5.0
    )
    _emit(
        4,
        ok,
        f"row {worst[0]:.1e}, sym {worst[1]:.1e}, eig {worst[2]:.1e}, "
        f"anti {worst[3]:.1e}, resid {worst[4]:.1e}, {elapsed:.2f} s",
    )


def test_criterion_5_metric_identities():
    t0 = time.perf_counter()
    t = np.arange(3000) / EDR_RATE
    v = np.sin(2 * np.pi * 0.1 * t) + 0.3 * np.sin(2 * np.pi * 0.37 * t)

    g_self = gamma_index(v, v)
    g_neg = gamma_index(v, -v)
    delayed = np.concatenate([np.full(5, np.nan), v[:-5]])
    g_delay = gamma_index(delayed, v)

    e_self = eta_index(v, v).eta
    a = np.sin(2 * np.pi * 0.2 * t)
    b = np.sin(2 * np.pi * 0.3 * t)
    sym_err = abs(eta_index(a, b).eta - eta_index(b, a).eta)

    w_id = wasserstein1(np.array([1.0, 0.0, 0.0]), np.array([1.0, 0.0, 0.0]))
    w_shift = wasserstein1(np.array([1.0, 0.0, 0.0]), np.array([0.0, 0.0, 1.0]))
    w_spread = wasserstein1(np.full(3, 1.0 / 3.0), np.array([1.0, 0.0, 0.0]))
    elapsed = time.perf_counter() - t0
    ok = (
        abs(g_self.gamma - 100.0) <= 1e-9
        and g_self.tau_star == 0
        and abs(g_neg.gamma - 100.0) <= 1e-9
        and g_delay.tau_star == 5
        and abs(g_delay.gamma - 100.0) <= 1e-6
        and e_self <= 1e-15
        and sym_err <= 1e-12
        and w_id == 0.0
        and abs(w_shift - 2.0) <= 1e-12
        and abs(w_spread - 1.0) <= 1e-12
        and elapsed < 5.0
    )
    _emit(
        5,
        ok,
        f"gamma(v,v) {g_self.gamma:.6f}@{g_self.tau_star}, delay tau {g_delay.tau_star}, "
        f"eta(u,u) {e_self:.1e}, W1 ({w_id:g}, {w_shift:g}, {w_spread:g}), {elapsed:.2f} s",
    )


def test_criterion_6_dssst_harmonic_suppression():
    t0 = time.perf_counter()
    t = np.arange(3000) / EDR_RATE
    pulse = ((t % 5.0) < 2.5).astype(float)
    params = DsSstParams()
    sharp = dsSST(pulse, params)
    plain = plain_spectrogram(pulse, params)
    dfreq = EDR_RATE / params.dft_points

    def band(tfr, f0):
        sel = np.abs(tfr.freq_axis - f0) <= 2 * dfreq + 1e-12
        return tfr.matrix[sel].sum()

    r_sharp = band(sharp, 0.4) / band(sharp, 0.2)
    r_plain = band(plain, 0.4) / band(plain, 0.2)
    elapsed = time.perf_counter() - t0
    ok = r_sharp <= 0.1 and r_plain >= 0.3 and elapsed < 30.0
    _emit(6, ok, f"de-shaped ratio {r_sharp:.4f} <= 0.1, plain {r_plain:.4f} >= 0.3, {elapsed:.1f} s")


def test_criterion_7_butterworth_response():
    t = np.arange(10000) / 1000.0
    sine = np.sin(2 * np.pi * 60.0 * t)
    out = lowpass_zero_phase(SampledSignal(sine, 1000.0)).samples
    core = slice(2000, 8000)
    ratio = np.sqrt(np.mean(out[core] ** 2) / np.mean(sine[core] ** 2))
    const = lowpass_zero_phase(SampledSignal(np.full(5000, 3.7), 1000.0)).samples
    dc_err = np.abs(const / 3.7 - 1.0).max()
    ok = 0.0807 * 0.8 <= ratio <= 0.0807 * 1.2 and dc_err <= 1e-9
    _emit(7, ok, f"60 Hz ratio {ratio:.4f} in 0.0807 ± 20%, DC error {dc_err:.1e}")


def test_criterion_8_fusion_invariances():
    rng = default_rng(5)
    n, cols = 400, 8
    grid = np.arange(n) / EDR_RATE
    base = np.sin(2 * np.pi * 0.25 * grid)
    mat = np.empty((n, cols))
    for j in range(cols):
        col = (0.5 + rng.random()) * base + 0.2 * rng.standard_normal(n)
        mat[:, j] = (col - col.mean()) / col.std()
    pool = EstimatePool(mat, tuple(f"m{j}" for j in range(cols)), 0, n)
    edr = fuse(lag_embed(pool, 10), pool)
    body = edr.values[~np.isnan(edr.values)]
    norm_err = abs(np.linalg.norm(body) - 1.0)

    perm = rng.permutation(cols)
    pool_p = EstimatePool(mat[:, perm], tuple(f"m{j}" for j in perm), 0, n)
    edr_p = fuse(lag_embed(pool_p, 10), pool_p)
    same_nulls = np.array_equal(np.isnan(edr.values), np.isnan(edr_p.values))
    perm_err = np.nanmax(np.abs(edr.values - edr_p.values))
    ok = (
        edr.head_nulls == 9
        and np.isnan(edr.values[:9]).all()
        and not np.isnan(edr.values[9:]).any()
        and norm_err <= 1e-9
        and same_nulls
        and perm_err <= 1e-10
    )
    _emit(8, ok, f"head nulls {edr.head_nulls}, norm err {norm_err:.1e}, permutation err {perm_err:.1e}")


def test_criterion_9_length_harness(tmp_path):
    t0 = time.perf_counter()
    spec = {
        "duration": 1800.0,
        "heart_rate": [1.1, 1.3],
        "resp_rate": 0.25,
        "modulation_depth": 0.1,
        "noise_snr": 15.0,
        "seed": 42,
    }
    (tmp_path / "spec.json").write_text(json.dumps(spec))
    with contextlib.redirect_stdout(io.StringIO()):  # keep the synth summary off the gate log
        assert main(["synth", "--spec", str(tmp_path / "spec.json"), "--out", str(tmp_path / "rec")]) == 0

    table = []
    for minutes in (2, 5, 15, 30):
        edr = tmp_path / f"edr{minutes}.csv"
        rep = tmp_path / f"rep{minutes}.json"
        met = tmp_path / f"met{minutes}.json"
        rc = main(
            [
                "derive",
                str(tmp_path / "rec" / "ecg.csv"),
                "-o",
                str(edr),
                "--report",
                str(rep),
                "--segment-seconds",
                str(minutes * 60),
            ]
        )
        assert rc == 0
        rc = main(
            ["evaluate", str(edr), "-r", str(tmp_path / "rec" / "respiration.csv"), "-o", str(met)]
        )
        assert rc == 0
        report = json.loads(rep.read_text())
        row = json.loads(met.read_text())[0]
        assert report["edr_samples"] == minutes * 600
        assert set(row) == {"reference", "gamma", "tau_star", "eta", "frames"}
        assert 0.0 <= row["gamma"] <= 100.0 and np.isfinite(row["eta"]) and row["frames"] > 0
        table.append((minutes, row["gamma"], row["tau_star"], row["eta"], row["frames"]))
    elapsed = time.perf_counter() - t0
    for minutes, gam, tau, eta, frames in table:
        print(f"  {minutes:2d} min: gamma {gam:.3f} tau {tau:+d} eta {eta:.4f} frames {frames}")
    ok = len(table) == 4 and elapsed < 900.0
    _emit(9, ok, f"4 lengths evaluated, {elapsed:.1f} s")
