"""Command-line surface: synthesize records, derive the fused estimate, score it.

Three subcommands:

* ``synth``    build a synthetic record from a JSON spec
* ``derive``   ECG CSV in, fused respiratory CSV plus a JSON run report out
* ``evaluate`` derived CSV plus reference CSVs in, metrics JSON out

Exit codes: 0 success, 2 unusable input, 3 degenerate data.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .ensemble import (
    DEFAULT_HALF_WINDOW,
    DEFAULT_LAGS,
    EnsembledEdr,
    EstimatePool,
    build_pool,
    fuse,
    lag_embed,
)
from .estimators import DEFAULT_COMPONENTS, EdrEstimate, compute_estimates
from .evaluation import (
    EVAL_SECONDS,
    MAX_LAG,
    DsSstParams,
    eta_index,
    gamma_index,
)
from .fileio import (
    EDR_RATE,
    FileFormatError,
    read_ecg_csv,
    read_edr_csv,
    read_reference_csv,
    write_series_csv,
)
from .preprocess import PreprocessedEcg, preprocess_record
from .signalcore import (
    DegenerateDataError,
    InsufficientDataError,
    SampledSignal,
)
from .synthetic import SyntheticSpec, export_record, generate

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_DEGENERATE = 3


@dataclass(frozen=True)
class RunConfig:
    """Pipeline knobs with their conventional defaults."""

    components: int = DEFAULT_COMPONENTS
    lags: int = DEFAULT_LAGS
    zscore_window: int = 2 * DEFAULT_HALF_WINDOW
    gamma_max_lag: int = MAX_LAG
    eval_seconds: float = EVAL_SECONDS
    dsst: DsSstParams = field(default_factory=DsSstParams)
    segment_seconds: float | None = None

    @classmethod
    def load(cls, path: str | Path | None, overrides: dict) -> "RunConfig":
        """Config file values first, command-line flags on top."""
        values: dict = {}
        if path is not None:
            with open(path) as fh:
                raw = json.load(fh)
            if not isinstance(raw, dict):
                raise FileFormatError(f"{path}: config must be a JSON object")
            dsst_raw = raw.pop("dsst", None)
            known = {f.name for f in dataclasses.fields(cls)}
            unknown = set(raw) - known
            if unknown:
                raise FileFormatError(f"{path}: unknown config keys {sorted(unknown)}")
            values.update(raw)
            if dsst_raw is not None:
                if not isinstance(dsst_raw, dict):
                    raise FileFormatError(f"{path}: dsst must be a JSON object")
                dsst_known = {f.name for f in dataclasses.fields(DsSstParams)}
                bad = set(dsst_raw) - dsst_known
                if bad:
                    raise FileFormatError(f"{path}: unknown dsst keys {sorted(bad)}")
                values["dsst"] = DsSstParams(**dsst_raw)
        values.update({k: v for k, v in overrides.items() if v is not None})
        cfg = cls(**values)
        if cfg.components < 1 or cfg.lags < 1 or cfg.zscore_window < 2:
            raise FileFormatError("components, lags must be >= 1 and zscore_window >= 2")
        if cfg.gamma_max_lag < 0:
            raise FileFormatError("gamma_max_lag must be >= 0")
        return cfg


@dataclass(frozen=True)
class DeriveResult:
    preprocessed: PreprocessedEcg
    estimates: list[EdrEstimate]
    pool: EstimatePool
    edr: EnsembledEdr


def run_pipeline(leads: list[SampledSignal], config: RunConfig | None = None) -> DeriveResult:
    """Library entry point: conditioned leads to fused estimate in one call."""
    config = config or RunConfig()
    pre = preprocess_record(leads)
    estimates = compute_estimates(pre, config.components)
    pool = build_pool(estimates, pre.record.duration, config.zscore_window // 2)
    embedded = lag_embed(pool, config.lags)
    edr = fuse(embedded, pool)
    return DeriveResult(pre, estimates, pool, edr)


def _trim_segment(leads: list[SampledSignal], seconds: float) -> list[SampledSignal]:
    if seconds <= 0:
        raise FileFormatError("segment length must be positive")
    out = []
    for s in leads:
        n = min(len(s), int(round(seconds * s.rate)))
        out.append(SampledSignal(s.samples[:n], s.rate, s.t0))
    return out


def cmd_derive(args: argparse.Namespace) -> int:
    config = RunConfig.load(
        args.config,
        {
            "components": args.components,
            "lags": args.lags,
            "zscore_window": args.zscore_window,
            "gamma_max_lag": args.gamma_max_lag,
            "segment_seconds": args.segment_seconds,
        },
    )
    leads = read_ecg_csv(args.input)
    if config.segment_seconds is not None:
        leads = _trim_segment(leads, config.segment_seconds)
    result = run_pipeline(leads, config)

    values = result.edr.values
    times = np.arange(values.size) / EDR_RATE
    write_series_csv(args.output, times, values)

    if args.dump_pool is not None:
        _dump_pool(args.dump_pool, result.pool)

    report = {
        "input": str(args.input),
        "output": str(args.output),
        "leads": result.preprocessed.record.n_leads,
        "beats": int(result.preprocessed.beats.n_beats),
        "dropped_beats": int(result.preprocessed.dropped_beats),
        "pool_columns": result.pool.n_columns,
        "edr_samples": int(values.size),
        "leading_nulls": result.edr.head_nulls,
        "degenerate_estimates": [e.label for e in result.estimates if e.degenerate],
        "flagged_estimates": {e.label: list(e.flags) for e in result.estimates if e.flags},
        "degenerate_spectrum": bool(result.edr.degenerate_spectrum),
    }
    _emit_json(report, args.report)
    return EXIT_OK


def _dump_pool(path: str, pool: EstimatePool) -> None:
    with open(path, "w") as fh:
        fh.write("time_s," + ",".join(label.replace("/", "_") for label in pool.labels) + "\n")
        for i in range(pool.matrix.shape[0]):
            t = (pool.offset + i) / EDR_RATE
            row = ",".join("%.17g" % v for v in pool.matrix[i])
            fh.write("%.17g,%s\n" % (t, row))


def cmd_evaluate(args: argparse.Namespace) -> int:
    config = RunConfig.load(args.config, {"gamma_max_lag": args.gamma_max_lag})
    u = read_edr_csv(args.edr)
    rows = []
    for ref_path in args.reference:
        ref = read_reference_csv(ref_path)
        gamma = gamma_index(
            u, ref, eval_seconds=config.eval_seconds, max_lag=config.gamma_max_lag
        )
        eta = eta_index(u, ref, gamma.tau_star, config.dsst)
        rows.append(
            {
                "reference": str(ref_path),
                "gamma": round(float(gamma.gamma), 6),
                "tau_star": int(gamma.tau_star),
                "eta": round(float(eta.eta), 9),
                "frames": int(eta.per_frame.size),
            }
        )
    _emit_json(rows, args.output)
    return EXIT_OK


def cmd_synth(args: argparse.Namespace) -> int:
    with open(args.spec) as fh:
        raw = json.load(fh)
    if not isinstance(raw, dict):
        raise FileFormatError(f"{args.spec}: spec must be a JSON object")
    known = {f.name for f in dataclasses.fields(SyntheticSpec)}
    unknown = set(raw) - known
    if unknown:
        raise FileFormatError(f"{args.spec}: unknown spec keys {sorted(unknown)}")
    for key in ("heart_rate", "resp_rate", "lead_phase_offsets", "baseline_wander"):
        if key in raw and isinstance(raw[key], list):
            raw[key] = tuple(raw[key])
    try:
        spec = SyntheticSpec(**raw)
        record = generate(spec)
    except (TypeError, ValueError) as exc:
        raise FileFormatError(f"{args.spec}: {exc}") from exc
    paths = export_record(record, args.out)
    _emit_json(
        {
            "out": str(args.out),
            "files": {k: str(v) for k, v in paths.items()},
            "beats": int(record.true_r_times.size),
            "duration": float(spec.duration),
            "leads": len(record.leads),
        },
        None,
    )
    return EXIT_OK


def _emit_json(payload, path: str | None) -> None:
    text = json.dumps(payload, indent=2, sort_keys=True)
    if path is None:
        print(text)
    else:
        with open(path, "w") as fh:
            fh.write(text + "\n")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="edrfuse",
        description="Derive and score an ensembled respiratory signal from ECG.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("derive", help="derive the fused respiratory estimate from an ECG CSV")
    p.add_argument("input", help="ECG CSV with columns time_s,lead1[,lead2]")
    p.add_argument("-o", "--output", required=True, help="output CSV for the 10 Hz estimate")
    p.add_argument("--report", default=None, help="write the JSON run report here instead of stdout")
    p.add_argument("--config", default=None, help="JSON config file")
    p.add_argument("--components", type=int, default=None, help="components per estimator family")
    p.add_argument("--lags", type=int, default=None, help="history depth of the lag embedding")
    p.add_argument("--zscore-window", type=int, default=None, dest="zscore_window",
                   help="sliding standardization window, samples")
    p.add_argument("--gamma-max-lag", type=int, default=None, dest="gamma_max_lag")
    p.add_argument("--segment-seconds", type=float, default=None, dest="segment_seconds",
                   help="use only the leading segment of the record")
    p.add_argument("--dump-pool", default=None, dest="dump_pool",
                   help="also write the standardized estimate pool to this CSV")
    p.set_defaults(func=cmd_derive)

    p = sub.add_parser("evaluate", help="score a derived estimate against references")
    p.add_argument("edr", help="derived CSV from the derive command")
    p.add_argument("-r", "--reference", action="append", required=True,
                   help="reference CSV time_s,value (repeatable)")
    p.add_argument("-o", "--output", default=None, help="metrics JSON path (default stdout)")
    p.add_argument("--config", default=None, help="JSON config file")
    p.add_argument("--gamma-max-lag", type=int, default=None, dest="gamma_max_lag")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("synth", help="generate a synthetic record with ground truth")
    p.add_argument("--spec", required=True, help="JSON file of generation parameters")
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_synth)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (FileNotFoundError, FileFormatError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (InsufficientDataError, DegenerateDataError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DEGENERATE
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
