"""Command-line entry point.

Subcommands:

* ``rb run``      simulate blind RB, write the dataset CSV plus a manifest
* ``rb fit``      fit a dataset CSV, write a JSON fit report
* ``calibrate``   repeated-pulse scan, write a calibration CSV + estimate
* ``sweep overrotation``  error-vs-overrotation scaling table CSV
* ``clifford table``      export the group and pulse sequences as JSON

All randomness flows from the config seed; identical (config, seed) produce
byte-identical CSVs at any ``--threads`` value.  Exit code is 0 on success
and 1 on any validation or I/O failure (the error is printed to stderr).
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__
from .calibration import error_vs_overrotation, repeated_pulse_scan
from .cliffords import clifford_group
from .config import ConfigError, config_hash, parse_config
from .experiment import RBDataset, run_experiment
from .fitting import bootstrap_ci, fit_blind_rb

_DEFAULTS_EPILOG = """\
config file defaults (TOML or JSON by extension):
  measurement_mode      "analytic"   (or "sampled" / "binomial-sampled")
  paired_noise          true         (both blind variants share noise draws)
  noise.sigma_b         0.0          (per-dot Overhauser std dev)
  noise.uniform_b       [0, 0, 0]    (common field, angular frequency)
  noise.overrotation_12 0.0          (fractional angle error, pair 1-2)
  noise.overrotation_23 0.0          (fractional angle error, pair 2-3)
  noise.pulse_duration  1.0
  noise.idle_duration   0.0
  noise.z_only_fields   false
  noise.theta_jitter    0.0          (fractional charge-noise jitter)
  noise.redraw          "per_shot"   (or "per_sequence")
  readout.visibility    1.0
  readout.dark_fraction 0.0
  calibration.pair      [2, 3]
  calibration.theta_min pi - 0.5
  calibration.theta_max pi + 0.5
  calibration.theta_points 41
  calibration.repeats   [1]
  calibration.shots     1
required keys: lengths, sequences_per_length (alias K),
shots_per_sequence (alias N), seed
"""


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="blindrb",
        description="Exchange-only qubit simulator with blind randomized benchmarking",
        epilog=_DEFAULTS_EPILOG,
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    rb = sub.add_parser("rb", help="blind RB experiments")
    rb_sub = rb.add_subparsers(dest="rb_command", required=True)

    rb_run = rb_sub.add_parser("run",
                               help="simulate and write dataset CSV + manifest")
    rb_run.add_argument("--config", required=True, help="TOML/JSON config file")
    rb_run.add_argument("--out", required=True, help="output directory")
    rb_run.add_argument("--threads", type=int, default=1,
                        help="worker threads (affects speed only, never bytes)")

    rb_fit = rb_sub.add_parser("fit",
                               help="fit a dataset CSV, write a JSON report")
    rb_fit.add_argument("--data", required=True, help="dataset CSV from rb run")
    rb_fit.add_argument("--out", required=True, help="report JSON path")
    rb_fit.add_argument("--resamples", type=int, default=1000,
                        help="bootstrap resamples (default 1000)")
    rb_fit.add_argument("--weighted", choices=["auto", "on", "off"], default="auto",
                        help="inverse-variance weighting (default: auto-detect "
                             "sampled-mode data)")

    cal = sub.add_parser("calibrate", help="repeated-pulse rotation calibration")
    cal.add_argument("--config", required=True)
    cal.add_argument("--out", default="calibration.csv", help="scan CSV path")

    sweep = sub.add_parser("sweep", help="parameter sweeps")
    sweep_sub = sweep.add_subparsers(dest="sweep_command", required=True)
    over = sweep_sub.add_parser("overrotation", help="error scaling vs overrotation")
    over.add_argument("--config", required=True)
    over.add_argument("--eps", required=True,
                      help="comma-separated overrotation fractions, e.g. 0.01,0.02")
    over.add_argument("--out", default="overrotation.csv")
    over.add_argument("--resamples", type=int, default=200)
    over.add_argument("--threads", type=int, default=1)

    cliff = sub.add_parser("clifford", help="Clifford group utilities")
    cliff_sub = cliff.add_subparsers(dest="clifford_command", required=True)
    table = cliff_sub.add_parser("table", help="export group + pulse sequences")
    table.add_argument("--out", default="table.json")
    return parser


def _utc_now() -> str:
    return datetime.now(timezone.utc).isoformat()


def _sha256_bytes(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def _cmd_rb_run(args) -> int:
    spec = parse_config(args.config)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    started = _utc_now()
    dataset = run_experiment(spec.experiment, threads=args.threads)
    csv_text = dataset.to_csv()
    csv_path = out_dir / "dataset.csv"
    csv_path.write_text(csv_text)
    manifest = {
        "tool": "blindrb",
        "version": __version__,
        "config_hash": config_hash(spec.resolved),
        "config": spec.resolved,
        "seed": spec.experiment.seed,
        "started": started,
        "finished": _utc_now(),
        "outputs": {"dataset": str(csv_path)},
        "dataset_sha256": _sha256_bytes(csv_text.encode()),
    }
    manifest_path = out_dir / "manifest.json"
    manifest_path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    print(f"wrote {csv_path} and {manifest_path}")
    return 0


def _cmd_rb_fit(args) -> int:
    data_path = Path(args.data)
    if not data_path.exists():
        raise FileNotFoundError(f"dataset not found: {data_path}")
    raw = data_path.read_bytes()
    dataset = RBDataset.from_csv(raw.decode())
    weighted = {"auto": None, "on": True, "off": False}[args.weighted]
    fit = fit_blind_rb(dataset, weighted=weighted)
    boot = bootstrap_ci(dataset, n_resamples=args.resamples, seed=0,
                        weighted=weighted)
    report = fit.to_dict()
    report["confidence_intervals"] = {
        name: [lo, hi] for name, (lo, hi) in boot.intervals.items()}
    report["bootstrap"] = {"n_resamples": boot.n_resamples,
                           "n_failures": boot.n_failures, "seed": 0}
    report["data_sha256"] = _sha256_bytes(raw)
    report["lengths"] = list(dataset.lengths)
    out = Path(args.out)
    out.write_text(json.dumps(report, indent=2, sort_keys=True) + "\n")
    r = report["error_per_clifford"]
    l_w = report["leakage_per_clifford_weighted"]
    print(f"error_per_clifford={r:.6g} leakage_per_clifford={l_w:.6g} -> {out}")
    return 0


def _cmd_calibrate(args) -> int:
    spec = parse_config(args.config)
    cal = spec.calibration
    if cal is None:
        raise ConfigError("config has no [calibration] section")
    grid = np.linspace(cal.theta_min, cal.theta_max, cal.theta_points)
    scan = repeated_pulse_scan(cal.pair, grid, cal.repeats,
                               model=spec.experiment.noise,
                               seed=spec.experiment.seed, shots=cal.shots)
    lines = ["repeats,theta,p_singlet"]
    for row, n_rep in enumerate(scan.repeat_counts):
        for theta, p in zip(scan.theta_grid, scan.p_singlet[row]):
            lines.append(f"{n_rep},{theta:.17g},{p:.17g}")
    out = Path(args.out)
    out.write_text("\n".join(lines) + "\n")
    summary = {
        "pair": list(scan.pair),
        "theta_pi": scan.theta_pi,
        "theta_pi_uncertainty": scan.theta_pi_uncertainty,
        "flag": scan.flag,
    }
    summary_path = out.with_suffix(".json")
    summary_path.write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    if scan.flag:
        print(f"calibration flagged: {scan.flag} -> {out}")
    else:
        print(f"theta_pi={scan.theta_pi:.9f} +- {scan.theta_pi_uncertainty:.2e} "
              f"-> {out}")
    return 0


def _cmd_sweep_overrotation(args) -> int:
    spec = parse_config(args.config)
    try:
        epsilons = [float(e) for e in args.eps.split(",") if e.strip()]
    except ValueError as exc:
        raise ConfigError(f"--eps must be comma-separated floats: {exc}") from exc
    scaling = error_vs_overrotation(epsilons, spec.experiment,
                                    n_resamples=args.resamples,
                                    threads=args.threads)
    out = Path(args.out)
    out.write_text(scaling.to_csv())
    summary_path = out.with_suffix(".json")
    summary_path.write_text(json.dumps(
        {"slope": scaling.slope, "intercept": scaling.intercept,
         "epsilons": epsilons}, indent=2, sort_keys=True) + "\n")
    print(f"log-log slope={scaling.slope:.4f} -> {out}")
    return 0


def _cmd_clifford_table(args) -> int:
    group = clifford_group()
    entries = []
    for element in group.elements:
        entries.append({
            "index": element.index,
            "word": list(element.word),
            "matrix": [[[z.real, z.imag] for z in row] for row in element.matrix],
            "pulses": [{"pair": list(p.pair), "theta": p.theta,
                        "overrotation_tag": p.overrotation_tag}
                       for p in element.pulse_sequence],
            "inverse": group.inverse(element.index),
        })
    out = Path(args.out)
    out.write_text(json.dumps(entries, indent=2) + "\n")
    print(f"wrote {len(entries)} Clifford elements -> {out}")
    return 0


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "rb":
            if args.rb_command == "run":
                return _cmd_rb_run(args)
            return _cmd_rb_fit(args)
        if args.command == "calibrate":
            return _cmd_calibrate(args)
        if args.command == "sweep":
            return _cmd_sweep_overrotation(args)
        if args.command == "clifford":
            return _cmd_clifford_table(args)
        parser.error(f"unknown command {args.command!r}")
    except (ConfigError, ValueError, RuntimeError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
