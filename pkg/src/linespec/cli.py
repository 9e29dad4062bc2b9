"""Command-line interface: single solves, benchmark sweeps, re-aggregation.

Subcommands
-----------
solve          recover one randomly drawn instance and print a summary
sweep-m        success/RSNR versus the number of measurements
sweep-spacing  success/RSNR versus the spacing of two close components
report         re-aggregate a persisted trials.jsonl into fresh reports

Configuration comes from an optional JSON file (``--config``) with the
fields of ExperimentConfig (nested ``solver`` section for solver knobs);
command-line flags override file values.  The worker count is taken from
the LINESPEC_WORKERS environment variable.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import harness, metrics, model, solver
from .harness import ExperimentConfig, config_from_dict
from .solver import IllConditionedError


def _parse_methods(text: str) -> tuple:
    return tuple(part.strip() for part in text.split(",") if part.strip())


def _parse_values(text: str, cast) -> tuple:
    return tuple(cast(part) for part in text.split(",") if part.strip())


def _add_common(sub: argparse.ArgumentParser) -> None:
    sub.add_argument("--config", type=Path, help="JSON config file")
    sub.add_argument("--seed", type=int, help="root experiment seed")
    sub.add_argument("--trials", type=int, help="trials per axis value")
    sub.add_argument("--out", type=Path, help="output directory")
    sub.add_argument("--methods", type=str,
                     help="comma-separated subset of: " + ",".join(harness.METHODS))
    sub.add_argument("--trace", action="store_true",
                     help="emit per-iteration JSON lines on stderr (solve only)")


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="linespec",
        description="Gridless line-spectrum estimation benchmark",
    )
    subs = parser.add_subparsers(dest="command", required=True)

    p_solve = subs.add_parser("solve", help="solve one random instance")
    _add_common(p_solve)
    p_solve.add_argument("--L", type=int, default=64, help="signal length")
    p_solve.add_argument("--K", type=int, default=3, help="number of components")
    p_solve.add_argument("--M", type=int, default=25, help="number of measurements")
    p_solve.add_argument("--min-spacing", type=float, default=None,
                         help="minimum circular spacing between true frequencies")

    p_m = subs.add_parser("sweep-m", help="sweep the number of measurements")
    _add_common(p_m)
    p_m.add_argument("--m-values", type=str, help="comma-separated M values")
    p_m.add_argument("--min-spacing", type=float, default=None)

    p_mu = subs.add_parser("sweep-spacing", help="sweep the frequency spacing")
    _add_common(p_mu)
    p_mu.add_argument("--mu-values", type=str,
                      help="comma-separated spacing coefficients")
    p_mu.add_argument("--M", type=int, default=None,
                      help="number of measurements (fixed across the sweep)")

    p_rep = subs.add_parser("report", help="re-aggregate persisted trials")
    p_rep.add_argument("--out", type=Path, required=True,
                       help="directory containing trials.jsonl")
    return parser


def _load_config_file(path: Path | None) -> dict:
    if path is None:
        return {}
    return json.loads(Path(path).read_text(encoding="utf-8"))


def _sweep_config(args, kind: str) -> ExperimentConfig:
    data = _load_config_file(args.config)
    data["kind"] = kind
    if args.seed is not None:
        data["seed"] = args.seed
    if args.trials is not None:
        data["n_trials"] = args.trials
    if args.out is not None:
        data["output_path"] = str(args.out)
    if args.methods is not None:
        data["methods"] = _parse_methods(args.methods)
    if kind == "m_sweep":
        if args.m_values is not None:
            data["m_values"] = _parse_values(args.m_values, int)
        if args.min_spacing is not None:
            data["min_spacing"] = args.min_spacing
        data.setdefault("m_values", (15, 20, 25, 30, 35, 40))
    else:
        if args.mu_values is not None:
            data["mu_values"] = _parse_values(args.mu_values, float)
        if args.M is not None:
            data["n_measurements"] = args.M
        data.setdefault("mu_values", (0.1, 0.25, 0.5, 1.0, 1.5, 2.0))
    return config_from_dict(data)


def _cmd_solve(args) -> int:
    data = _load_config_file(args.config)
    solver_cfg = harness.SolverConfig(**(data.get("solver") or {}))
    seed = args.seed if args.seed is not None else int(data.get("seed", 0))
    rng = harness.trial_rng(seed, float(args.M), 0)
    spectrum = model.draw_spectrum(args.K, args.min_spacing, rng)
    u = model.synthesize(spectrum, args.L)
    s = model.draw_sample_set(args.L, args.M, rng)
    meas = model.subsample(u, s)

    trace_fn = None
    if args.trace:
        trace_fn = lambda rec: print(json.dumps(rec), file=sys.stderr)

    try:
        state = solver.run(meas.y, s, solver_cfg, trace_fn=trace_fn)
    except IllConditionedError as exc:
        print(f"solve failed: {exc}", file=sys.stderr)
        return 3

    u_hat = metrics.reconstruct_full(state.theta_hat.thetas, state.z_hat, args.L)
    detected = metrics.detect(state.z_hat, state.theta_hat.thetas)
    ok, freq_err = metrics.success(spectrum.freqs, detected, spectrum.K)
    print(f"instance: L={args.L} K={args.K} M={args.M} seed={seed}")
    print("true frequencies:      "
          + " ".join(f"{w:.6f}" for w in np.sort(spectrum.freqs)))
    print("detected frequencies:  "
          + " ".join(f"{w:.6f}" for w in detected))
    print(f"iterations={state.iteration} atoms={state.theta_hat.N} "
          f"epsilon={state.epsilon:.1e} residual={state.residual:.3e}")
    print(f"rsnr_db={metrics.rsnr(u, u_hat):.4f} "
          f"freq_error_cycles={freq_err:.3e} success={ok}")
    if args.out is not None:
        out_dir = Path(args.out)
        out_dir.mkdir(parents=True, exist_ok=True)
        record = {
            "instance": model.instance_record(spectrum, s, seed),
            "rsnr_db": metrics.rsnr(u, u_hat),
            "detected_freqs": [float(w) for w in detected],
            "success": bool(ok),
        }
        (out_dir / "solve.json").write_text(
            json.dumps(record, indent=2) + "\n", encoding="utf-8")
    return 0


def _cmd_sweep(args, kind: str) -> int:
    cfg = _sweep_config(args, kind)
    rows = harness.run_experiment(cfg)
    print(harness.CSV_HEADER)
    for row in rows:
        print(f"{row.axis_value:.6g},{row.method},{row.mean_rsnr_db:.6g},"
              f"{row.success_rate:.6g},{row.n_trials}")
    return 0


def _cmd_report(args) -> int:
    trials_path = Path(args.out) / harness.TRIALS_FILENAME
    if not trials_path.exists():
        print(f"no trials file at {trials_path}", file=sys.stderr)
        return 1
    records = harness.read_trial_records(trials_path)
    rows = harness.aggregate_records(records)
    csv_path, json_path = harness.emit_report(rows, args.out)
    print(f"wrote {csv_path} and {json_path}")
    return 0


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        if args.command == "solve":
            return _cmd_solve(args)
        if args.command == "sweep-m":
            return _cmd_sweep(args, "m_sweep")
        if args.command == "sweep-spacing":
            return _cmd_sweep(args, "spacing_sweep")
        return _cmd_report(args)
    except (ValueError, OSError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
