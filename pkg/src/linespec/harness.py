"""Monte Carlo experiment runner with deterministic per-trial seeding.

Two sweep families are supported: measurement-count sweeps (random
spectra, varying M) and frequency-spacing sweeps (two components at a
controlled spacing, fixed M), plus single-instance runs.  Every trial
derives an independent random stream from (seed, axis value, trial index),
so results are bit-reproducible regardless of execution order or worker
count, and adding axis values never perturbs existing trials.
"""

from __future__ import annotations

import dataclasses
import json
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import baseline, metrics, model, solver
from .metrics import TrialResult
from .model import LineSpectrum, SampleSet
from .solver import IllConditionedError, SolverConfig

KINDS = ("m_sweep", "spacing_sweep", "single")
METHODS = ("gridless", "fixed_grid", "oracle_ls")

WORKERS_ENV_VAR = "LINESPEC_WORKERS"

TRIALS_FILENAME = "trials.jsonl"
CSV_FILENAME = "report.csv"
JSON_FILENAME = "report.json"

CSV_HEADER = "axis,method,mean_rsnr_db,success_rate,n_trials"


@dataclass
class ExperimentConfig:
    """Declarative description of one experiment.

    ``m_values`` is the sweep axis for ``m_sweep`` (and the single value for
    ``single``); ``mu_values`` is the axis for ``spacing_sweep``, which uses
    ``n_measurements`` samples and always two components.
    """

    kind: str
    L: int = 64
    K: int | None = None
    m_values: tuple = ()
    mu_values: tuple = ()
    n_measurements: int = 20
    min_spacing: float | None = None
    n_trials: int = 100
    seed: int = 0
    methods: tuple = ("gridless", "fixed_grid")
    solver: SolverConfig = field(default_factory=SolverConfig)
    output_path: str | None = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"kind must be one of {KINDS}")
        if self.n_trials < 1:
            raise ValueError("n_trials must be at least 1")
        if not self.methods:
            raise ValueError("at least one method required")
        unknown = set(self.methods) - set(METHODS)
        if unknown:
            raise ValueError(f"unknown methods: {sorted(unknown)}")
        self.methods = tuple(self.methods)
        self.m_values = tuple(int(m) for m in self.m_values)
        self.mu_values = tuple(float(mu) for mu in self.mu_values)
        if self.kind == "spacing_sweep":
            if self.K is None:
                self.K = 2
            if self.K != 2:
                raise ValueError("spacing_sweep uses exactly two components")
            if not self.mu_values:
                raise ValueError("spacing_sweep needs nonempty mu_values")
            if any(mu <= 0 for mu in self.mu_values):
                raise ValueError("spacing coefficients must be positive")
        else:
            if self.K is None:
                self.K = 3
            if not self.m_values:
                raise ValueError(f"{self.kind} needs nonempty m_values")
            if self.kind == "single" and len(self.m_values) != 1:
                raise ValueError("single kind takes exactly one m value")
        if self.kind != "spacing_sweep" and any(
                not 1 <= m <= self.L for m in self.m_values):
            raise ValueError("m values must lie in [1, L]")

    @property
    def axis_values(self) -> tuple:
        if self.kind == "spacing_sweep":
            return self.mu_values
        return self.m_values

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


def config_from_dict(data: dict) -> ExperimentConfig:
    """Build an ExperimentConfig from a parsed config-file mapping."""
    data = dict(data)
    solver_data = data.pop("solver", None) or {}
    known = {f.name for f in dataclasses.fields(ExperimentConfig)}
    unknown = set(data) - known
    if unknown:
        raise ValueError(f"unknown config keys: {sorted(unknown)}")
    solver_known = {f.name for f in dataclasses.fields(SolverConfig)}
    solver_unknown = set(solver_data) - solver_known
    if solver_unknown:
        raise ValueError(f"unknown solver config keys: {sorted(solver_unknown)}")
    return ExperimentConfig(solver=SolverConfig(**solver_data), **data)


@dataclass(frozen=True)
class AggregateRow:
    """One point of a sweep: an axis value and a method's averaged scores."""

    axis_value: float
    method: str
    mean_rsnr_db: float
    success_rate: float
    n_trials: int

    def to_dict(self) -> dict:
        return {
            "axis_value": float(self.axis_value),
            "method": self.method,
            "mean_rsnr_db": float(self.mean_rsnr_db),
            "success_rate": float(self.success_rate),
            "n_trials": int(self.n_trials),
        }


def trial_rng(seed: int, axis_value: float, trial_index: int) -> np.random.Generator:
    """Independent random stream for one (axis value, trial) pair.

    Keyed by the raw bit pattern of the axis value, so distinct axis points
    never share draws and adding new points leaves existing streams intact.
    """
    bits = int(np.float64(axis_value).view(np.uint64))
    entropy = [int(seed), bits >> 32, bits & 0xFFFFFFFF, int(trial_index)]
    return np.random.default_rng(np.random.SeedSequence(entropy))


def _draw_instance(cfg: ExperimentConfig, axis_value: float,
                   rng: np.random.Generator):
    if cfg.kind == "spacing_sweep":
        spectrum = model.draw_spectrum_spaced(axis_value, cfg.L, rng)
        n_meas = cfg.n_measurements
    else:
        spectrum = model.draw_spectrum(cfg.K, cfg.min_spacing, rng)
        n_meas = int(axis_value)
    u = model.synthesize(spectrum, cfg.L)
    s = model.draw_sample_set(cfg.L, n_meas, rng)
    return spectrum, u, model.subsample(u, s)


def _estimate(method: str, y, s: SampleSet, spectrum: LineSpectrum,
              cfg: ExperimentConfig):
    """Run one method; returns (thetas, coefficients)."""
    if method == "gridless":
        state = solver.run(y, s, cfg.solver)
        return state.theta_hat.thetas, state.z_hat
    if method == "fixed_grid":
        state = baseline.fixed_grid_irls(y, s, cfg.solver)
        return state.theta_hat.thetas, state.z_hat
    if method == "oracle_ls":
        amps, _ = baseline.oracle_ls(y, s, spectrum)
        return spectrum.freqs, amps
    raise ValueError(f"unknown method: {method}")


def _execute_trial(cfg: ExperimentConfig, axis_value: float,
                   trial_index: int) -> tuple[dict, dict]:
    rng = trial_rng(cfg.seed, axis_value, trial_index)
    spectrum, u, meas = _draw_instance(cfg, axis_value, rng)
    instance = model.instance_record(spectrum, meas.sample_set, cfg.seed)
    results: dict[str, TrialResult] = {}
    for method in cfg.methods:
        start = time.perf_counter()
        error = None
        try:
            thetas, z = _estimate(method, meas.y, meas.sample_set, spectrum, cfg)
        except (IllConditionedError, ValueError) as exc:
            thetas = np.empty(0)
            z = np.empty(0, dtype=complex)
            error = f"{type(exc).__name__}: {exc}"
        elapsed_ms = (time.perf_counter() - start) * 1e3
        if error is None:
            u_hat = metrics.reconstruct_full(thetas, z, cfg.L)
            rsnr_db = metrics.rsnr(u, u_hat)
            detected = metrics.detect(z, thetas)
            ok, freq_err = metrics.success(spectrum.freqs, detected, spectrum.K)
        else:
            rsnr_db, detected, ok, freq_err = 0.0, np.empty(0), False, np.inf
        results[method] = TrialResult(
            rsnr_db=rsnr_db, detected_freqs=detected,
            detected_count=int(detected.size), freq_error=freq_err,
            success=ok, method=method, seed=cfg.seed,
            timing_ms=elapsed_ms, error=error,
        )
    return instance, results


def run_trial(cfg: ExperimentConfig, axis_value: float,
              trial_index: int) -> dict[str, TrialResult]:
    """Run every configured method on one freshly drawn instance."""
    return _execute_trial(cfg, axis_value, trial_index)[1]


def _pool_task(args):
    cfg, axis_value, trial_index = args
    instance, results = _execute_trial(cfg, axis_value, trial_index)
    return axis_value, trial_index, instance, results


def _trial_record(axis_value, trial_index, instance, results) -> dict:
    return {
        "axis_value": float(axis_value),
        "trial_index": int(trial_index),
        "instance": instance,
        "results": {name: res.to_json() for name, res in results.items()},
    }


def aggregate_records(records: list[dict]) -> list[AggregateRow]:
    """Recompute the sweep summary from persisted per-trial records.

    Axis values and methods keep their order of first appearance; within
    each cell the fold runs in trial-index order, so the aggregation is
    independent of the order the records were produced in.
    """
    axes: list[float] = []
    methods: list[str] = []
    cells: dict[tuple, list] = {}
    for rec in records:
        axis = float(rec["axis_value"])
        if axis not in axes:
            axes.append(axis)
        for name, res in rec["results"].items():
            if name not in methods:
                methods.append(name)
            cells.setdefault((axis, name), []).append(
                (int(rec["trial_index"]), float(res["rsnr_db"]), bool(res["success"]))
            )
    rows = []
    for axis in axes:
        for name in methods:
            cell = sorted(cells.get((axis, name), ()))
            if not cell:
                continue
            rsnrs = np.array([r for _, r, _ in cell])
            successes = sum(1 for _, _, ok in cell if ok)
            rows.append(AggregateRow(axis, name, float(np.mean(rsnrs)),
                                     successes / len(cell), len(cell)))
    return rows


def run_experiment(cfg: ExperimentConfig,
                   workers: int | None = None) -> list[AggregateRow]:
    """Run all trials of a sweep and aggregate per (axis value, method).

    Trials may execute on a process pool (``workers`` argument, else the
    LINESPEC_WORKERS environment variable, else serial); the aggregate is a
    deterministic fold in trial-index order either way.  When the config
    names an output directory, per-trial records are appended to
    ``trials.jsonl`` as they complete (so partial results survive an
    interruption) and the final sorted records plus CSV/JSON reports are
    written on completion.
    """
    if workers is None:
        workers = int(os.environ.get(WORKERS_ENV_VAR, "1"))
    workers = max(1, workers)

    tasks = [(cfg, axis, t) for axis in cfg.axis_values
             for t in range(cfg.n_trials)]

    out_dir = Path(cfg.output_path) if cfg.output_path else None
    sink = None
    if out_dir is not None:
        out_dir.mkdir(parents=True, exist_ok=True)
        sink = open(out_dir / TRIALS_FILENAME, "w", encoding="utf-8")

    records: dict[tuple, dict] = {}
    try:
        if workers == 1:
            completed = map(_pool_task, tasks)
        else:
            pool = ProcessPoolExecutor(max_workers=workers)
            completed = pool.map(_pool_task, tasks)
        for axis_value, trial_index, instance, results in completed:
            rec = _trial_record(axis_value, trial_index, instance, results)
            records[(axis_value, trial_index)] = rec
            if sink is not None:
                sink.write(json.dumps(rec) + "\n")
                sink.flush()
        if workers > 1:
            pool.shutdown()
    finally:
        if sink is not None:
            sink.close()

    ordered = [records[(axis, t)] for axis in cfg.axis_values
               for t in range(cfg.n_trials)]
    rows = aggregate_records(ordered)
    if out_dir is not None:
        with open(out_dir / TRIALS_FILENAME, "w", encoding="utf-8") as fh:
            for rec in ordered:
                fh.write(json.dumps(rec) + "\n")
        emit_report(rows, out_dir, cfg)
    return rows


def emit_report(rows: list[AggregateRow], out_dir,
                config: ExperimentConfig | None = None) -> tuple[Path, Path]:
    """Write the sweep summary as CSV and JSON; returns both paths.

    The CSV uses a fixed header and 6-significant-digit numbers with a
    locale-independent decimal point; the JSON echoes the config and keeps
    full float precision so it round-trips losslessly.
    """
    if not rows:
        raise ValueError("nothing to report: rows are empty")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    csv_path = out_dir / CSV_FILENAME
    json_path = out_dir / JSON_FILENAME
    try:
        lines = [CSV_HEADER]
        for row in rows:
            lines.append(
                f"{row.axis_value:.6g},{row.method},{row.mean_rsnr_db:.6g},"
                f"{row.success_rate:.6g},{row.n_trials}"
            )
        csv_path.write_text("\n".join(lines) + "\n", encoding="utf-8")
        payload = {
            "config": config.to_dict() if config is not None else None,
            "rows": [row.to_dict() for row in rows],
        }
        json_path.write_text(json.dumps(payload, indent=2) + "\n", encoding="utf-8")
    except OSError as exc:
        raise OSError(f"failed writing report under {out_dir}: {exc}") from exc
    return csv_path, json_path


def read_trial_records(path) -> list[dict]:
    """Load persisted per-trial records from a trials.jsonl file."""
    records = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                records.append(json.loads(line))
    return records


def rows_from_json(path) -> list[AggregateRow]:
    """Parse a report.json back into aggregate rows."""
    payload = json.loads(Path(path).read_text(encoding="utf-8"))
    return [AggregateRow(**row) for row in payload["rows"]]
