"""Experiment orchestration: scenario grids, repeated executions, metrics.

One experiment sweeps planners over a grid of truth shifts (delta_mu,
delta_sigma) with ``n_executions`` missions per cell. Seeds derive
hierarchically from the root seed per execution and role, never from the
planner or the cell, so every planner flies the same instance with the
same offline route and the same noise stream within an execution index,
and adding a planner perturbs nothing else.

Outputs: ``metrics.csv`` (deterministic, byte-identical across re-runs),
``timings.csv`` (wall-clock re-planning statistics) and one JSONL trace
archive per (instance, planner, cell).
"""

from __future__ import annotations

import csv
import io
import json
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from ._rng import derive_seed
from .energy import default_priors
from .errors import InstanceFormatError
from .instance import Instance, generate_instance, load_instance
from .planners import PLANNER_NAMES, PlannerConfig
from .sim import (
    MissionSeeds,
    MissionTrace,
    make_truth,
    run_mission,
    verify_energy_conservation,
    verify_posterior_replay,
)
from .planners import plan_offline
from .solver import AcsParams

__all__ = [
    "InstanceSpec",
    "ExperimentConfig",
    "MetricsRecord",
    "mission_seeds",
    "run_experiment",
    "compute_metrics",
    "theta_sensitivity_sweep",
    "write_metrics_csv",
    "write_timings_csv",
    "load_traces",
    "validate_traces",
]

METRICS_FORMAT = "chargeplan-metrics-v1"

_ROLE_OFFLINE = 1
_ROLE_TRUTH = 2
_ROLE_SOLVER = 3
_ROLE_MC = 4
_ROLE_INSTANCE = 9


@dataclass(frozen=True)
class InstanceSpec:
    """Where an instance comes from: a file, or the generator."""

    path: str | None = None
    n_nodes: int | None = None
    area_side: float = 1000.0
    seed: int | None = None
    name: str = ""

    @classmethod
    def from_dict(cls, doc: dict) -> "InstanceSpec":
        if "path" in doc:
            return cls(path=doc["path"], name=doc.get("name", ""))
        gen = doc.get("generate")
        if gen is None:
            raise InstanceFormatError("instance spec needs 'path' or 'generate'",
                                      field="instances")
        return cls(n_nodes=gen["n_nodes"], area_side=gen.get("area_side", 1000.0),
                   seed=gen.get("seed"), name=gen.get("name", ""))

    def resolve(self, root_seed: int) -> Instance:
        if self.path is not None:
            inst = load_instance(self.path)
            if self.name:
                inst = replace(inst, name=self.name)
            return inst
        if self.n_nodes is None:
            raise InstanceFormatError("instance spec needs 'path' or 'generate'",
                                      field="instances")
        seed = self.seed if self.seed is not None else derive_seed(
            root_seed, _ROLE_INSTANCE, self.n_nodes)
        name = self.name or f"gen{self.n_nodes}"
        return generate_instance(self.n_nodes, self.area_side, seed, name=name)


@dataclass(frozen=True)
class ExperimentConfig:
    instances: tuple[InstanceSpec, ...]
    planners: tuple[str, ...] = ("adapt",)
    delta_mu_grid: tuple[float, ...] = (-0.10, 0.0, 0.10, 0.20)
    delta_sigma_grid: tuple[float, ...] = (-0.10, 0.0, 0.10, 0.20)
    n_executions: int = 50
    root_seed: int = 0
    planner: PlannerConfig = field(default_factory=PlannerConfig)
    output_dir: str | None = None
    n_workers: int = 0

    def __post_init__(self):
        if self.n_executions < 1:
            raise ValueError("n_executions must be >= 1")
        if not self.instances or not self.delta_mu_grid or not self.delta_sigma_grid:
            raise ValueError("instances and both delta grids must be nonempty")
        for p in self.planners:
            if p not in PLANNER_NAMES:
                raise ValueError(f"unknown planner {p!r}")

    @classmethod
    def from_dict(cls, doc: dict) -> "ExperimentConfig":
        planner_doc = dict(doc.get("planner", {}))
        acs_doc = planner_doc.pop("acs", {})
        planner = PlannerConfig(acs=AcsParams(**acs_doc), **planner_doc)
        return cls(
            instances=tuple(InstanceSpec.from_dict(d) for d in doc["instances"]),
            planners=tuple(doc.get("planners", ("adapt",))),
            delta_mu_grid=tuple(doc.get("delta_mu_grid", (-0.10, 0.0, 0.10, 0.20))),
            delta_sigma_grid=tuple(doc.get("delta_sigma_grid", (-0.10, 0.0, 0.10, 0.20))),
            n_executions=doc.get("n_executions", 50),
            root_seed=doc.get("root_seed", 0),
            planner=planner,
            output_dir=doc.get("output_dir"),
            n_workers=doc.get("n_workers", 0),
        )

    @classmethod
    def from_json_file(cls, path) -> "ExperimentConfig":
        with open(path, encoding="utf-8") as fh:
            try:
                doc = json.load(fh)
            except json.JSONDecodeError as exc:
                raise InstanceFormatError(exc.msg, path=path, line=exc.lineno) from exc
        return cls.from_dict(doc)


@dataclass(frozen=True)
class MetricsRecord:
    """Aggregated result of one (instance, planner, cell)."""

    instance: str
    planner: str
    delta_mu: float
    delta_sigma: float
    n_executions: int
    n_success: int
    msr: float
    p_star_mean: float | None
    p_star_sd: float | None
    c_star_mean: float | None
    c_star_sd: float | None
    replan_wall_mean: float | None
    replan_wall_max: float | None
    n_replans: int


def mission_seeds(root_seed: int, execution: int) -> MissionSeeds:
    """Per-execution seeds, shared by every planner and every grid cell."""
    return MissionSeeds(
        offline=derive_seed(root_seed, _ROLE_OFFLINE, execution),
        truth=derive_seed(root_seed, _ROLE_TRUTH, execution),
        solver=derive_seed(root_seed, _ROLE_SOLVER, execution),
        mc=derive_seed(root_seed, _ROLE_MC, execution),
    )


def compute_metrics(traces: Sequence[MissionTrace]) -> MetricsRecord:
    """Pure aggregation of one cell's traces (success-only quality stats)."""
    if not traces:
        raise ValueError("need at least one trace")
    first = traces[0]
    successes = [t for t in traces if t.success]
    p_vals = np.array([t.total_prize for t in successes])
    c_vals = np.array([t.total_cost for t in successes])
    walls = [w for t in traces for w in t.replan_wall_times]
    return MetricsRecord(
        instance=first.instance_name,
        planner=first.planner,
        delta_mu=first.delta_mu,
        delta_sigma=first.delta_sigma,
        n_executions=len(traces),
        n_success=len(successes),
        msr=len(successes) / len(traces),
        p_star_mean=float(p_vals.mean()) if successes else None,
        p_star_sd=float(p_vals.std(ddof=1)) if len(successes) > 1 else None,
        c_star_mean=float(c_vals.mean()) if successes else None,
        c_star_sd=float(c_vals.std(ddof=1)) if len(successes) > 1 else None,
        replan_wall_mean=float(np.mean(walls)) if walls else None,
        replan_wall_max=float(np.max(walls)) if walls else None,
        n_replans=len(walls),
    )


def _offline_task(args):
    key, instance, acs = args
    return key, plan_offline(instance,
                             default_priors(instance.flight.uav_mass,
                                            instance.flight.air_density), acs)


def _mission_task(args):
    key, instance, planner, delta_mu, delta_sigma, seeds, config, offline_path = args
    priors = default_priors(instance.flight.uav_mass, instance.flight.air_density)
    truth = make_truth(priors, delta_mu, delta_sigma)
    trace = run_mission(instance, planner, truth, seeds, config=config,
                        offline_path=offline_path)
    return key, trace.to_dict()


def _map_tasks(task_fn, tasks, n_workers):
    if n_workers <= 1:
        return [task_fn(t) for t in tasks]
    results = []
    with ProcessPoolExecutor(max_workers=n_workers) as pool:
        for res in pool.map(task_fn, tasks, chunksize=4):
            results.append(res)
    return results


def run_experiment(config: ExperimentConfig,
                   ) -> tuple[list[MetricsRecord], dict[tuple, list[MissionTrace]]]:
    """Run the full grid; returns metrics records and traces grouped by cell.

    Within one execution index, every planner and every cell share the
    instance, the offline route and the truth noise stream. When
    ``config.output_dir`` is set, CSVs and trace archives are written there.
    """
    n_workers = config.n_workers or (os.cpu_count() or 1)
    instances = [(spec.resolve(config.root_seed)) for spec in config.instances]

    offline_tasks = []
    for inst in instances:
        for e in range(config.n_executions):
            seeds = mission_seeds(config.root_seed, e)
            acs = replace(config.planner.acs, rng_seed=seeds.offline)
            offline_tasks.append(((inst.name, e), inst, acs))
    offline_paths = dict(_map_tasks(_offline_task, offline_tasks, n_workers))

    mission_tasks = []
    for inst in instances:
        for planner in config.planners:
            for dmu in config.delta_mu_grid:
                for dsig in config.delta_sigma_grid:
                    for e in range(config.n_executions):
                        key = (inst.name, planner, dmu, dsig, e)
                        mission_tasks.append((
                            key, inst, planner, dmu, dsig,
                            mission_seeds(config.root_seed, e), config.planner,
                            offline_paths[(inst.name, e)],
                        ))
    results = _map_tasks(_mission_task, mission_tasks, n_workers)
    results.sort(key=lambda kv: kv[0])

    grouped: dict[tuple, list[MissionTrace]] = {}
    for key, trace_doc in results:
        cell = key[:4]
        grouped.setdefault(cell, []).append(MissionTrace.from_dict(trace_doc))

    records = [compute_metrics(traces) for _, traces in sorted(grouped.items())]

    if config.output_dir:
        out = Path(config.output_dir)
        out.mkdir(parents=True, exist_ok=True)
        write_metrics_csv(records, out / "metrics.csv")
        write_timings_csv(records, out / "timings.csv")
        trace_dir = out / "traces"
        trace_dir.mkdir(exist_ok=True)
        for (inst_name, planner, dmu, dsig), traces in sorted(grouped.items()):
            fname = (f"{inst_name}_{planner}_mu{int(round(dmu * 100)):+d}"
                     f"_sd{int(round(dsig * 100)):+d}.jsonl")
            with open(trace_dir / fname, "w", encoding="utf-8") as fh:
                for trace in traces:
                    fh.write(trace.to_json() + "\n")
    return records, grouped


def theta_sensitivity_sweep(config: ExperimentConfig,
                            theta_min_grid: Sequence[float],
                            ) -> list[tuple[float, MetricsRecord]]:
    """Re-run the experiment once per minimum confidence level.

    Requires the adaptive planner in the planner list; seeding follows the
    exact same discipline as the base experiment.
    """
    if "adapt" not in config.planners:
        raise ValueError("theta sweep requires the 'adapt' planner")
    rows: list[tuple[float, MetricsRecord]] = []
    for theta_min in theta_min_grid:
        sub_out = None
        if config.output_dir:
            sub_out = str(Path(config.output_dir) / f"theta_{theta_min:g}")
        sub = replace(config,
                      planner=replace(config.planner, theta_min=float(theta_min)),
                      output_dir=sub_out)
        records, _ = run_experiment(sub)
        rows.extend((float(theta_min), rec) for rec in records)
    if config.output_dir:
        write_theta_sweep_csv(rows, Path(config.output_dir) / "theta_sweep.csv")
    return rows


# ---------------------------------------------------------------------------
# CSV / trace IO
# ---------------------------------------------------------------------------

def _fmt(value) -> str:
    if value is None:
        return "N/A"
    if isinstance(value, float):
        return repr(value)
    return str(value)

_METRIC_COLUMNS = ("instance", "planner", "delta_mu", "delta_sigma",
                   "n_executions", "n_success", "msr",
                   "p_star_mean", "p_star_sd", "c_star_mean", "c_star_sd")


def write_metrics_csv(records: Sequence[MetricsRecord], path) -> None:
    """Deterministic metrics table; wall-clock stats go to timings.csv."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        fh.write(f"# {METRICS_FORMAT}\n")
        writer = csv.writer(fh)
        writer.writerow(_METRIC_COLUMNS)
        for r in records:
            writer.writerow([_fmt(getattr(r, c)) for c in _METRIC_COLUMNS])


def write_timings_csv(records: Sequence[MetricsRecord], path) -> None:
    cols = ("instance", "planner", "delta_mu", "delta_sigma", "n_replans",
            "replan_wall_mean", "replan_wall_max")
    with open(path, "w", newline="", encoding="utf-8") as fh:
        fh.write(f"# {METRICS_FORMAT}\n")
        writer = csv.writer(fh)
        writer.writerow(cols)
        for r in records:
            writer.writerow([_fmt(getattr(r, c)) for c in cols])


def write_theta_sweep_csv(rows: Sequence[tuple[float, MetricsRecord]], path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        fh.write(f"# {METRICS_FORMAT}\n")
        writer = csv.writer(fh)
        writer.writerow(("theta_min",) + _METRIC_COLUMNS)
        for theta_min, r in rows:
            writer.writerow([_fmt(theta_min)] + [_fmt(getattr(r, c)) for c in _METRIC_COLUMNS])


def read_metrics_csv(path) -> list[dict]:
    with open(path, encoding="utf-8") as fh:
        lines = [ln for ln in fh if not ln.startswith("#")]
    rows = []
    for row in csv.DictReader(io.StringIO("".join(lines))):
        parsed = {}
        for key, val in row.items():
            if key in ("instance", "planner"):
                parsed[key] = val
            elif val == "N/A":
                parsed[key] = None
            elif key in ("n_executions", "n_success", "n_replans"):
                parsed[key] = int(val)
            else:
                parsed[key] = float(val)
        rows.append(parsed)
    return rows


def load_traces(path) -> list[MissionTrace]:
    """Read one JSONL trace archive."""
    traces = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                traces.append(MissionTrace.from_json(line))
    return traces


def validate_traces(paths: Iterable, sample: int | None = None,
                    seed: int = 0) -> int:
    """Audit trace archives: energy conservation and posterior replay.

    Returns the number of traces checked; raises ValueError on the first
    violation. ``sample`` limits the audit to a random subset.
    """
    traces: list[MissionTrace] = []
    for path in paths:
        traces.extend(load_traces(path))
    if not traces:
        raise ValueError("no traces found")
    if sample is not None and sample < len(traces):
        rng = np.random.Generator(np.random.Philox(np.random.SeedSequence(seed)))
        idx = rng.choice(len(traces), size=sample, replace=False)
        traces = [traces[i] for i in sorted(idx)]
    for trace in traces:
        verify_energy_conservation(trace)
        verify_posterior_replay(trace)
    return len(traces)
