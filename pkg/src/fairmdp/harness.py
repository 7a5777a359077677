"""Experiment orchestration: config loading, per-seed runs, CSV and manifest output.

One experiment runs a mode (plan, online, offline, pg, oracle) for every seed
in the config. Seed ``n`` writes ``seed-<n>.csv``; the final reduction writes
``aggregate.csv`` with mean/min/max per column and ``manifest.json`` with the
config echo, package versions and wall times.
"""

from __future__ import annotations

import csv
import dataclasses
import json
import logging
import math
import platform
import time
import traceback
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import tomli

from .fairness import FairnessObjective
from .mdp import RandomMdpConfig, TabularMdp, exact_agent_values, generate_random_mdp
from .occupancy import policy_from_q
from .offline import Dataset, build_pessimistic_model, evaluate_suboptimality, generate_dataset, solve_offline, suboptimality_bound
from .online import run_online
from .oracle import OracleBudgetError, brute_force_oracle, grid_size
from .pgrad import PgConfig, run_policy_gradient, softmax_policy
from .seeding import ALGORITHM_STREAM, DATA_STREAM, make_rng
from .solver import SolveResult, SolverConfig, solve_fair_plan

logger = logging.getLogger(__name__)

MODES = ("plan", "online", "offline", "pg", "oracle")
EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME = 0, 2, 3

# finest grid the reference optimum tries before falling back to coarser ones
REFERENCE_GRIDS = (0.02, 0.05, 0.1, 0.25, 0.5)


class ConfigError(ValueError):
    pass


@dataclass
class ExperimentConfig:
    mode: str
    fairness: str = "max-min"
    seeds: list = field(default_factory=lambda: [0])
    out: str = "runs"
    mdp: RandomMdpConfig = field(default_factory=RandomMdpConfig)
    # pin one instance for every seed; None draws instance ``seed`` per run
    mdp_seed: int | None = None
    mdp_path: str | None = None
    episodes: int = 600
    delta: float = 0.1
    width_scale: float = 1.0
    dataset_size: int = 1000
    data: str | None = None
    solver: SolverConfig = field(default_factory=SolverConfig)
    pg: PgConfig = field(default_factory=PgConfig)
    grid_step: float = 0.1
    dump_policy: bool = False
    parallelism: int = 1

    def validate(self) -> None:
        if self.mode not in MODES:
            raise ConfigError(f"mode must be one of {MODES}, got {self.mode!r}")
        if not self.seeds:
            raise ConfigError("seeds must be a non-empty list")
        if not 0 < self.grid_step <= 0.5:
            raise ConfigError("grid_step must lie in (0, 0.5]")
        if not 0 < self.delta < 1:
            raise ConfigError("delta must lie in (0, 1)")
        if self.mode == "online" and self.episodes < 1:
            raise ConfigError("online mode needs episodes >= 1")
        if self.mode == "offline" and self.data is None and self.dataset_size < 1:
            raise ConfigError("offline mode needs a data file or dataset_size >= 1")
        if self.parallelism < 1:
            raise ConfigError("parallelism must be at least 1")
        try:
            self.mdp.validate()
            self.objective()
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc

    def objective(self) -> FairnessObjective:
        return FairnessObjective.parse(self.fairness, epsilon=self.mdp.epsilon)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


_SECTIONS = {"mdp": RandomMdpConfig, "solver": SolverConfig, "pg": PgConfig}


def config_from_dict(raw: dict) -> ExperimentConfig:
    raw = dict(raw)
    kwargs = {}
    names = {f.name for f in dataclasses.fields(ExperimentConfig)}
    try:
        for key, cls in _SECTIONS.items():
            if key in raw:
                kwargs[key] = cls(**raw.pop(key))
        unknown = set(raw) - names
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        kwargs.update(raw)
        if "mode" not in kwargs:
            raise ConfigError("config must set mode")
        cfg = ExperimentConfig(**kwargs)
    except (TypeError, ValueError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(str(exc)) from exc
    cfg.seeds = [int(s) for s in cfg.seeds]
    cfg.validate()
    return cfg


def load_config(path: str | Path, overrides: dict | None = None) -> ExperimentConfig:
    """Read a TOML config; ``overrides`` uses the same layout and wins key by key."""
    try:
        with open(path, "rb") as fh:
            raw = tomli.load(fh)
    except (OSError, tomli.TOMLDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return config_from_dict(merge(raw, overrides or {}))


def merge(base: dict, overrides: dict) -> dict:
    out = dict(base)
    for k, v in overrides.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = merge(out[k], v)
        else:
            out[k] = v
    return out


def instance_for(cfg: ExperimentConfig, seed: int) -> TabularMdp:
    if cfg.mdp_path:
        return TabularMdp.load(cfg.mdp_path)
    mdp_seed = seed if cfg.mdp_seed is None else cfg.mdp_seed
    return generate_random_mdp(dataclasses.replace(cfg.mdp, seed=mdp_seed))


def reference_optimum(mdp: TabularMdp, objective: FairnessObjective, cfg: SolverConfig | None = None):
    """Best of the Frank-Wolfe solution and the finest affordable grid oracle.

    Returns ``(value, solve_result)``.
    """
    res = solve_fair_plan(mdp.reward, mdp.transition, mdp.initial_distribution, objective, cfg)
    best = res.value
    for step in REFERENCE_GRIDS:
        try:
            best = max(best, brute_force_oracle(mdp, objective, step).value)
            break
        except OracleBudgetError:
            continue
    return best, res


def _fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return str(int(x))
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return repr(float(x))


def write_rows(path: Path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(x) for x in row])


def _value_cols(n: int) -> list[str]:
    return [f"value_{i + 1}" for i in range(n)]


def _dump_policy(path: Path, policy: np.ndarray, occupancy: np.ndarray | None = None) -> None:
    doc = {"shape": list(policy.shape), "policy": np.asarray(policy).ravel().tolist()}
    if occupancy is not None:
        doc["occupancy_shape"] = list(occupancy.shape)
        doc["occupancy"] = np.asarray(occupancy).ravel().tolist()
    with open(path, "w") as fh:
        json.dump(doc, fh)


def _plan_row(res: SolveResult) -> list:
    return [res.value, *res.agent_values, res.gap, res.iterations, res.converged]


def run_seed(cfg: ExperimentConfig, seed: int, out_dir: Path) -> Path:
    """Run one seed of the configured mode and write ``seed-<n>.csv``."""
    objective = cfg.objective()
    mdp = instance_for(cfg, seed)
    N = mdp.num_agents
    path = out_dir / f"seed-{seed}.csv"
    policy = occupancy = None

    if cfg.mode == "plan":
        res = solve_fair_plan(mdp.reward, mdp.transition, mdp.initial_distribution, objective, cfg.solver)
        occupancy = res.occupancy
        policy = policy_from_q(occupancy)
        write_rows(path, ["fair_value", *_value_cols(N), "solver_gap", "iterations", "converged"], [_plan_row(res)])
    elif cfg.mode == "oracle":
        res = brute_force_oracle(mdp, objective, cfg.grid_step)
        policy = res.policy
        values = exact_agent_values(mdp, res.policy)
        write_rows(
            path,
            ["oracle_value", *_value_cols(N), "error_bound", "num_policies"],
            [[res.value, *values, res.error_bound, res.num_policies]],
        )
    elif cfg.mode == "online":
        optimum, _ = reference_optimum(mdp, objective, cfg.solver)
        run = run_online(
            mdp, objective, cfg.episodes, cfg.delta, cfg.solver, width_scale=cfg.width_scale,
            rng=make_rng(seed, ALGORITHM_STREAM),
        )
        run.to_csv(path, optimum)
        policy = run.policies[-1]
    elif cfg.mode == "offline":
        if cfg.data:
            data = Dataset.load_jsonl(cfg.data)
        else:
            data = generate_dataset(mdp, cfg.dataset_size, make_rng(seed, DATA_STREAM), seed=seed)
        optimum, opt_res = reference_optimum(mdp, objective, cfg.solver)
        model = build_pessimistic_model(data, cfg.delta, mdp.epsilon, cfg.width_scale)
        result = solve_offline(model, objective, mdp.initial_distribution, cfg.solver)
        policy = result.policy
        true_values = exact_agent_values(mdp, policy)
        write_rows(
            path,
            ["dataset_size", "fair_value", "optimal_value", "suboptimality", "bound", "assumption_holds",
             *_value_cols(N), *[f"pessimistic_{i + 1}" for i in range(N)]],
            [[
                len(data),
                objective.guarded_value(true_values),
                optimum,
                evaluate_suboptimality(policy, mdp, objective, optimum),
                suboptimality_bound(model, objective, opt_res.occupancy),
                result.assumption_holds,
                *true_values,
                *result.agent_values,
            ]],
        )
    elif cfg.mode == "pg":
        pg_cfg = dataclasses.replace(cfg.pg, seed=seed)
        res = run_policy_gradient(mdp, objective, pg_cfg, rng=make_rng(seed, ALGORITHM_STREAM))
        res.to_csv(path)
        policy = softmax_policy(res.theta)
    if cfg.dump_policy and policy is not None:
        _dump_policy(out_dir / f"policy-{seed}.json", policy, occupancy)
    return path


def _run_seed_safe(cfg: ExperimentConfig, seed: int, out_dir: Path) -> dict:
    start = time.perf_counter()
    try:
        run_seed(cfg, seed, out_dir)
        status = {"seed": seed, "ok": True}
    except Exception as exc:  # recorded with seed context, other seeds keep running
        logger.error("seed %d failed: %s", seed, exc)
        status = {"seed": seed, "ok": False, "error": f"{type(exc).__name__}: {exc}", "traceback": traceback.format_exc()}
    status["wall_time_s"] = time.perf_counter() - start
    return status


def read_numeric_csv(path: Path):
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    return rows[0], np.asarray([[float(x) for x in r] for r in rows[1:]], dtype=float)


def aggregate(paths: list[Path], out_path: Path) -> None:
    """Row-wise mean/min/max of every column across seed CSVs.

    The leading index column (k or iteration) is kept as is when present.
    Runs of different lengths are truncated to the shortest one.
    """
    tables = [read_numeric_csv(p) for p in paths]
    header = tables[0][0]
    length = min(t[1].shape[0] for t in tables)
    stack = np.stack([t[1][:length] for t in tables])  # (seeds, rows, cols)
    keep_index = header[0] in ("k", "iteration")
    cols = range(1, len(header)) if keep_index else range(len(header))
    out_header = ([header[0]] if keep_index else []) + [f"{header[c]}_{stat}" for c in cols for stat in ("mean", "min", "max")]
    rows = []
    for r in range(length):
        row = [int(stack[0, r, 0])] if keep_index else []
        for c in cols:
            col = stack[:, r, c]
            row += [col.mean(), col.min(), col.max()]
        rows.append(row)
    write_rows(out_path, out_header, rows)


def _versions() -> dict:
    from importlib import metadata

    out = {"python": platform.python_version(), "numpy": np.__version__}
    try:
        out["artifact"] = metadata.version("artifact")
    except metadata.PackageNotFoundError:
        out["artifact"] = "unknown"
    return out


def run_experiment(cfg: ExperimentConfig) -> int:
    """Run every seed, aggregate, write the manifest; returns the exit status."""
    try:
        cfg.validate()
    except ConfigError as exc:
        logger.error("%s", exc)
        return EXIT_CONFIG
    if cfg.mode == "oracle":
        try:
            total = grid_size(instance_for(cfg, cfg.seeds[0]), cfg.grid_step)
        except (OSError, ValueError) as exc:
            logger.error("%s", exc)
            return EXIT_CONFIG
        logger.info("oracle grid has %d policies", total)
    out_dir = Path(cfg.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    start = time.perf_counter()
    if cfg.parallelism > 1 and len(cfg.seeds) > 1:
        with ProcessPoolExecutor(max_workers=cfg.parallelism) as pool:
            statuses = list(pool.map(_run_seed_safe, [cfg] * len(cfg.seeds), cfg.seeds, [out_dir] * len(cfg.seeds)))
    else:
        statuses = [_run_seed_safe(cfg, s, out_dir) for s in cfg.seeds]
    done = [out_dir / f"seed-{s['seed']}.csv" for s in statuses if s["ok"]]
    if done:
        aggregate(done, out_dir / "aggregate.csv")
    manifest = {
        "config": cfg.to_dict(),
        "versions": _versions(),
        "seeds": statuses,
        "wall_time_s": time.perf_counter() - start,
    }
    with open(out_dir / "manifest.json", "w") as fh:
        json.dump(manifest, fh, indent=2, default=_json_default)
    return EXIT_OK if all(s["ok"] for s in statuses) else EXIT_RUNTIME


def _json_default(x):
    if isinstance(x, np.generic):
        return x.item()
    if isinstance(x, float) and math.isnan(x):
        return None
    raise TypeError(f"not serializable: {type(x).__name__}")
