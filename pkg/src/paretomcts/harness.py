"""Experiment orchestration: config grids, seeded episodes, metrics, CSV I/O.

Episodes within a configuration are independent and reproducible: episode i
always runs with a seed mixed from (base seed, i), so results are identical
whether episodes execute serially or on a process pool.
"""

from __future__ import annotations

import ast
import configparser
import csv
import io
import math
import random
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Optional, Sequence

from .baselines import ccpomcp_plan_episode, ramcp_plan_episode
from .cmdp import GenerativeModel, ProblemSpec, RunRecord, random_tabular_cmdp
from .envs import DATASETS, load_dataset
from .envs.counterexample import cmdp_a
from .envs.delivery import DeliveryEnv, make_delivery_config
from .envs.gridworld import GridworldConfig, GridworldEnv, parse_map
from .tuct import PlannerConfig, ThresholdUCT

ALGORITHMS = ("tuct", "ccpomcp", "ramcp")
ENVIRONMENTS = ("cmdp_a", "random_cmdp", "gridworld", "delivery")

# one-sided 0.95 normal quantile used by the weak-satisfaction test
Z_95 = 1.6449

EPISODE_COLUMNS = (
    "config_id",
    "algorithm",
    "env",
    "delta",
    "seed",
    "episode",
    "payoff",
    "cost",
    "steps",
    "samples_per_step",
    "wall_ms_per_step",
)
SUMMARY_COLUMNS = (
    "config_id",
    "algorithm",
    "r_hat",
    "c_hat",
    "cost_std",
    "sat_m",
    "sat_w",
    "mean_samples",
)


@dataclass(frozen=True)
class ExperimentConfig:
    """One experimental cell: environment, algorithm, budget, and seeding."""

    config_id: str
    algorithm: str
    env: str
    delta: float
    horizon: int
    gamma_r: float = 1.0
    gamma_c: float = 1.0
    iterations_per_step: Optional[int] = 1000
    time_per_step_ms: Optional[float] = None
    exploration: float = 5.0
    episodes: int = 300
    seed: int = 0
    use_exact_dynamics: bool = False
    lp_backend: str = "bland"
    # environment parameters as a sorted tuple of (key, value) pairs so the
    # config stays hashable and picklable
    env_params: tuple = ()

    def __post_init__(self):
        if self.algorithm not in ALGORITHMS:
            raise ValueError(f"unknown algorithm {self.algorithm!r}; expected one of {ALGORITHMS}")
        if self.env not in ENVIRONMENTS:
            raise ValueError(f"unknown environment {self.env!r}; expected one of {ENVIRONMENTS}")
        if self.episodes < 2:
            raise ValueError("at least 2 episodes are required for the statistics")
        if self.delta < 0.0:
            raise ValueError("cost threshold must be nonnegative")
        object.__setattr__(self, "env_params", tuple(sorted(self.env_params)))

    def param(self, key: str, default=None):
        for k, v in self.env_params:
            if k == key:
                return v
        return default


@dataclass(frozen=True)
class MetricsSummary:
    """Aggregate metrics for one configuration."""

    config_id: str
    algorithm: str
    r_hat: float
    c_hat: float
    cost_std: float
    sat_m: bool
    sat_w: bool
    mean_samples: float


# -- metrics ---------------------------------------------------------------


def sat_mean(c_hat: float, delta: float) -> bool:
    """Mean satisfaction: the empirical mean cost is within the threshold."""
    return c_hat <= delta + 1e-12


def sat_weak(costs: Sequence[float], delta: float) -> bool:
    """Weak satisfaction: reject "expected cost exceeds delta + 0.05" at 5%.

    One-sided one-sample test with a normal critical value; zero-variance
    samples fall back to comparing the mean directly.
    """
    n = len(costs)
    if n < 2:
        raise ValueError("the weak-satisfaction test needs at least 2 samples")
    mean = sum(costs) / n
    var = sum((c - mean) ** 2 for c in costs) / (n - 1)
    bound = delta + 0.05
    if var <= 0.0:
        return mean <= bound + 1e-12
    statistic = (mean - bound) / math.sqrt(var / n)
    return statistic <= -Z_95


def summarize(config: ExperimentConfig, records: Sequence[RunRecord]) -> MetricsSummary:
    """Aggregate per-episode records into the configuration's summary row."""
    n = len(records)
    if n < 2:
        raise ValueError("at least 2 episode records are required")
    payoffs = [r.payoff for r in records]
    costs = [r.cost for r in records]
    c_hat = sum(costs) / n
    cost_var = sum((c - c_hat) ** 2 for c in costs) / (n - 1)
    mean_samples = sum(r.samples / max(r.steps, 1) for r in records) / n
    return MetricsSummary(
        config_id=config.config_id,
        algorithm=config.algorithm,
        r_hat=sum(payoffs) / n,
        c_hat=c_hat,
        cost_std=math.sqrt(cost_var),
        sat_m=sat_mean(c_hat, config.delta),
        sat_w=sat_weak(costs, config.delta),
        mean_samples=mean_samples,
    )


def joint_payoff_comparison(
    tuct_summaries: Sequence[MetricsSummary], baseline_summaries: Sequence[MetricsSummary]
) -> tuple[list[str], float, float]:
    """Mean payoffs over the configs both algorithms weakly satisfy.

    Summaries are matched by config_id; returns the joint config ids and the
    two mean payoffs (nan when the joint set is empty).
    """
    by_id = {s.config_id: s for s in baseline_summaries}
    joint = [
        (t, by_id[t.config_id])
        for t in tuct_summaries
        if t.sat_w and t.config_id in by_id and by_id[t.config_id].sat_w
    ]
    if not joint:
        return [], math.nan, math.nan
    ids = [t.config_id for t, _b in joint]
    mean_t = sum(t.r_hat for t, _b in joint) / len(joint)
    mean_b = sum(b.r_hat for _t, b in joint) / len(joint)
    return ids, mean_t, mean_b


# -- environment and planner construction -----------------------------------


def episode_seed(base_seed: int, episode: int) -> int:
    """Mix (base seed, episode index) into an independent 64-bit seed."""
    z = (base_seed * 0x9E3779B97F4A7C15 + episode + 1) & 0xFFFFFFFFFFFFFFFF
    z = (z + 0x9E3779B97F4A7C15) & 0xFFFFFFFFFFFFFFFF
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & 0xFFFFFFFFFFFFFFFF
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & 0xFFFFFFFFFFFFFFFF
    return z ^ (z >> 31)


def build_model(config: ExperimentConfig, episode: int) -> GenerativeModel:
    """Instantiate the episode's environment from the config parameters.

    Gridworld configs naming a dataset without a fixed map index rotate over
    the dataset's maps by episode index.
    """
    if config.env == "cmdp_a":
        return cmdp_a()
    if config.env == "random_cmdp":
        return random_tabular_cmdp(
            random.Random(int(config.param("env_seed", 0))),
            n_states=int(config.param("n_states", 4)),
            n_actions=int(config.param("n_actions", 2)),
        )
    if config.env == "gridworld":
        map_text = config.param("map_text")
        if map_text is not None:
            gmap = parse_map(map_text)
        else:
            dataset = config.param("dataset", DATASETS[0])
            maps = load_dataset(dataset)
            index = config.param("map_index")
            gmap = maps[int(index) if index is not None else episode % len(maps)]
        mode = config.param("mode", "avoid")
        return GridworldEnv(
            gmap,
            GridworldConfig(
                mode=mode,
                p_trap=float(config.param("p_trap", 0.2)),
                p_slide=float(config.param("p_slide", 0.0)),
            ),
        )
    delivery = make_delivery_config(
        seed=int(config.param("env_seed", 0)),
        n_junctions=int(config.param("n_junctions", 20)),
        n_points=int(config.param("n_points", 3)),
        period=int(config.param("period", 8)),
        radius=int(config.param("radius", 3)),
        delay=int(config.param("delay", 5)),
    )
    return DeliveryEnv(delivery)


def _planner_config(config: ExperimentConfig) -> PlannerConfig:
    return PlannerConfig(
        exploration=config.exploration,
        iterations_per_step=config.iterations_per_step,
        time_per_step_ms=config.time_per_step_ms,
        use_exact_dynamics=config.use_exact_dynamics,
    )


def run_episode(config: ExperimentConfig, episode: int) -> RunRecord:
    """Run one seeded episode of the configured algorithm."""
    rng = random.Random(episode_seed(config.seed, episode))
    pconfig = _planner_config(config)
    try:
        model = build_model(config, episode)
        spec = ProblemSpec.for_model(
            model,
            horizon=config.horizon,
            gamma_r=config.gamma_r,
            gamma_c=config.gamma_c,
            initial_threshold=config.delta,
        )
        if config.algorithm == "tuct":
            return ThresholdUCT(model, spec, pconfig).plan_episode(rng)
        if config.algorithm == "ccpomcp":
            return ccpomcp_plan_episode(model, spec, pconfig, rng)
        return ramcp_plan_episode(model, spec, pconfig, rng, lp_backend=config.lp_backend)
    except Exception as exc:
        raise RuntimeError(
            f"episode {episode} of {config.config_id!r} failed "
            f"(seed {episode_seed(config.seed, episode)}): {exc}"
        ) from exc


def run_experiment(
    config: ExperimentConfig, threads: int = 1
) -> tuple[list[RunRecord], MetricsSummary]:
    """Run all episodes of a configuration and aggregate the metrics.

    With threads > 1 episodes execute on a process pool; results are sorted
    by episode index either way, so the output is independent of scheduling.
    """
    indices = range(config.episodes)
    if threads > 1:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            records = list(pool.map(run_episode, [config] * config.episodes, indices))
    else:
        records = [run_episode(config, i) for i in indices]
    return records, summarize(config, records)


# -- CSV I/O ----------------------------------------------------------------


def write_episode_csv(
    out, config: ExperimentConfig, records: Sequence[RunRecord], header: bool = True
) -> None:
    """Append one row per episode to a text stream in the episode schema."""
    writer = csv.writer(out, lineterminator="\n")
    if header:
        writer.writerow(EPISODE_COLUMNS)
    for i, rec in enumerate(records):
        writer.writerow(
            [
                config.config_id,
                config.algorithm,
                config.env,
                repr(config.delta),
                config.seed,
                i,
                repr(rec.payoff),
                repr(rec.cost),
                rec.steps,
                repr(rec.samples / max(rec.steps, 1)),
                repr(rec.wall_ms_per_step),
            ]
        )


def write_summary_csv(out, summaries: Sequence[MetricsSummary], header: bool = True) -> None:
    """Append one row per configuration to a text stream in the summary schema."""
    writer = csv.writer(out, lineterminator="\n")
    if header:
        writer.writerow(SUMMARY_COLUMNS)
    for s in summaries:
        writer.writerow(
            [
                s.config_id,
                s.algorithm,
                repr(s.r_hat),
                repr(s.c_hat),
                repr(s.cost_std),
                int(s.sat_m),
                int(s.sat_w),
                repr(s.mean_samples),
            ]
        )


def read_episode_csv(text: str) -> list[dict]:
    """Parse an episode CSV back into typed row dictionaries."""
    rows = list(csv.DictReader(io.StringIO(text)))
    missing = set(EPISODE_COLUMNS) - (set(rows[0]) if rows else set(EPISODE_COLUMNS))
    if missing:
        raise ValueError(f"episode CSV is missing columns: {sorted(missing)}")
    for row in rows:
        for key in ("delta", "payoff", "cost", "samples_per_step", "wall_ms_per_step"):
            row[key] = float(row[key])
        for key in ("seed", "episode", "steps"):
            row[key] = int(row[key])
    return rows


def read_summary_csv(text: str) -> list[MetricsSummary]:
    """Parse a summary CSV back into MetricsSummary values."""
    rows = list(csv.DictReader(io.StringIO(text)))
    missing = set(SUMMARY_COLUMNS) - (set(rows[0]) if rows else set(SUMMARY_COLUMNS))
    if missing:
        raise ValueError(f"summary CSV is missing columns: {sorted(missing)}")
    return [
        MetricsSummary(
            config_id=row["config_id"],
            algorithm=row["algorithm"],
            r_hat=float(row["r_hat"]),
            c_hat=float(row["c_hat"]),
            cost_std=float(row["cost_std"]),
            sat_m=bool(int(row["sat_m"])),
            sat_w=bool(int(row["sat_w"])),
            mean_samples=float(row["mean_samples"]),
        )
        for row in rows
    ]


# -- experiment config files -------------------------------------------------

_SCALAR_KEYS = {
    "algorithm": str,
    "env": str,
    "delta": float,
    "horizon": int,
    "gamma_r": float,
    "gamma_c": float,
    "iterations_per_step": int,
    "time_per_step_ms": float,
    "exploration": float,
    "episodes": int,
    "seed": int,
    "use_exact_dynamics": lambda s: s.strip().lower() in ("1", "true", "yes"),
    "lp_backend": str,
}


def _parse_values(raw: str, convert):
    """Parse a scalar or a comma-separated grid axis from a config value."""
    parts = [p.strip() for p in raw.split(",")] if "," in raw else [raw.strip()]
    return [convert(p) for p in parts]


def parse_experiment_configs(text: str) -> list[ExperimentConfig]:
    """Expand an INI-style experiment file into a flat list of configurations.

    Each section is one experiment; comma-separated values form a grid axis
    and the section expands to the axes' cartesian product. Keys that are not
    planner settings are passed through as environment parameters.
    """
    parser = configparser.ConfigParser()
    parser.read_string(text)
    configs: list[ExperimentConfig] = []
    for section in parser.sections():
        axes: list[tuple[str, list]] = []
        env_axes: list[tuple[str, list]] = []
        for key, raw in parser.items(section):
            if key in _SCALAR_KEYS:
                axes.append((key, _parse_values(raw, _SCALAR_KEYS[key])))
            else:
                env_axes.append((key, _parse_values(raw, _literal)))
        combos = [{}]
        for key, values in axes + env_axes:
            combos = [dict(c, **{key: v}) for c in combos for v in values]
        grid = len(combos) > 1
        for i, combo in enumerate(combos):
            env_params = tuple((k, combo.pop(k)) for k, _v in env_axes)
            config_id = f"{section}/{i}" if grid else section
            configs.append(ExperimentConfig(config_id=config_id, env_params=env_params, **combo))
    return configs


def _literal(raw: str):
    try:
        return ast.literal_eval(raw)
    except (ValueError, SyntaxError):
        return raw
