"""Tests for the experiment harness: metrics, seeding, CSV I/O, and configs."""

import io
import math
import statistics

import pytest

from paretomcts.cmdp import RunRecord, TabularCMDP
from paretomcts.harness import (
    EPISODE_COLUMNS,
    SUMMARY_COLUMNS,
    ExperimentConfig,
    MetricsSummary,
    build_model,
    episode_seed,
    joint_payoff_comparison,
    parse_experiment_configs,
    read_episode_csv,
    read_summary_csv,
    run_experiment,
    sat_mean,
    sat_weak,
    summarize,
    write_episode_csv,
    write_summary_csv,
)


def make_config(**overrides):
    base = dict(
        config_id="test",
        algorithm="tuct",
        env="cmdp_a",
        delta=0.5,
        horizon=2,
        iterations_per_step=50,
        episodes=4,
        seed=7,
    )
    base.update(overrides)
    return ExperimentConfig(**base)


def make_summary(config_id, r_hat, sat_w, algorithm="tuct"):
    return MetricsSummary(
        config_id=config_id,
        algorithm=algorithm,
        r_hat=r_hat,
        c_hat=0.0,
        cost_std=0.0,
        sat_m=True,
        sat_w=sat_w,
        mean_samples=1.0,
    )


class TestExperimentConfig:
    def test_rejects_unknown_algorithm(self):
        with pytest.raises(ValueError, match="algorithm"):
            make_config(algorithm="qlearning")

    def test_rejects_unknown_environment(self):
        with pytest.raises(ValueError, match="environment"):
            make_config(env="cartpole")

    def test_rejects_single_episode(self):
        with pytest.raises(ValueError, match="episodes"):
            make_config(episodes=1)

    def test_rejects_negative_threshold(self):
        with pytest.raises(ValueError, match="threshold"):
            make_config(delta=-0.1)

    def test_env_params_lookup_and_default(self):
        config = make_config(env_params=(("p_trap", 0.3),))
        assert config.param("p_trap") == 0.3
        assert config.param("missing", 42) == 42

    def test_env_params_order_is_normalized(self):
        a = make_config(env_params=(("b", 2), ("a", 1)))
        b = make_config(env_params=(("a", 1), ("b", 2)))
        assert a == b


class TestEpisodeSeed:
    def test_deterministic(self):
        assert episode_seed(7, 3) == episode_seed(7, 3)

    def test_distinct_across_episodes_and_bases(self):
        seeds = {episode_seed(base, i) for base in range(20) for i in range(50)}
        assert len(seeds) == 20 * 50

    def test_fits_in_64_bits(self):
        for i in range(100):
            assert 0 <= episode_seed(123456789, i) < 2**64


class TestSatMean:
    def test_boundary_is_satisfied(self):
        assert sat_mean(0.3, 0.3)

    def test_excess_is_not(self):
        assert not sat_mean(0.31, 0.3)

    def test_zero_zero(self):
        assert sat_mean(0.0, 0.0)


class TestSatWeak:
    def test_all_zero_costs(self):
        assert sat_weak([0.0] * 300, 0.0)

    def test_constant_costs_above_bound(self):
        assert not sat_weak([0.5 + 0.2] * 300, 0.5)

    def test_mean_exactly_at_bound_with_variance(self):
        costs = [0.50, 0.60] * 150  # mean 0.55 = delta + 0.05 exactly
        assert statistics.mean(costs) == pytest.approx(0.55)
        assert not sat_weak(costs, 0.5)

    def test_statistic_matches_direct_evaluation(self):
        costs = [0.4 + 0.01 * (i % 5) for i in range(300)]
        mean = statistics.mean(costs)
        se = statistics.stdev(costs) / math.sqrt(len(costs))
        delta = 0.4
        assert ((mean - (delta + 0.05)) / se <= -1.6449) == sat_weak(costs, delta)
        assert sat_weak(costs, delta)

    def test_needs_two_samples(self):
        with pytest.raises(ValueError):
            sat_weak([0.1], 0.5)


class TestSummarize:
    def records(self):
        return [
            RunRecord(payoff=1.0, cost=0.2, steps=2, samples=100, wall_ms_per_step=1.0),
            RunRecord(payoff=3.0, cost=0.6, steps=2, samples=300, wall_ms_per_step=1.0),
            RunRecord(payoff=2.0, cost=0.4, steps=4, samples=100, wall_ms_per_step=1.0),
        ]

    def test_means_and_std(self):
        summary = summarize(make_config(delta=0.4), self.records())
        assert summary.r_hat == pytest.approx(2.0)
        assert summary.c_hat == pytest.approx(0.4)
        assert summary.cost_std == pytest.approx(statistics.stdev([0.2, 0.6, 0.4]))
        assert summary.mean_samples == pytest.approx((50 + 150 + 25) / 3)

    def test_sat_flags_follow_threshold(self):
        assert summarize(make_config(delta=0.4), self.records()).sat_m
        assert not summarize(make_config(delta=0.35), self.records()).sat_m

    def test_needs_two_records(self):
        with pytest.raises(ValueError):
            summarize(make_config(), self.records()[:1])


class TestJointPayoffComparison:
    def test_empty_when_baseline_satisfies_nothing(self):
        tuct = [make_summary("a", 3.0, True)]
        base = [make_summary("a", 1.0, False, algorithm="ramcp")]
        ids, mean_t, mean_b = joint_payoff_comparison(tuct, base)
        assert ids == [] and math.isnan(mean_t) and math.isnan(mean_b)

    def test_identical_summaries_give_equal_means(self):
        tuct = [make_summary("a", 3.0, True), make_summary("b", 1.0, True)]
        ids, mean_t, mean_b = joint_payoff_comparison(tuct, tuct)
        assert ids == ["a", "b"]
        assert mean_t == pytest.approx(mean_b) == pytest.approx(2.0)

    def test_singleton_joint_set(self):
        tuct = [make_summary("a", 3.0, True), make_summary("b", 9.0, True)]
        base = [
            make_summary("a", 1.0, True, algorithm="ccpomcp"),
            make_summary("b", 9.0, False, algorithm="ccpomcp"),
        ]
        ids, mean_t, mean_b = joint_payoff_comparison(tuct, base)
        assert ids == ["a"]
        assert (mean_t, mean_b) == (3.0, 1.0)


class TestBuildModel:
    def test_counterexample(self):
        model = build_model(make_config(), 0)
        assert model.initial_state() == "s0"

    def test_random_cmdp_is_reproducible(self):
        config = make_config(env="random_cmdp", env_params=(("env_seed", 5),))
        a = build_model(config, 0)
        b = build_model(config, 3)
        assert a._transitions == b._transitions

    def test_gridworld_rotates_over_dataset_maps(self):
        config = make_config(env="gridworld", env_params=(("dataset", "gridworld_small_mini"),))
        maps = [build_model(config, i).map for i in range(17)]
        assert maps[0] == maps[16]
        assert any(m != maps[0] for m in maps[1:16])

    def test_gridworld_fixed_map_index(self):
        config = make_config(
            env="gridworld",
            env_params=(("dataset", "gridworld_small_mini"), ("map_index", 2)),
        )
        assert build_model(config, 0).map == build_model(config, 9).map

    def test_gridworld_inline_map_text(self):
        config = make_config(
            env="gridworld", env_params=(("map_text", "####\n#BG#\n####"), ("mode", "softavoid"))
        )
        model = build_model(config, 0)
        assert model.map.golds == frozenset({(1, 2)})

    def test_delivery(self):
        config = make_config(env="delivery", env_params=(("n_junctions", 20), ("n_points", 2)))
        model = build_model(config, 0)
        assert model.max_step_cost() == pytest.approx(0.2)


def single_action_chain():
    """Deterministic one-action chain: two steps, total cost 0.3, payoff 1.5."""
    transitions = {
        "a": {"go": [("b", 1.0, 1.0, 0.1)]},
        "b": {"go": [("end", 1.0, 0.5, 0.2)]},
    }
    return TabularCMDP(transitions, "a", terminals=frozenset({"end"}))


class TestRunExperiment:
    def test_reruns_are_identical_apart_from_wall_clock(self):
        config = make_config(episodes=3)
        first, _s1 = run_experiment(config)
        second, _s2 = run_experiment(config)
        key = lambda r: (r.payoff, r.cost, r.steps, r.samples)
        assert [key(r) for r in first] == [key(r) for r in second]

    def test_parallel_matches_serial(self):
        config = make_config(episodes=4, iterations_per_step=30)
        serial, _ = run_experiment(config, threads=1)
        parallel, _ = run_experiment(config, threads=2)
        key = lambda r: (r.payoff, r.cost, r.steps, r.samples)
        assert [key(r) for r in serial] == [key(r) for r in parallel]

    @pytest.mark.parametrize("algorithm", ["tuct", "ccpomcp", "ramcp"])
    def test_deterministic_chain_cost(self, algorithm, monkeypatch):
        monkeypatch.setattr(
            "paretomcts.harness.build_model", lambda config, episode: single_action_chain()
        )
        config = make_config(algorithm=algorithm, delta=0.3, episodes=3, iterations_per_step=20)
        records, summary = run_experiment(config)
        assert summary.c_hat == pytest.approx(0.3)
        assert summary.r_hat == pytest.approx(1.5)
        assert all(r.steps == 2 for r in records)

    def test_failures_report_the_seed(self, monkeypatch):
        def boom(config, episode):
            raise RuntimeError("bad transition")

        monkeypatch.setattr("paretomcts.harness.build_model", boom)
        with pytest.raises(RuntimeError, match="seed"):
            run_experiment(make_config(episodes=2))


class TestCsvRoundTrip:
    def run_once(self):
        config = make_config(episodes=3, iterations_per_step=30)
        records, summary = run_experiment(config)
        return config, records, summary

    def test_episode_csv_round_trip(self):
        config, records, _summary = self.run_once()
        buf = io.StringIO()
        write_episode_csv(buf, config, records)
        rows = read_episode_csv(buf.getvalue())
        assert [r["episode"] for r in rows] == [0, 1, 2]
        assert [r["cost"] for r in rows] == [rec.cost for rec in records]
        assert [r["payoff"] for r in rows] == [rec.payoff for rec in records]
        assert all(r["config_id"] == "test" and r["algorithm"] == "tuct" for r in rows)

    def test_episode_csv_bytes_deterministic_apart_from_wall_clock(self):
        config = make_config(episodes=3, iterations_per_step=30)
        texts = []
        for _ in range(2):
            records, _ = run_experiment(config)
            buf = io.StringIO()
            write_episode_csv(buf, config, records)
            texts.append(buf.getvalue())
        strip = lambda text: [line.rsplit(",", 1)[0] for line in text.splitlines()]
        assert strip(texts[0]) == strip(texts[1])

    def test_summary_csv_round_trip(self):
        config, _records, summary = self.run_once()
        buf = io.StringIO()
        write_summary_csv(buf, [summary])
        parsed = read_summary_csv(buf.getvalue())
        assert parsed == [summary]

    def test_summary_csv_bytes_deterministic(self):
        config = make_config(episodes=3, iterations_per_step=30)
        texts = []
        for _ in range(2):
            _, summary = run_experiment(config)
            buf = io.StringIO()
            write_summary_csv(buf, [summary])
            texts.append(buf.getvalue())
        assert texts[0] == texts[1]

    def test_missing_columns_are_reported(self):
        with pytest.raises(ValueError, match="cost"):
            read_episode_csv("config_id,algorithm\nx,tuct\n")
        with pytest.raises(ValueError, match="sat_w"):
            read_summary_csv("config_id,algorithm\nx,tuct\n")

    def test_recompute_metrics_from_raw_csv(self):
        config, records, summary = self.run_once()
        buf = io.StringIO()
        write_episode_csv(buf, config, records)
        rows = read_episode_csv(buf.getvalue())
        costs = [r["cost"] for r in rows]
        assert sat_mean(statistics.mean(costs), config.delta) == summary.sat_m
        assert sat_weak(costs, config.delta) == summary.sat_w


class TestParseExperimentConfigs:
    def test_single_section(self):
        text = """
[baseline]
algorithm = tuct
env = cmdp_a
delta = 0.5
horizon = 2
episodes = 10
seed = 3
"""
        (config,) = parse_experiment_configs(text)
        assert config.config_id == "baseline"
        assert config.algorithm == "tuct"
        assert config.delta == 0.5
        assert config.episodes == 10

    def test_grid_expansion(self):
        text = """
[grid]
algorithm = tuct, ramcp
env = cmdp_a
delta = 0.25, 0.5, 0.75
horizon = 2
episodes = 5
"""
        configs = parse_experiment_configs(text)
        assert len(configs) == 6
        assert [c.config_id for c in configs] == [f"grid/{i}" for i in range(6)]
        assert {(c.algorithm, c.delta) for c in configs} == {
            (a, d) for a in ("tuct", "ramcp") for d in (0.25, 0.5, 0.75)
        }

    def test_environment_parameters_pass_through(self):
        text = """
[gw]
algorithm = tuct
env = gridworld
delta = 0.15
horizon = 30
episodes = 4
dataset = gridworld_small_mini
mode = avoid
p_trap = 0.2, 0.5
"""
        configs = parse_experiment_configs(text)
        assert len(configs) == 2
        assert {c.param("p_trap") for c in configs} == {0.2, 0.5}
        assert all(c.param("dataset") == "gridworld_small_mini" for c in configs)
        assert all(c.param("mode") == "avoid" for c in configs)

    def test_boolean_and_budget_keys(self):
        text = """
[exact]
algorithm = tuct
env = cmdp_a
delta = 0.5
horizon = 2
episodes = 4
use_exact_dynamics = true
iterations_per_step = 200
"""
        (config,) = parse_experiment_configs(text)
        assert config.use_exact_dynamics is True
        assert config.iterations_per_step == 200


class TestCli:
    def test_run_and_summarize(self, tmp_path, capsys):
        from paretomcts.cli import main

        config = tmp_path / "exp.ini"
        config.write_text(
            "[demo]\nalgorithm = tuct\nenv = cmdp_a\ndelta = 0.5\nhorizon = 2\n"
            "iterations_per_step = 30\nepisodes = 3\nseed = 11\n"
        )
        out = tmp_path / "demo.csv"
        assert main(["run", "--config", str(config), "--out", str(out)]) == 0
        rows = read_episode_csv(out.read_text())
        assert [r["episode"] for r in rows] == [0, 1, 2]
        summary_path = tmp_path / "demo_summary.csv"
        (summary,) = read_summary_csv(summary_path.read_text())
        assert summary.config_id == "demo"
        assert main(["summarize", "--csv", str(summary_path)]) == 0
        assert "demo" in capsys.readouterr().out

    def test_gen_maps(self, tmp_path):
        from paretomcts.cli import main
        from paretomcts.envs.gridworld import load_map_dataset

        out = tmp_path / "maps.txt"
        assert main(["gen-maps", "--out", str(out), "--count", "2", "--seed", "9"]) == 0
        assert len(load_map_dataset(out.read_text())) == 2

    def test_solve_exact(self, capsys):
        from paretomcts.cli import main

        assert main(["solve-exact"]) == 0
        lines = capsys.readouterr().out.strip().splitlines()
        assert lines[0] == "cost=0.500000 reward=0.000000"
        assert lines[1] == "cost=1.000000 reward=0.500000"
