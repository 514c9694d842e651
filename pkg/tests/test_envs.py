"""Tests for the gridworld and delivery environments and map tooling."""

import math
import random
from collections import Counter

import pytest

from paretomcts.cmdp import ProblemSpec, exact_pareto_oracle
from paretomcts.envs import load_dataset
from paretomcts.envs.counterexample import cmdp_a
from paretomcts.envs.delivery import (
    DeliveryConfig,
    DeliveryEnv,
    _all_pairs_hops,
    make_delivery_config,
)
from paretomcts.envs.gridworld import (
    GridworldConfig,
    GridworldEnv,
    GridworldState,
    MapError,
    generate_map,
    load_map_dataset,
    parse_map,
    save_map_dataset,
)
from paretomcts.pareto import max_reward_at


class TestParseMap:
    def test_minimal_map(self):
        gmap = parse_map("###\n#B#\n###")
        assert (gmap.width, gmap.height) == (3, 3)
        assert gmap.initial == (1, 1)
        assert not gmap.golds and not gmap.traps

    def test_gold_position(self):
        gmap = parse_map("#####\n#B.G#\n#####")
        assert gmap.golds == frozenset({(1, 3)})

    def test_unknown_character_names_location(self):
        with pytest.raises(MapError, match=r"'X' at row 1, column 2"):
            parse_map("####\n#BX#\n####")

    def test_non_rectangular_rejected(self):
        with pytest.raises(MapError, match="non-rectangular"):
            parse_map("###\n#B##\n###")

    def test_missing_initial_rejected(self):
        with pytest.raises(MapError, match="no initial tile"):
            parse_map("###\n#.#\n###")

    def test_duplicate_initial_names_location(self):
        with pytest.raises(MapError, match="row 1, column 2"):
            parse_map("####\n#BB#\n####")

    def test_open_border_rejected(self):
        with pytest.raises(MapError, match="border"):
            parse_map("###\n#B.\n###")

    def test_unreachable_gold_names_location(self):
        text = "#####\n#B#G#\n#####"
        with pytest.raises(MapError, match="row 1, column 3"):
            parse_map(text)


class TestGenerateMap:
    def test_same_seed_is_identical(self):
        a = generate_map(6, 6, 5, seed=7)
        b = generate_map(6, 6, 5, seed=7)
        assert a.serialize() == b.serialize()

    def test_too_much_gold_rejected(self):
        with pytest.raises(MapError, match="interior"):
            generate_map(4, 4, 5, seed=0)

    def test_round_trip_through_parser(self):
        for seed in range(5):
            gmap = generate_map(8, 7, 4, seed=seed)
            assert parse_map(gmap.serialize()).serialize() == gmap.serialize()

    def test_retry_cap_exceeded(self):
        with pytest.raises(MapError, match="attempts"):
            generate_map(6, 6, 5, wall_density=1.0, seed=0)


class TestDatasets:
    def test_small_dataset_loads(self):
        maps = load_dataset("gridworld_small_mini")
        assert len(maps) == 16
        for gmap in maps:
            assert (gmap.width, gmap.height) == (6, 6)
            assert len(gmap.golds) == 5
            assert len(gmap.traps) >= 1

    def test_large_dataset_loads(self):
        maps = load_dataset("gridworld_large_mini")
        assert len(maps) == 8
        for gmap in maps:
            assert (gmap.width, gmap.height) == (25, 25)
            assert len(gmap.golds) == 50

    def test_unknown_dataset_rejected(self):
        with pytest.raises(ValueError, match="unknown dataset"):
            load_dataset("nope")

    def test_comment_lines_are_skipped(self):
        text = "# seed=1 params\n###\n#B#\n###\n\n# another\n#####\n#B.G#\n#####\n"
        maps = load_map_dataset(text)
        assert len(maps) == 2


def open_room():
    return parse_map("#####\n#...#\n#.B.#\n#...#\n#####")


class TestGridworldDynamics:
    def test_deterministic_move(self):
        env = GridworldEnv(open_room(), GridworldConfig(p_slide=0.0))
        state = env.initial_state()
        nxt, r, c = env.sample(state, "right", random.Random(0))
        assert nxt.position == (2, 3)
        assert (r, c) == (0.0, 0.0)

    def test_slide_distribution(self):
        env = GridworldEnv(open_room(), GridworldConfig(p_slide=0.2))
        state = env.initial_state()
        dist = {t.position: p for t, p, _r, _c in env.exact_dynamics(state, "right")}
        assert dist[(2, 3)] == pytest.approx(0.8)
        assert dist[(1, 2)] == pytest.approx(0.1)  # slid up
        assert dist[(3, 2)] == pytest.approx(0.1)  # slid down

    def test_wall_bump_stays_in_place(self):
        env = GridworldEnv(parse_map("###\n#B#\n###"), GridworldConfig(p_slide=0.0))
        state = env.initial_state()
        nxt, r, c = env.sample(state, "up", random.Random(0))
        assert nxt.position == state.position and (r, c) == (0.0, 0.0)

    def test_wall_bump_does_not_retrigger_tile(self):
        gmap = parse_map("####\n#BT#\n####")
        env = GridworldEnv(gmap, GridworldConfig(mode="softavoid", p_trap=0.2, p_slide=0.0))
        on_trap = GridworldState((1, 2), frozenset(), True)
        nxt, r, c = env.sample(on_trap, "right", random.Random(0))  # wall: stays
        assert nxt.position == (1, 2) and c == 0.0

    def test_soft_trap_costs_deterministically(self):
        gmap = parse_map("####\n#BT#\n####")
        env = GridworldEnv(gmap, GridworldConfig(mode="softavoid", p_trap=0.2, p_slide=0.0))
        nxt, r, c = env.sample(env.initial_state(), "right", random.Random(0))
        assert (r, c) == (0.0, 0.2)
        assert nxt.alive and not env.is_terminal(nxt)

    def test_hard_trap_splits_into_death_branch(self):
        gmap = parse_map("####\n#BT#\n####")
        env = GridworldEnv(gmap, GridworldConfig(mode="avoid", p_trap=0.3, p_slide=0.0))
        outcomes = env.exact_dynamics(env.initial_state(), "right")
        by_alive = {t.alive: (p, c) for t, p, _r, c in outcomes}
        assert by_alive[False] == (pytest.approx(0.3), 1.0)
        assert by_alive[True] == (pytest.approx(0.7), 0.0)

    def test_gold_collected_once(self):
        gmap = parse_map("#####\n#B.G#\n#####")
        env = GridworldEnv(gmap, GridworldConfig(p_slide=0.0))
        rng = random.Random(0)
        state = env.initial_state()
        rewards = []
        for action in ("right", "right", "left", "right"):
            state, r, _c = env.sample(state, action, rng)
            rewards.append(r)
        assert rewards == [0.0, 1.0, 0.0, 0.0]

    def test_unknown_action_rejected(self):
        env = GridworldEnv(open_room(), GridworldConfig())
        with pytest.raises(ValueError, match="unknown action"):
            env.sample(env.initial_state(), "jump", random.Random(0))

    def test_exact_dynamics_match_sample_frequencies(self):
        gmap = load_dataset("gridworld_small_mini")[0]
        env = GridworldEnv(gmap, GridworldConfig(mode="avoid", p_trap=0.5, p_slide=0.2))
        state = env.initial_state()
        for action in ("left", "down"):
            exact = env.exact_dynamics(state, action)
            assert sum(p for _t, p, _r, _c in exact) == pytest.approx(1.0, abs=1e-12)
            n = 100_000
            rng = random.Random(99)
            counts = Counter(env.sample(state, action, rng)[0] for _ in range(n))
            for t, p, _r, _c in exact:
                se = math.sqrt(max(p * (1 - p), 1e-12) / n)
                assert abs(counts[t] / n - p) <= 3 * se + 1e-9

    def test_episode_cost_profiles(self):
        gmap = load_dataset("gridworld_small_mini")[7]
        rng = random.Random(4)
        for mode, p_trap in (("avoid", 0.5), ("softavoid", 0.3)):
            env = GridworldEnv(gmap, GridworldConfig(mode=mode, p_trap=p_trap, p_slide=0.2))
            for _ in range(50):
                state = env.initial_state()
                total = 0.0
                for _ in range(30):
                    if env.is_terminal(state):
                        break
                    action = env.actions(state)[rng.randrange(4)]
                    state, _r, c = env.sample(state, action, rng)
                    total += c
                if mode == "avoid":
                    assert total in (0.0, 1.0)
                else:
                    assert total / p_trap == pytest.approx(round(total / p_trap), abs=1e-9)


def tiny_delivery_config(period=3, delay=3, radius=5):
    neighbors = ((1,), (0,))
    instant = {(0, 1): (1.0, 1.0, 1.0), (1, 0): (1.0, 1.0, 1.0)}
    return DeliveryConfig(
        neighbors=neighbors,
        travel_weights=instant,
        points=(1,),
        period=period,
        radius=radius,
        delay=delay,
        distances=_all_pairs_hops(neighbors),
    )


class TestDelivery:
    def test_config_validation(self):
        with pytest.raises(ValueError):
            make_delivery_config(seed=0, n_junctions=5)
        with pytest.raises(ValueError):
            tiny_delivery_config(period=0)

    def test_generated_graph_is_strongly_connected(self):
        for seed in range(3):
            cfg = make_delivery_config(seed=seed, n_junctions=30)
            assert max(max(row) for row in cfg.distances) < 30

    def test_decline_returns_to_junction_state(self):
        env = DeliveryEnv(tiny_delivery_config())
        rng = random.Random(0)
        state = env.initial_state()
        state, _r, _c = env.sample(state, ("move", 1), rng)  # request matures here
        assert state.matured == (0,)
        nxt, r, c = env.sample(state, "decline", rng)
        assert (r, c) == (0.0, 0.0)
        assert nxt.matured == () and nxt.timers == (3,)

    def test_accept_and_deliver_within_delay(self):
        env = DeliveryEnv(tiny_delivery_config(period=10, delay=3))
        rng = random.Random(0)
        state = env.initial_state()
        state, _r, _c = env.sample(state, ("move", 1), rng)
        state, _r, _c = env.sample(state, ("accept", 0), rng)
        state, _r, _c = env.sample(state, ("move", 0), rng)
        state, r, c = env.sample(state, ("move", 1), rng)  # back at the point
        assert (r, c) == (1.0, 0.0)
        assert state.accepted == ()

    def test_expiry_costs_a_tenth(self):
        env = DeliveryEnv(tiny_delivery_config(period=10, delay=1))
        rng = random.Random(0)
        state = env.initial_state()
        state, _r, _c = env.sample(state, ("move", 1), rng)
        state, _r, _c = env.sample(state, ("accept", 0), rng)
        state, r, c = env.sample(state, ("move", 0), rng)  # countdown hits 0 away
        assert (r, c) == (0.0, 0.0)
        state, r, c = env.sample(state, ("move", 1), rng)
        assert (r, c) == (0.0, pytest.approx(0.1))
        assert state.accepted == ()

    def test_invalid_actions_rejected(self):
        env = DeliveryEnv(tiny_delivery_config())
        with pytest.raises(ValueError):
            env.sample(env.initial_state(), ("move", 7), random.Random(0))
        state, _r, _c = env.sample(env.initial_state(), ("move", 1), random.Random(0))
        with pytest.raises(ValueError):
            env.sample(state, ("accept", 5), random.Random(0))

    def test_total_cost_counts_expiries_exactly(self):
        cfg = make_delivery_config(seed=3, n_junctions=25, n_points=3, period=5, radius=4, delay=3)
        env = DeliveryEnv(cfg)
        rng = random.Random(8)
        for _ in range(5):
            state = env.initial_state()
            total_cost = 0.0
            expiries = 0
            for _ in range(200):
                actions = env.actions(state)
                action = actions[rng.randrange(len(actions))]
                nxt, r, c = env.sample(state, action, rng)
                if not state.matured:  # move step: entries leave by delivery or expiry
                    removed = len(state.accepted) - len(nxt.accepted)
                    expiries += removed - int(round(r / 1.0))
                total_cost += c
                state = nxt
            assert total_cost == pytest.approx(0.1 * expiries, abs=1e-9)


class TestCounterexampleModel:
    def test_oracle_curve(self):
        model = cmdp_a()
        spec = ProblemSpec(horizon=2, initial_threshold=0.5, cost_bound=2.0)
        curve = exact_pareto_oracle(model, spec, model.initial_state(), 2)
        assert [tuple(v) for v in curve.vertices] == [(0.5, 0.0), (1.0, 0.5)]

    def test_feasible_payoffs_at_key_budgets(self):
        model = cmdp_a()
        spec = ProblemSpec(horizon=2, initial_threshold=0.5, cost_bound=2.0)
        curve = exact_pareto_oracle(model, spec, model.initial_state(), 2)
        assert max_reward_at(curve, 0.5) == pytest.approx(0.0, abs=1e-12)
        assert max_reward_at(curve, 0.75) == pytest.approx(0.25, abs=1e-12)
