"""Synthetic graph-delivery benchmark.

An agent drives on a strongly connected junction graph with stochastic
integer travel times.  Maintenance points issue requests periodically;
when a request matures while the agent is within a graph-distance
radius, the agent may accept it (starting a countdown of `delay` time
units) or decline.  Reaching an accepted point before its countdown
runs out pays reward 1; a countdown expiring costs 0.1.  Total episode
cost is therefore exactly 0.1 times the number of expired deliveries.
"""

from __future__ import annotations

import random
from collections import deque
from dataclasses import dataclass, field
from typing import NamedTuple

from ..cmdp import GenerativeModel

DELIVERY_REWARD = 1.0
EXPIRY_COST = 0.1
TRAVEL_TIMES = (1, 2, 3)


@dataclass(frozen=True)
class DeliveryConfig:
    """Static problem data: graph, maintenance points, timing parameters."""

    neighbors: tuple  # neighbors[j] = tuple of adjacent junction ids
    travel_weights: dict  # (j, k) -> cumulative weights over TRAVEL_TIMES
    points: tuple  # maintenance point junction ids
    period: int
    radius: int  # graph distance (hops)
    delay: int
    distances: tuple = field(repr=False, default=())  # all-pairs hop counts

    def __post_init__(self):
        if self.period <= 0 or self.delay <= 0:
            raise ValueError("period and delay must be positive")


def _all_pairs_hops(neighbors) -> tuple:
    n = len(neighbors)
    rows = []
    for start in range(n):
        dist = [None] * n
        dist[start] = 0
        queue = deque([start])
        while queue:
            j = queue.popleft()
            for k in neighbors[j]:
                if dist[k] is None:
                    dist[k] = dist[j] + 1
                    queue.append(k)
        if any(d is None for d in dist):
            raise ValueError("junction graph is not strongly connected")
        rows.append(tuple(dist))
    return tuple(rows)


def make_delivery_config(
    seed: int,
    n_junctions: int = 20,
    n_points: int = 3,
    period: int = 8,
    radius: int = 3,
    delay: int = 5,
) -> DeliveryConfig:
    """Random grid-like strongly connected graph with categorical travel times."""
    if not 20 <= n_junctions <= 250:
        raise ValueError("junction count must lie in [20, 250]")
    if n_points < 1 or n_points > n_junctions:
        raise ValueError("need between 1 and n_junctions maintenance points")
    rng = random.Random(seed)
    cols = max(2, int(n_junctions**0.5))
    edges = set()
    for j in range(n_junctions):
        r, c = divmod(j, cols)
        for k in (j + 1 if c + 1 < cols else None, j + cols):
            if k is not None and k < n_junctions:
                edges.add((j, k))
                edges.add((k, j))
    # A few random chords break the pure grid structure.
    for _ in range(n_junctions // 4):
        j, k = rng.sample(range(n_junctions), 2)
        edges.add((j, k))
        edges.add((k, j))
    neighbors = tuple(
        tuple(sorted(k for (a, k) in edges if a == j)) for j in range(n_junctions)
    )
    travel_weights = {}
    for j, k in sorted(edges):
        w = [rng.uniform(0.1, 1.0) for _ in TRAVEL_TIMES]
        total = sum(w)
        acc = 0.0
        cumulative = []
        for x in w:
            acc += x / total
            cumulative.append(acc)
        cumulative[-1] = 1.0
        travel_weights[(j, k)] = tuple(cumulative)
    points = tuple(sorted(rng.sample(range(n_junctions), n_points)))
    return DeliveryConfig(
        neighbors=neighbors,
        travel_weights=travel_weights,
        points=points,
        period=period,
        radius=radius,
        delay=delay,
        distances=_all_pairs_hops(neighbors),
    )


class DeliveryState(NamedTuple):
    junction: int
    timers: tuple  # per maintenance point, time until the next request
    accepted: tuple  # (point index, remaining time) pairs, sorted
    matured: tuple  # point indices currently offered for acceptance


class DeliveryEnv(GenerativeModel):
    """Generative model over DeliveryState; no exact dynamics."""

    def __init__(self, config: DeliveryConfig, initial_junction: int = 0):
        self.config = config
        self.initial_junction = initial_junction

    def initial_state(self) -> DeliveryState:
        cfg = self.config
        # Stagger request maturities so they do not all fire at once.
        timers = tuple(
            (i * max(1, cfg.period // max(1, len(cfg.points)))) % cfg.period + 1
            for i in range(len(cfg.points))
        )
        return DeliveryState(self.initial_junction, timers, (), ())

    def is_terminal(self, state) -> bool:
        return False

    def max_step_cost(self) -> float:
        return EXPIRY_COST * len(self.config.points)

    def actions(self, state: DeliveryState):
        if state.matured:
            return ("decline",) + tuple(("accept", i) for i in state.matured)
        return tuple(("move", k) for k in self.config.neighbors[state.junction])

    def sample(self, state: DeliveryState, action, rng):
        cfg = self.config
        if state.matured:
            if action == "decline":
                timers = list(state.timers)
                for i in state.matured:
                    timers[i] = cfg.period
                return (
                    DeliveryState(state.junction, tuple(timers), state.accepted, ()),
                    0.0,
                    0.0,
                )
            if (
                isinstance(action, tuple)
                and len(action) == 2
                and action[0] == "accept"
                and action[1] in state.matured
            ):
                i = action[1]
                timers = list(state.timers)
                for k in state.matured:
                    timers[k] = cfg.period
                accepted = tuple(sorted(state.accepted + ((i, cfg.delay),)))
                return (
                    DeliveryState(state.junction, tuple(timers), accepted, ()),
                    0.0,
                    0.0,
                )
            raise ValueError(f"invalid decision action {action!r}")
        if not (
            isinstance(action, tuple)
            and len(action) == 2
            and action[0] == "move"
            and action[1] in cfg.neighbors[state.junction]
        ):
            raise ValueError(f"invalid move action {action!r}")
        target = action[1]
        u = rng.random()
        cumulative = cfg.travel_weights[(state.junction, target)]
        tau = TRAVEL_TIMES[-1]
        for t, threshold in zip(TRAVEL_TIMES, cumulative):
            if u <= threshold:
                tau = t
                break

        cost = 0.0
        reward = 0.0
        accepted = []
        for i, remaining in state.accepted:
            remaining -= tau
            if cfg.points[i] == target and remaining >= 0:
                reward += DELIVERY_REWARD
            elif remaining < 0:
                cost += EXPIRY_COST
            else:
                accepted.append((i, remaining))
        timers = []
        matured = []
        active = {i for i, _ in accepted}
        for i, timer in enumerate(state.timers):
            timer -= tau
            if timer <= 0:
                near = cfg.distances[target][cfg.points[i]] <= cfg.radius
                if near and i not in active:
                    matured.append(i)
                    timer = 0  # reset happens when the offer is resolved
                else:
                    timer = cfg.period  # request missed or point already active
            timers.append(timer)
        return (
            DeliveryState(target, tuple(timers), tuple(accepted), tuple(matured)),
            reward,
            cost,
        )
