"""Environment abstraction and exact solvers for small constrained MDPs.

A generative model only needs to sample transitions; models that can also
enumerate exact dynamics additionally support backward-induction oracles
used for testing and for exact-dynamics planning.
"""

from __future__ import annotations

import math
from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from typing import Any, Hashable, Optional, Sequence

from .pareto import ParetoCurve, Point, ZERO_CURVE, backup_action_curve, merge_decision_curve, prune

StateId = Hashable
ActionId = Hashable
# exact dynamics entry: (next_state, probability, reward, cost)
Transition = tuple


class UnsupportedOperationError(RuntimeError):
    """Raised when exact dynamics are required but unavailable."""


class ResourceLimitError(RuntimeError):
    """Raised when an exact computation would exceed its size cap."""


@dataclass(frozen=True)
class RunRecord:
    """Outcome of one planned episode."""

    payoff: float
    cost: float
    steps: int
    samples: int
    wall_ms_per_step: float


@dataclass(frozen=True)
class ProblemSpec:
    """Planning problem parameters shared by all algorithms."""

    horizon: int
    gamma_r: float = 1.0
    gamma_c: float = 1.0
    initial_threshold: float = 0.0
    cost_bound: float = 0.0  # B, >= horizon * max single-step cost

    def __post_init__(self):
        if self.horizon < 1:
            raise ValueError("horizon must be a positive integer")
        if not (0.0 < self.gamma_r <= 1.0 and 0.0 < self.gamma_c <= 1.0):
            raise ValueError("discount factors must lie in (0, 1]")
        if self.initial_threshold < 0.0:
            raise ValueError("initial threshold must be nonnegative")
        if self.cost_bound < 0.0:
            raise ValueError("cost bound must be nonnegative")

    @classmethod
    def for_model(
        cls,
        model: "GenerativeModel",
        horizon: int,
        gamma_r: float = 1.0,
        gamma_c: float = 1.0,
        initial_threshold: float = 0.0,
    ) -> "ProblemSpec":
        """Derive the trajectory cost bound from the model's declared max step cost."""
        max_cost = model.max_step_cost()
        if not math.isfinite(max_cost) or max_cost < 0.0:
            raise ValueError("model must declare a finite nonnegative max step cost")
        return cls(
            horizon=horizon,
            gamma_r=gamma_r,
            gamma_c=gamma_c,
            initial_threshold=initial_threshold,
            cost_bound=horizon * max_cost,
        )


class GenerativeModel(ABC):
    """Sampling interface to an environment.

    Implementations must be stateless or cheaply duplicable per episode;
    rewards and costs are deterministic functions of (s, a, t) and costs
    are nonnegative.
    """

    @abstractmethod
    def initial_state(self) -> StateId: ...

    @abstractmethod
    def actions(self, state: StateId) -> Sequence[ActionId]: ...

    @abstractmethod
    def sample(self, state: StateId, action: ActionId, rng) -> tuple[StateId, float, float]:
        """Sample (next_state, reward, cost) for playing `action` in `state`."""

    @abstractmethod
    def is_terminal(self, state: StateId) -> bool: ...

    @abstractmethod
    def max_step_cost(self) -> float: ...

    @property
    def has_exact_dynamics(self) -> bool:
        return False

    def exact_dynamics(self, state: StateId, action: ActionId) -> list[Transition]:
        raise UnsupportedOperationError(
            f"{type(self).__name__} does not expose exact dynamics"
        )


class TabularCMDP(GenerativeModel):
    """Explicit finite CMDP given as per-(state, action) outcome tables."""

    def __init__(
        self,
        transitions: dict[StateId, dict[ActionId, list[Transition]]],
        initial: StateId,
        terminals: frozenset = frozenset(),
    ):
        self._transitions = transitions
        self._initial = initial
        self._terminals = frozenset(terminals)
        self._max_cost = 0.0
        for state, per_action in transitions.items():
            if state in self._terminals:
                continue
            if not per_action:
                raise ValueError(f"non-terminal state {state!r} has no actions")
            for action, outcomes in per_action.items():
                total = sum(p for _t, p, _r, _c in outcomes)
                if abs(total - 1.0) > 1e-9:
                    raise ValueError(
                        f"outcome probabilities of ({state!r}, {action!r}) sum to {total}"
                    )
                for _t, _p, _r, c in outcomes:
                    if c < 0.0:
                        raise ValueError("costs must be nonnegative")
                    self._max_cost = max(self._max_cost, c)

    def initial_state(self) -> StateId:
        return self._initial

    def actions(self, state: StateId) -> Sequence[ActionId]:
        return list(self._transitions[state].keys())

    def sample(self, state, action, rng):
        outcomes = self._transitions[state][action]
        u = rng.random()
        acc = 0.0
        for t, p, r, c in outcomes:
            acc += p
            if u <= acc:
                return t, r, c
        t, _p, r, c = outcomes[-1]
        return t, r, c

    def is_terminal(self, state) -> bool:
        return state in self._terminals

    def max_step_cost(self) -> float:
        return self._max_cost

    @property
    def has_exact_dynamics(self) -> bool:
        return True

    def exact_dynamics(self, state, action):
        return list(self._transitions[state][action])


def exact_pareto_oracle(
    model: GenerativeModel,
    spec: ProblemSpec,
    state: StateId,
    steps_remaining: int,
    _cache: Optional[dict] = None,
    max_entries: int = 10_000,
) -> ParetoCurve:
    """Exact frontier of achievable (cost, payoff) vectors via backward induction."""
    if not model.has_exact_dynamics:
        raise UnsupportedOperationError("exact oracle requires exact dynamics")
    cache: dict = _cache if _cache is not None else {}

    def solve(s, k) -> ParetoCurve:
        if k == 0 or model.is_terminal(s):
            return ZERO_CURVE
        key = (s, k)
        hit = cache.get(key)
        if hit is not None:
            return hit
        if len(cache) >= max_entries:
            raise ResourceLimitError(f"oracle cache exceeded {max_entries} entries")
        action_curves = []
        for a in model.actions(s):
            successors = [
                (p, solve(t, k - 1), c, r) for t, p, r, c in model.exact_dynamics(s, a)
            ]
            action_curves.append(backup_action_curve(successors, spec.gamma_c, spec.gamma_r))
        curve = merge_decision_curve(action_curves)
        cache[key] = curve
        return curve

    return solve(state, steps_remaining)


def enumerate_policy_vectors(
    model: GenerativeModel,
    spec: ProblemSpec,
    max_states: int = 100_000,
) -> set[Point]:
    """Outcome vectors of every deterministic history-dependent policy.

    Independent oracle for the backward-induction frontier: expected
    (cost, payoff) of each deterministic policy over the horizon-unrolled
    tree, combined by exhaustive cross products.  Pointwise-dominated
    vectors are discarded along the way (they can never contribute a
    frontier vertex); the pruned convex frontier of the result equals the
    backward-induction curve.
    """
    if not model.has_exact_dynamics:
        raise UnsupportedOperationError("policy enumeration requires exact dynamics")
    work = {"nodes": 0}
    cache: dict = {}

    def undominated(vectors: set[tuple[float, float]]) -> set[tuple[float, float]]:
        out = set()
        for v in vectors:
            if not any(
                w != v and w[0] <= v[0] and w[1] >= v[1] for w in vectors
            ):
                out.add(v)
        return out

    def solve(s, k) -> set[tuple[float, float]]:
        if k == 0 or model.is_terminal(s):
            return {(0.0, 0.0)}
        key = (s, k)
        if key in cache:
            return cache[key]
        work["nodes"] += 1
        if work["nodes"] > max_states:
            raise ResourceLimitError(f"policy enumeration exceeded {max_states} nodes")
        vectors: set[tuple[float, float]] = set()
        for a in model.actions(s):
            combos: list[tuple[float, float]] = [(0.0, 0.0)]
            for t, p, r, c in model.exact_dynamics(s, a):
                branch = solve(t, k - 1)
                nxt = []
                for bc, br in combos:
                    for vc, vr in branch:
                        nxt.append(
                            (
                                bc + p * (c + spec.gamma_c * vc),
                                br + p * (r + spec.gamma_r * vr),
                            )
                        )
                if len(nxt) > max_states:
                    raise ResourceLimitError(
                        f"policy enumeration exceeded {max_states} combinations"
                    )
                combos = list(undominated(set(nxt)))
            vectors.update(combos)
        result = undominated(vectors)
        cache[key] = result
        return result

    vecs = solve(model.initial_state(), spec.horizon)
    return {Point(c, r) for c, r in vecs}


def random_tabular_cmdp(
    rng,
    n_states: int = 4,
    n_actions: int = 2,
    max_successors: int = 2,
    max_reward: float = 1.0,
    max_cost: float = 1.0,
) -> TabularCMDP:
    """Random dense-ish CMDP with nonnegative rewards and costs.

    Probabilities are drawn from a few-valued grid so exact oracles stay
    numerically crisp; every state is non-terminal.
    """
    states = list(range(n_states))
    transitions: dict = {}
    for s in states:
        per_action = {}
        for a in range(rng.randint(1, n_actions)):
            k = rng.randint(1, max_successors)
            succ = rng.sample(states, min(k, n_states))
            if len(succ) == 1:
                probs = [1.0]
            else:
                w = rng.choice([(0.5, 0.5), (0.25, 0.75), (0.75, 0.25)])
                probs = list(w)
            outcomes = []
            for t, p in zip(succ, probs):
                r = rng.choice([0.0, 0.25, 0.5, 1.0]) * max_reward
                c = rng.choice([0.0, 0.25, 0.5, 1.0]) * max_cost
                outcomes.append((t, p, r, c))
            per_action[a] = outcomes
        transitions[s] = per_action
    return TabularCMDP(transitions, initial=0)
