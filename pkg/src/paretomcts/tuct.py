"""Threshold-guided UCT planner for finite-horizon constrained MDPs.

The search tree stores Pareto-curve value estimates per node and action.
Action selection mixes at most two actions so the expected future cost
matches the current threshold; after each step the threshold is revised
by a three-case rule (mixing / surplus / unfeasible) that keeps the
expected cost of the whole policy below the original budget.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass
from typing import Optional, Sequence

from .cmdp import GenerativeModel, ProblemSpec, RunRecord
from .pareto import (
    EPS,
    ParetoCurve,
    ZERO_CURVE,
    backup_action_curve,
    decompose,
    merge_decision_curve,
    prune,
    simplify,
)

ALPHA_FLOOR = 1e-6


class InvalidStateError(RuntimeError):
    """Raised when a tree operation is applied to the wrong kind of node."""


@dataclass(frozen=True)
class PlannerConfig:
    """Search-budget and exploration knobs shared by all planners."""

    exploration: float = 5.0
    iterations_per_step: Optional[int] = 1000
    time_per_step_ms: Optional[float] = None
    rollout_depth: Optional[int] = None  # None: roll out to the horizon
    tolerance: float = 1e-9
    epsilon_simplify: float = 0.0
    use_exact_dynamics: bool = False

    def __post_init__(self):
        if self.time_per_step_ms is None:
            if self.iterations_per_step is None or self.iterations_per_step < 1:
                raise ValueError("per-step budget must be positive")
        elif self.time_per_step_ms <= 0:
            raise ValueError("per-step budget must be positive")


@dataclass(frozen=True)
class ActionMixture:
    """Either a single action or a two-action mix binding a cost budget."""

    a_l: object
    sigma_l: float = 1.0
    c_l: float = math.nan
    a_h: object = None
    sigma_h: float = 0.0
    c_h: float = math.nan

    @classmethod
    def deterministic(cls, action) -> "ActionMixture":
        return cls(a_l=action)

    @classmethod
    def mix(cls, a_l, sigma_l, c_l, a_h, sigma_h, c_h) -> "ActionMixture":
        return cls(a_l=a_l, sigma_l=sigma_l, c_l=c_l, a_h=a_h, sigma_h=sigma_h, c_h=c_h)

    @property
    def is_deterministic(self) -> bool:
        return self.a_h is None

    def sample(self, rng):
        if self.a_h is None or rng.random() < self.sigma_l:
            return self.a_l
        return self.a_h


class Outcome:
    """Tally of one observed successor of an action."""

    __slots__ = ("count", "reward", "cost", "child")

    def __init__(self, count: int, reward: float, cost: float, child=None):
        self.count = count
        self.reward = reward
        self.cost = cost
        self.child = child


class ActionNode:
    __slots__ = ("visits", "curve", "outcomes", "exact")

    def __init__(self, exact=None):
        self.visits = 0
        self.curve: Optional[ParetoCurve] = None
        self.outcomes: dict = {}
        self.exact = exact  # tuple of (state, p, reward, cost) or None
        if exact is not None:
            for t, _p, r, c in exact:
                self.outcomes[t] = Outcome(0, r, c)

    def dist(self) -> list[tuple]:
        """Empirical (or exact) distribution: (state, p, reward, cost)."""
        if self.exact is not None:
            return list(self.exact)
        n = self.visits
        return [(t, o.count / n, o.reward, o.cost) for t, o in self.outcomes.items()]

    def probability_of(self, outcome_state) -> float:
        if self.exact is not None:
            for t, p, _r, _c in self.exact:
                if t == outcome_state:
                    return p
            return 0.0
        o = self.outcomes.get(outcome_state)
        return 0.0 if o is None else o.count / self.visits


class DecisionNode:
    __slots__ = ("state", "depth", "terminal", "actions", "visits", "curve", "children")

    def __init__(self, state, depth: int, model: GenerativeModel):
        self.state = state
        self.depth = depth
        self.terminal = model.is_terminal(state)
        self.actions: tuple = () if self.terminal else tuple(model.actions(state))
        self.visits = 1  # the expansion visit
        self.curve: Optional[ParetoCurve] = None
        self.children: dict = {}

    def untried_actions(self):
        children = self.children
        return [a for a in self.actions if a not in children]


def update_threshold(
    delta: float,
    sigma: ActionMixture,
    action,
    outcome_state,
    action_node: Optional[ActionNode],
    spec: ProblemSpec,
    immediate_cost: Optional[float] = None,
) -> float:
    """Threshold after playing `action` and observing `outcome_state`.

    The intermediate threshold is the mixture vertex cost matching the
    sampled side (or the incoming threshold for deterministic play); the
    update then redistributes it over the action's predicted outcomes:
    exactly on the curve ("mixing"), spreading slack over all outcomes
    ("surplus"), or charging the whole deficit to the realized outcome
    ("unfeasible").  Transitions the tree has never estimated fall back
    to subtracting the immediate cost and undiscounting.
    """
    gamma_c = spec.gamma_c
    expanded = (
        action_node is not None
        and action_node.curve is not None
        and action_node.probability_of(outcome_state) > 0.0
    )
    if not expanded:
        if immediate_cost is None:
            o = None if action_node is None else action_node.outcomes.get(outcome_state)
            if o is None:
                raise ValueError("immediate cost required for an unexpanded transition")
            immediate_cost = o.cost
        return (delta - immediate_cost) / gamma_c

    if sigma.is_deterministic:
        delta_act = delta
    else:
        delta_act = sigma.c_l if action == sigma.a_l else sigma.c_h

    dist = action_node.dist()
    successors = []
    idx_t = -1
    c_min = 0.0
    c_max = 0.0
    for i, (t, p, r, c) in enumerate(dist):
        if t == outcome_state:
            idx_t = i
        o = action_node.outcomes.get(t)
        child = o.child if o is not None else None
        child_curve = child.curve if child is not None and child.curve is not None else ZERO_CURVE
        successors.append((p, child_curve, c, r))
        c_min += p * (gamma_c * child_curve.min_cost + c)
        c_max += p * (gamma_c * child_curve.max_cost + c)
    if idx_t < 0:
        raise ValueError(f"outcome {outcome_state!r} not in the action's support")

    if delta_act > c_max + EPS:
        case = "surplus"
        target = c_max
    elif delta_act < c_min - EPS:
        case = "unfeasible"
        target = c_min
    else:
        case = "mixing"
        target = min(max(delta_act, c_min), c_max)

    points = decompose(successors, gamma_c, spec.gamma_r, target)
    c_t = points[idx_t].cost
    if case == "mixing":
        return c_t
    if case == "surplus":
        c_bar = sum(p * c for _t, p, _r, c in dist)
        denom = c_bar + gamma_c * spec.cost_bound - c_max
        if denom <= 1e-12:
            return c_t  # every trajectory already costs the global bound
        return c_t + (delta_act - c_max) * (spec.cost_bound - c_t) / denom
    p_t = dist[idx_t][1]
    return c_t - (c_min - delta_act) / (p_t * gamma_c)


class ThresholdUCT:
    """Anytime planner; one instance per episode (single-threaded tree)."""

    def __init__(self, model: GenerativeModel, spec: ProblemSpec, config: PlannerConfig):
        if config.use_exact_dynamics and not model.has_exact_dynamics:
            raise ValueError("exact-dynamics planning requires a model with exact dynamics")
        self.model = model
        self.spec = spec
        self.config = config
        self.samples_used = 0
        self._created_leaf: Optional[DecisionNode] = None

    # -- tree construction ------------------------------------------------

    def make_root(self, state) -> DecisionNode:
        return DecisionNode(state, 0, self.model)

    def _node_alpha(self, node: DecisionNode) -> float:
        # Scale by the spread of achievable values across every action,
        # including dominated ones: the spread of the pruned node curve
        # alone shrinks when one action dominates, which would freeze the
        # bonus below the value gap and starve the other actions forever.
        curves = [an.curve for an in node.children.values() if an.curve is not None]
        if not curves:
            curves = [node.curve] if node.curve is not None else []
        alpha = ALPHA_FLOOR
        if curves:
            alpha = max(
                alpha,
                max(cv.max_reward for cv in curves) - min(cv.min_reward for cv in curves),
                max(cv.max_cost for cv in curves) - min(cv.min_cost for cv in curves),
            )
        return alpha

    def exploration_bonus(self, node: DecisionNode, action) -> float:
        c = self.config.exploration
        if c == 0.0 or node.visits < 1:
            return 0.0
        anode = node.children.get(action)
        n_a = anode.visits if anode is not None else 0
        return c * self._node_alpha(node) * math.sqrt(math.log(node.visits) / (n_a + 1))

    def get_action_dist(self, node: DecisionNode, delta: float, explore: bool) -> ActionMixture:
        """Threshold-matching mixture over the exploration-augmented frontier."""
        expanded = [
            (idx, a, node.children[a])
            for idx, a in enumerate(node.actions)
            if node.children.get(a) is not None and node.children[a].curve is not None
        ]
        if not expanded:
            raise InvalidStateError("action selection on an unexpanded node")
        entries = []  # (index, action, curve, bonus)
        if explore and self.config.exploration != 0.0 and node.visits >= 1:
            scale = self.config.exploration * self._node_alpha(node)
            log_n = math.log(node.visits)
            for idx, a, anode in expanded:
                entries.append((idx, a, anode.curve, scale * math.sqrt(log_n / (anode.visits + 1))))
        else:
            entries = [(idx, a, anode.curve, 0.0) for idx, a, anode in expanded]

        if len(entries) == 1:
            # One expanded action: every frontier vertex belongs to it.
            return ActionMixture.deterministic(entries[0][1])

        tagged = []
        for idx, a, curve, bonus in entries:
            for c, r in curve.vertices:
                tagged.append((c - bonus, r + bonus, idx, a))
        pruned = prune((c, r) for c, r, _i, _a in tagged)

        def owner(vertex):
            best_idx, best_a = None, None
            for c, r, idx, a in tagged:
                if abs(c - vertex.cost) <= 1e-9 and abs(r - vertex.reward) <= 1e-9:
                    if best_idx is None or idx < best_idx:
                        best_idx, best_a = idx, a
            return best_a

        if pruned.min_cost > delta:  # nothing affordable: minimize future cost
            _idx, a, _curve, _bonus = min(
                entries, key=lambda e: (e[2].min_cost - e[3], e[0])
            )
            return ActionMixture.deterministic(a)
        if pruned.max_cost < delta:  # budget is slack: maximize reward
            _idx, a, _curve, _bonus = max(
                entries, key=lambda e: (e[2].max_reward + e[3], -e[0])
            )
            return ActionMixture.deterministic(a)

        vs = pruned.vertices
        low = vs[0]
        high = None
        for v in vs:
            if v.cost == delta:
                return ActionMixture.deterministic(owner(v))
            if v.cost < delta:
                low = v
            else:
                high = v
                break
        if high is None:
            return ActionMixture.deterministic(owner(low))
        a_l, a_h = owner(low), owner(high)
        if a_l == a_h:
            return ActionMixture.deterministic(a_l)
        sigma_h = (delta - low.cost) / (high.cost - low.cost)
        return ActionMixture.mix(a_l, 1.0 - sigma_h, low.cost, a_h, sigma_h, high.cost)

    # -- MCTS stages -------------------------------------------------------

    def _make_action_node(self, node: DecisionNode, action) -> ActionNode:
        exact = None
        if self.config.use_exact_dynamics:
            exact = tuple(self.model.exact_dynamics(node.state, action))
        anode = ActionNode(exact=exact)
        node.children[action] = anode
        return anode

    def _tally(self, anode: ActionNode, state, reward: float, cost: float):
        o = anode.outcomes.get(state)
        if o is None:
            anode.outcomes[state] = Outcome(1, reward, cost)
        else:
            o.count += 1

    def _sample_outcome(self, anode: ActionNode, rng):
        if anode.exact is not None:
            u = rng.random()
            acc = 0.0
            for t, p, _r, _c in anode.exact:
                acc += p
                if u <= acc:
                    return t
            return anode.exact[-1][0]
        u = rng.random() * anode.visits
        acc = 0
        for t, o in anode.outcomes.items():
            acc += o.count
            if u <= acc:
                return t
        return t  # float slack lands on the last outcome

    def expand(self, leaf: DecisionNode, rng) -> DecisionNode:
        """Grow the tree by one node under the least-visited action."""
        _anode, child = self._expand_edge(leaf, rng)
        return child

    def _expand_edge(self, leaf: DecisionNode, rng) -> tuple[ActionNode, DecisionNode]:
        if leaf.terminal or leaf.depth >= self.spec.horizon:
            raise InvalidStateError("cannot expand a terminal or horizon node")
        idx = min(
            range(len(leaf.actions)),
            key=lambda i: (
                leaf.children[leaf.actions[i]].visits
                if leaf.actions[i] in leaf.children
                else 0,
                i,
            ),
        )
        action = leaf.actions[idx]
        anode = leaf.children.get(action)
        if anode is None:
            anode = self._make_action_node(leaf, action)
        if self.config.use_exact_dynamics:
            leaf.visits += 1
            anode.visits += 1
            t = self._sample_outcome(anode, rng)
        else:
            t, r, c = self.model.sample(leaf.state, action, rng)
            self.samples_used += 1
            self._tally(anode, t, r, c)
            leaf.visits += 1
            anode.visits += 1
        o = anode.outcomes[t]
        if o.child is None:
            o.child = DecisionNode(t, leaf.depth + 1, self.model)
        return anode, o.child

    def rollout(self, node: DecisionNode, rng) -> ParetoCurve:
        """Cost-optimistic default-policy estimate of a fresh leaf's curve."""
        spec = self.spec
        depth_cap = spec.horizon - node.depth
        if self.config.rollout_depth is not None:
            depth_cap = min(depth_cap, self.config.rollout_depth)
        state = node.state
        total_r = 0.0
        total_c = 0.0
        disc_r = 1.0
        disc_c = 1.0
        model = self.model
        for _ in range(depth_cap):
            if model.is_terminal(state):
                break
            actions = model.actions(state)
            a = actions[rng.randrange(len(actions))]
            state, r, c = model.sample(state, a, rng)
            self.samples_used += 1
            total_r += disc_r * r
            total_c += disc_c * c
            disc_r *= spec.gamma_r
            disc_c *= spec.gamma_c
        return prune([(total_c, total_r), (0.0, 0.0)])

    def _backup_action(self, anode: ActionNode) -> ParetoCurve:
        successors = []
        for t, p, r, c in anode.dist():
            o = anode.outcomes.get(t)
            child = o.child if o is not None else None
            curve = child.curve if child is not None and child.curve is not None else ZERO_CURVE
            successors.append((p, curve, c, r))
        curve = backup_action_curve(successors, self.spec.gamma_c, self.spec.gamma_r)
        if self.config.epsilon_simplify > 0.0:
            curve = simplify(curve, self.config.epsilon_simplify)
        return curve

    def propagate(self, path: Sequence[tuple]):
        """Recompute action and node curves from the leaf back to the root."""
        for dnode, anode in reversed(path):
            anode.curve = self._backup_action(anode)
            dnode.curve = merge_decision_curve(
                [an.curve for an in dnode.children.values() if an.curve is not None]
            )

    def get_leaf(self, root: DecisionNode, delta: float, rng) -> tuple[DecisionNode, list]:
        """Descend to the next leaf; returns it with the path walked.

        A node counts as a leaf when it is terminal, sits at the horizon,
        or still has an untried action (the caller then expands it).
        Each traversal of an action edge draws one fresh simulator sample
        to refine the empirical dynamics, then follows an outcome drawn
        from those estimates, revising the local threshold on the way
        down.  Sampling an outcome whose child does not exist yet creates
        the child; that new node is this iteration's leaf.
        """
        node = root
        path: list[tuple] = []
        model = self.model
        exact = self.config.use_exact_dynamics
        self._created_leaf = None
        while True:
            if node.terminal or node.depth >= self.spec.horizon:
                node.visits += 1
                return node, path
            if node.untried_actions():
                return node, path
            sigma = self.get_action_dist(node, delta, explore=True)
            a = sigma.sample(rng)
            anode = node.children[a]
            if not exact:
                t_f, r, c = model.sample(node.state, a, rng)
                self.samples_used += 1
                self._tally(anode, t_f, r, c)
            node.visits += 1
            anode.visits += 1
            t = self._sample_outcome(anode, rng)
            delta = update_threshold(delta, sigma, a, t, anode, self.spec)
            path.append((node, anode))
            o = anode.outcomes[t]
            if o.child is None:
                o.child = DecisionNode(t, node.depth + 1, model)
                self._created_leaf = o.child
                return o.child, path
            node = o.child

    def expand_exhaustively(self, node: DecisionNode) -> None:
        """Build the complete exact-dynamics subtree below `node`.

        Every action of every reachable state is expanded down to the
        horizon and all curves are computed bottom-up, so the node's
        curve equals the exact finite-horizon frontier.  Only valid in
        exact-dynamics mode; tree size is exponential in the horizon.
        """
        if not self.config.use_exact_dynamics:
            raise InvalidStateError("exhaustive expansion requires exact dynamics")
        if node.terminal or node.depth >= self.spec.horizon:
            node.curve = ZERO_CURVE
            return
        for a in node.actions:
            anode = node.children.get(a)
            if anode is None:
                anode = self._make_action_node(node, a)
            for t, o in anode.outcomes.items():
                if o.child is None:
                    o.child = DecisionNode(t, node.depth + 1, self.model)
                self.expand_exhaustively(o.child)
            anode.curve = self._backup_action(anode)
        node.curve = merge_decision_curve(
            [an.curve for an in node.children.values()]
        )

    def run_iteration(self, root: DecisionNode, delta: float, rng):
        leaf, path = self.get_leaf(root, delta, rng)
        if (
            leaf is not self._created_leaf
            and not leaf.terminal
            and leaf.depth < self.spec.horizon
        ):
            anode, child = self._expand_edge(leaf, rng)
            path.append((leaf, anode))
            leaf = child
        if leaf.curve is None:
            leaf.curve = self.rollout(leaf, rng)
        self.propagate(path)

    # -- episode driver ----------------------------------------------------

    def plan_episode(self, rng) -> RunRecord:
        model, spec, config = self.model, self.spec, self.config
        if config.time_per_step_ms is None and config.iterations_per_step < 1:
            raise ValueError("iteration budget must be positive")
        state = model.initial_state()
        root = self.make_root(state)
        delta = spec.initial_threshold
        payoff = 0.0
        cost = 0.0
        disc_r = 1.0
        disc_c = 1.0
        steps = 0
        self.samples_used = 0
        wall_total = 0.0
        for step in range(spec.horizon):
            if model.is_terminal(state):
                break
            start = time.perf_counter()
            if config.time_per_step_ms is not None:
                deadline = start + config.time_per_step_ms / 1000.0
                self.run_iteration(root, delta, rng)
                while time.perf_counter() < deadline:
                    self.run_iteration(root, delta, rng)
            else:
                for _ in range(config.iterations_per_step):
                    self.run_iteration(root, delta, rng)
            sigma = self.get_action_dist(root, delta, explore=False)
            wall_total += time.perf_counter() - start
            a = sigma.sample(rng)
            t, r, c = model.sample(state, a, rng)
            anode = root.children.get(a)
            delta = update_threshold(delta, sigma, a, t, anode, spec, immediate_cost=c)
            payoff += disc_r * r
            cost += disc_c * c
            disc_r *= spec.gamma_r
            disc_c *= spec.gamma_c
            steps += 1
            o = anode.outcomes.get(t) if anode is not None else None
            if o is not None and o.child is not None:
                root = o.child  # keep the played subtree, drop the siblings
            else:
                root = DecisionNode(t, step + 1, model)
            state = t
        return RunRecord(
            payoff=payoff,
            cost=cost,
            steps=steps,
            samples=self.samples_used,
            wall_ms_per_step=(wall_total / steps * 1000.0) if steps else 0.0,
        )
