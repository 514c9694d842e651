"""Baseline constrained planners: Lagrangian-dual UCT and flow-LP UCT.

Both planners run a scalar UCT search (single reward and cost running
means per action) instead of Pareto curves.  The Lagrangian planner
("dual UCT") scalarizes reward minus lambda times cost and adjusts
lambda by stochastic gradient steps toward the cost budget; its per-step
threshold update subtracts only the mean immediate cost, which is known
to overspend on asymmetric branches.  The flow-LP planner searches for
payoff alone and then solves a linear program over the sampled tree to
pick a root action distribution whose expected cost meets the budget.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass

import numpy as np

from .cmdp import GenerativeModel, ProblemSpec, RunRecord
from .simplex import lp_solve
from .tuct import ALPHA_FLOOR, InvalidStateError, PlannerConfig

LAMBDA_CAP = 1e4
GREEDY_TIE_FRACTION = 0.01  # scalarized-value ties, as a fraction of alpha


# -- shared scalar search tree ----------------------------------------------


class ScalarOutcome:
    __slots__ = ("count", "reward", "cost", "child")

    def __init__(self, count: int, reward: float, cost: float, child=None):
        self.count = count
        self.reward = reward
        self.cost = cost
        self.child = child


class ScalarActionNode:
    __slots__ = ("visits", "q_r", "q_c", "outcomes")

    def __init__(self):
        self.visits = 0
        self.q_r = 0.0
        self.q_c = 0.0
        self.outcomes: dict = {}

    def dist(self):
        n = self.visits
        return [(t, o.count / n, o.reward, o.cost) for t, o in self.outcomes.items()]

    def mean_immediate_cost(self) -> float:
        return sum(o.count * o.cost for o in self.outcomes.values()) / self.visits


class ScalarDecisionNode:
    __slots__ = (
        "state",
        "depth",
        "terminal",
        "actions",
        "visits",
        "children",
        "rollout_r",
        "rollout_c",
        "r_min",
        "r_max",
        "c_min",
        "c_max",
    )

    def __init__(self, state, depth: int, model: GenerativeModel):
        self.state = state
        self.depth = depth
        self.terminal = model.is_terminal(state)
        self.actions: tuple = () if self.terminal else tuple(model.actions(state))
        self.visits = 1
        self.children: dict = {}
        self.rollout_r = 0.0
        self.rollout_c = 0.0
        self.r_min = math.inf
        self.r_max = -math.inf
        self.c_min = math.inf
        self.c_max = -math.inf

    def note_return(self, g_r: float, g_c: float):
        self.r_min = min(self.r_min, g_r)
        self.r_max = max(self.r_max, g_r)
        self.c_min = min(self.c_min, g_c)
        self.c_max = max(self.c_max, g_c)

    def reward_range(self) -> float:
        if self.r_max < self.r_min:
            return ALPHA_FLOOR
        return max(self.r_max - self.r_min, ALPHA_FLOOR)

    def cost_range(self) -> float:
        if self.c_max < self.c_min:
            return ALPHA_FLOOR
        return max(self.c_max - self.c_min, ALPHA_FLOOR)


class _ScalarUCT:
    """Scalar UCT skeleton; subclasses provide the selection score."""

    def __init__(self, model: GenerativeModel, spec: ProblemSpec, config: PlannerConfig):
        if config.use_exact_dynamics:
            raise InvalidStateError("scalar baselines always plan from samples")
        self.model = model
        self.spec = spec
        self.config = config
        self.samples_used = 0

    def make_root(self, state) -> ScalarDecisionNode:
        return ScalarDecisionNode(state, 0, self.model)

    def score(self, node: ScalarDecisionNode, anode: ScalarActionNode) -> float:
        raise NotImplementedError

    def rollout(self, node: ScalarDecisionNode, rng) -> tuple[float, float]:
        spec = self.spec
        depth_cap = spec.horizon - node.depth
        if self.config.rollout_depth is not None:
            depth_cap = min(depth_cap, self.config.rollout_depth)
        state = node.state
        model = self.model
        total_r = 0.0
        total_c = 0.0
        disc_r = 1.0
        disc_c = 1.0
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
        return total_r, total_c

    def run_iteration(self, root: ScalarDecisionNode, rng) -> None:
        spec = self.spec
        model = self.model
        node = root
        path = []  # (node, anode, immediate reward, immediate cost)
        while not node.terminal and node.depth < spec.horizon:
            untried = [a for a in node.actions if a not in node.children]
            if untried:
                a = untried[0]
                anode = ScalarActionNode()
                node.children[a] = anode
            else:
                a = max(
                    node.actions,
                    key=lambda act: self.score(node, node.children[act]),
                )
                anode = node.children[a]
            t, r, c = model.sample(node.state, a, rng)
            self.samples_used += 1
            o = anode.outcomes.get(t)
            if o is None:
                o = ScalarOutcome(0, r, c)
                anode.outcomes[t] = o
            o.count += 1
            node.visits += 1
            anode.visits += 1
            path.append((node, anode, r, c))
            if o.child is None:
                o.child = ScalarDecisionNode(t, node.depth + 1, model)
                node = o.child
                break
            node = o.child
        g_r, g_c = self.rollout(node, rng)
        node.rollout_r = g_r
        node.rollout_c = g_c
        node.note_return(g_r, g_c)
        for dnode, anode, r, c in reversed(path):
            g_r = r + spec.gamma_r * g_r
            g_c = c + spec.gamma_c * g_c
            anode.q_r += (g_r - anode.q_r) / anode.visits
            anode.q_c += (g_c - anode.q_c) / anode.visits
            dnode.note_return(g_r, g_c)

    def _run_budget(self, root: ScalarDecisionNode, rng, on_iteration=None) -> float:
        config = self.config
        start = time.perf_counter()
        if config.time_per_step_ms is not None:
            deadline = start + config.time_per_step_ms / 1000.0
            first = True
            n = 0
            while first or time.perf_counter() < deadline:
                first = False
                self.run_iteration(root, rng)
                if on_iteration is not None:
                    on_iteration(n)
                n += 1
        else:
            for n in range(config.iterations_per_step):
                self.run_iteration(root, rng)
                if on_iteration is not None:
                    on_iteration(n)
        return time.perf_counter() - start


# -- Lagrangian-dual UCT ------------------------------------------------------


@dataclass
class LagrangeState:
    """Dual multiplier for the cost constraint, updated by SGD."""

    lam: float = 1.0
    step: int = 0
    lam_max: float = LAMBDA_CAP

    def update(self, cost_gap: float) -> None:
        kappa = 1.0 / (1.0 + self.step)
        self.lam = min(max(self.lam + kappa * cost_gap, 0.0), self.lam_max)
        self.step += 1


def lagrangian_update_threshold(delta: float, mean_immediate_cost: float, spec: ProblemSpec) -> float:
    """Per-step budget update that ignores which outcome was realized.

    Subtracting only the mean immediate cost keeps the same budget on
    every branch, so a branch that must overspend is not compensated by
    the branches that underspend; realized expected cost can exceed the
    original budget on asymmetric trees.
    """
    return (delta - mean_immediate_cost) / spec.gamma_c


class LagrangianUCT(_ScalarUCT):
    """UCT over reward minus lambda times cost, with SGD on lambda."""

    def __init__(self, model, spec, config):
        super().__init__(model, spec, config)
        lam_max = min(spec.cost_bound / max(spec.initial_threshold, 1e-6), LAMBDA_CAP)
        self.dual = LagrangeState(lam=1.0, lam_max=max(lam_max, 1.0))

    def score(self, node, anode):
        lam = self.dual.lam
        alpha = max(node.reward_range() + lam * node.cost_range(), ALPHA_FLOOR)
        bonus = self.config.exploration * alpha * math.sqrt(
            math.log(node.visits) / (anode.visits + 1)
        )
        return anode.q_r - lam * anode.q_c + bonus

    def greedy_action(self, node: ScalarDecisionNode):
        lam = self.dual.lam
        return max(
            (a for a in node.actions if a in node.children),
            key=lambda a: node.children[a].q_r - lam * node.children[a].q_c,
        )

    def root_policy(self, node: ScalarDecisionNode, delta: float):
        """Action mix meeting the cost budget among near-best actions.

        Among actions whose scalarized value is within a small tolerance
        of the best, mixes the cheapest and the dearest so the expected
        cost equals the budget (clamped to pure play when one side
        already satisfies it).  Returns [(action, probability), ...].
        """
        lam = self.dual.lam
        tried = [a for a in node.actions if a in node.children]
        if not tried:
            raise InvalidStateError("root policy on an unexpanded node")
        values = {a: node.children[a].q_r - lam * node.children[a].q_c for a in tried}
        best = max(values.values())
        alpha = max(node.reward_range() + lam * node.cost_range(), ALPHA_FLOOR)
        ties = [a for a in tried if values[a] >= best - GREEDY_TIE_FRACTION * alpha]
        if len(ties) == 1:
            return [(ties[0], 1.0)]
        low = min(ties, key=lambda a: node.children[a].q_c)
        high = max(ties, key=lambda a: node.children[a].q_c)
        c_low = node.children[low].q_c
        c_high = node.children[high].q_c
        if delta <= c_low:
            return [(low, 1.0)]
        if delta >= c_high:
            return [(high, 1.0)]
        nu = (delta - c_low) / (c_high - c_low)
        return [(low, 1.0 - nu), (high, nu)]

    def plan_episode(self, rng) -> RunRecord:
        model, spec = self.model, self.spec
        state = model.initial_state()
        root = self.make_root(state)
        delta = spec.initial_threshold
        payoff = cost = 0.0
        disc_r = disc_c = 1.0
        steps = 0
        self.samples_used = 0
        wall_total = 0.0

        for step in range(spec.horizon):
            if model.is_terminal(state):
                break

            def adjust_dual(n, _root=root, _delta=delta):
                greedy = self.greedy_action(_root)
                gap = _root.children[greedy].q_c - _delta
                self.dual.update(gap)

            self.dual.step = 0  # restart the step-size schedule per decision
            wall_total += self._run_budget(root, rng, on_iteration=adjust_dual)
            policy = self.root_policy(root, delta)
            a = _sample_policy(policy, rng)
            anode = root.children[a]
            t, r, c = model.sample(state, a, rng)
            delta = lagrangian_update_threshold(delta, anode.mean_immediate_cost(), spec)
            payoff += disc_r * r
            cost += disc_c * c
            disc_r *= spec.gamma_r
            disc_c *= spec.gamma_c
            steps += 1
            o = anode.outcomes.get(t)
            if o is not None and o.child is not None:
                root = o.child
            else:
                root = ScalarDecisionNode(t, step + 1, model)
            state = t
        return RunRecord(
            payoff=payoff,
            cost=cost,
            steps=steps,
            samples=self.samples_used,
            wall_ms_per_step=(wall_total / steps * 1000.0) if steps else 0.0,
        )


def ccpomcp_plan_episode(model, spec, config, rng) -> RunRecord:
    return LagrangianUCT(model, spec, config).plan_episode(rng)


# -- flow-LP UCT ---------------------------------------------------------------


@dataclass
class FlowLP:
    """Linear program over the sampled tree's action-edge flows."""

    edges: list  # (node, action) per variable, root edges first
    reward: np.ndarray  # objective coefficients (discounted reward per unit flow)
    cost: np.ndarray  # cost-constraint coefficients
    a_eq: np.ndarray  # flow conservation (first row: root outflow = 1)
    b_eq: np.ndarray
    delta: float


def build_flow_lp(root: ScalarDecisionNode, delta: float, spec: ProblemSpec) -> FlowLP:
    edges = []
    index = {}
    internal = []  # nodes with >= 1 expanded action, BFS order
    queue = [root]
    while queue:
        node = queue.pop(0)
        tried = [a for a in node.actions if a in node.children]
        if not tried:
            continue
        internal.append(node)
        for a in tried:
            index[(id(node), a)] = len(edges)
            edges.append((node, a))
            for o in node.children[a].outcomes.values():
                if o.child is not None:
                    queue.append(o.child)
    if not edges:
        raise InvalidStateError("flow program needs at least one expanded root action")

    n = len(edges)
    reward = np.zeros(n)
    cost = np.zeros(n)
    for k, (node, a) in enumerate(edges):
        d = node.depth - root.depth
        anode = node.children[a]
        for t, p, r, c in anode.dist():
            reward[k] += p * r * spec.gamma_r**d
            cost[k] += p * c * spec.gamma_c**d
            child = anode.outcomes[t].child
            if child is None:
                continue
            child_tried = [ca for ca in child.actions if ca in child.children]
            if not child_tried:  # frontier: close with the rollout estimate
                reward[k] += p * spec.gamma_r ** (d + 1) * child.rollout_r
                cost[k] += p * spec.gamma_c ** (d + 1) * child.rollout_c

    rows = []
    rhs = []
    root_row = np.zeros(n)
    for a in root.actions:
        if (id(root), a) in index:
            root_row[index[(id(root), a)]] = 1.0
    rows.append(root_row)
    rhs.append(1.0)
    for node, a in edges:
        anode = node.children[a]
        k = index[(id(node), a)]
        for t, p, _r, _c in anode.dist():
            child = anode.outcomes[t].child
            if child is None:
                continue
            child_tried = [ca for ca in child.actions if ca in child.children]
            if not child_tried:
                continue
            row = np.zeros(n)
            for ca in child_tried:
                row[index[(id(child), ca)]] = 1.0
            row[k] -= p
            rows.append(row)
            rhs.append(0.0)
    return FlowLP(
        edges=edges,
        reward=reward,
        cost=cost,
        a_eq=np.array(rows),
        b_eq=np.array(rhs),
        delta=delta,
    )


def solve_flow_lp(
    root: ScalarDecisionNode,
    delta: float,
    spec: ProblemSpec,
    backend: str = "bland",
) -> tuple[dict, bool]:
    """Root action distribution of the best budget-respecting tree flow.

    Returns (distribution, feasible).  When no flow meets the budget the
    cost-minimizing flow is returned instead, flagged infeasible.
    """
    lp = build_flow_lp(root, delta, spec)
    result = lp_solve(
        lp.reward,
        a_ub=[lp.cost],
        b_ub=[lp.delta],
        a_eq=lp.a_eq,
        b_eq=lp.b_eq,
        maximize=True,
        backend=backend,
    )
    feasible = result.status == "optimal"
    if not feasible:
        result = lp_solve(
            lp.cost, a_eq=lp.a_eq, b_eq=lp.b_eq, maximize=False, backend=backend
        )
        if result.status != "optimal":
            raise RuntimeError("flow conservation system unexpectedly infeasible")
    dist = {}
    for k, (node, a) in enumerate(lp.edges):
        if node is not root:
            break
        dist[a] = max(float(result.x[k]), 0.0)
    total = sum(dist.values())
    if total <= 0.0:
        uniform = 1.0 / len(dist)
        return {a: uniform for a in dist}, feasible
    return {a: v / total for a, v in dist.items()}, feasible


def naive_update_threshold(delta: float, immediate_cost: float, spec: ProblemSpec) -> float:
    """Subtract the realized cost and undiscount; no branch redistribution."""
    return (delta - immediate_cost) / spec.gamma_c


class FlowLPUCT(_ScalarUCT):
    """Payoff-only UCT; the budget enters only through the root flow LP."""

    def __init__(self, model, spec, config, lp_backend: str = "bland"):
        super().__init__(model, spec, config)
        self.lp_backend = lp_backend

    def score(self, node, anode):
        bonus = self.config.exploration * node.reward_range() * math.sqrt(
            math.log(node.visits) / (anode.visits + 1)
        )
        return anode.q_r + bonus

    def plan_episode(self, rng) -> RunRecord:
        model, spec = self.model, self.spec
        state = model.initial_state()
        root = self.make_root(state)
        delta = spec.initial_threshold
        payoff = cost = 0.0
        disc_r = disc_c = 1.0
        steps = 0
        self.samples_used = 0
        wall_total = 0.0
        for step in range(spec.horizon):
            if model.is_terminal(state):
                break
            wall_total += self._run_budget(root, rng)
            start = time.perf_counter()
            dist, _feasible = solve_flow_lp(root, delta, spec, backend=self.lp_backend)
            wall_total += time.perf_counter() - start
            a = _sample_policy(sorted(dist.items()), rng)
            anode = root.children[a]
            t, r, c = model.sample(state, a, rng)
            delta = naive_update_threshold(delta, c, spec)
            payoff += disc_r * r
            cost += disc_c * c
            disc_r *= spec.gamma_r
            disc_c *= spec.gamma_c
            steps += 1
            o = anode.outcomes.get(t)
            if o is not None and o.child is not None:
                root = o.child
            else:
                root = ScalarDecisionNode(t, step + 1, model)
            state = t
        return RunRecord(
            payoff=payoff,
            cost=cost,
            steps=steps,
            samples=self.samples_used,
            wall_ms_per_step=(wall_total / steps * 1000.0) if steps else 0.0,
        )


def ramcp_plan_episode(model, spec, config, rng, lp_backend: str = "bland") -> RunRecord:
    return FlowLPUCT(model, spec, config, lp_backend=lp_backend).plan_episode(rng)


def _sample_policy(pairs, rng):
    pairs = list(pairs)
    u = rng.random()
    acc = 0.0
    for a, p in pairs:
        acc += p
        if u <= acc:
            return a
    return pairs[-1][0]
