"""Exact geometry of piecewise-linear cost/reward trade-off curves.

A curve is the upper-left concave frontier of an achievable set of
(expected cost, expected payoff) vectors: vertices sorted by strictly
increasing cost, strictly increasing reward, strictly decreasing segment
slope.  All operations are pure and side-effect free.
"""

from __future__ import annotations

import math
from typing import Iterable, NamedTuple, Optional, Sequence

EPS = 1e-9
PROB_TOL = 1e-6
_CROSS_TOL = 1e-12


class Point(NamedTuple):
    cost: float
    reward: float


class ParetoCurve:
    """Immutable frontier; construct via :func:`prune` or friends."""

    __slots__ = ("vertices", "min_cost", "max_cost", "min_reward", "max_reward")

    def __init__(self, vertices: Sequence[Point]):
        vs = tuple(Point(float(c), float(r)) for c, r in vertices)
        if not vs:
            raise ValueError("a Pareto curve needs at least one vertex")
        self.vertices = vs
        self.min_cost = vs[0].cost
        self.max_cost = vs[-1].cost
        self.min_reward = vs[0].reward
        self.max_reward = vs[-1].reward

    def __len__(self) -> int:
        return len(self.vertices)

    def __iter__(self):
        return iter(self.vertices)

    def __eq__(self, other) -> bool:
        return isinstance(other, ParetoCurve) and self.vertices == other.vertices

    def __hash__(self) -> int:
        return hash(self.vertices)

    def __repr__(self) -> str:
        pts = ", ".join(f"({c:g},{r:g})" for c, r in self.vertices)
        return f"ParetoCurve[{pts}]"

    def validate(self, tol: float = 0.0) -> None:
        """Raise if the invariants (monotonicity, concavity) are broken."""
        vs = self.vertices
        for (c0, r0), (c1, r1) in zip(vs, vs[1:]):
            if not c1 > c0 + tol:
                raise ValueError(f"costs not strictly increasing: {c0} -> {c1}")
            if not r1 > r0 + tol:
                raise ValueError(f"rewards not strictly increasing: {r0} -> {r1}")
        for i in range(len(vs) - 2):
            s0 = _slope(vs[i], vs[i + 1])
            s1 = _slope(vs[i + 1], vs[i + 2])
            if not s1 < s0 - tol:
                raise ValueError(f"slopes not strictly decreasing: {s0} -> {s1}")
        for c, r in vs:
            if not (math.isfinite(c) and math.isfinite(r)):
                raise ValueError("non-finite vertex")


ZERO_CURVE = ParetoCurve([Point(0.0, 0.0)])


def _slope(p: Point, q: Point) -> float:
    return (q[1] - p[1]) / (q[0] - p[0])


def prune(points: Iterable[tuple]) -> ParetoCurve:
    """Upper-left concave frontier of a point set.

    Removes every point dominated (worse-or-equal cost AND reward in the
    wrong direction) by a convex combination of the others; the closure
    of the convex hull of the result equals that of the input.
    """
    pts = [(float(c), float(r)) for c, r in points]
    if not pts:
        raise ValueError("prune of an empty point set")
    for c, r in pts:
        if not (math.isfinite(c) and math.isfinite(r)):
            raise ValueError(f"non-finite point ({c}, {r})")
    pts.sort(key=lambda p: (p[0], -p[1]))

    # Collapse near-equal costs (keep best reward), drop pointwise-dominated.
    stage: list[tuple[float, float]] = []
    for c, r in pts:
        if stage:
            pc, pr = stage[-1]
            if c - pc <= EPS:
                if r > pr:  # near-identical cost: keep the better reward
                    stage[-1] = (c, r)
                continue
            if r <= pr + EPS:
                continue  # costs more, buys nothing
        stage.append((c, r))

    # Monotone-chain upper hull: keep only strictly concave turns.
    hull: list[tuple[float, float]] = []
    for p in stage:
        while len(hull) >= 2:
            (x0, y0), (x1, y1) = hull[-2], hull[-1]
            cross = (x1 - x0) * (p[1] - y0) - (y1 - y0) * (p[0] - x0)
            if cross >= -_CROSS_TOL:
                hull.pop()  # middle vertex on or below the chord
            else:
                break
        hull.append(p)

    # The hull pass can re-expose pointwise dominance wherever a popped
    # vertex was the previous reward maximum; rescan until stable.
    while True:
        cleaned = [hull[0]]
        for c, r in hull[1:]:
            if r > cleaned[-1][1] + EPS:
                cleaned.append((c, r))
        if len(cleaned) == len(hull):
            break
        hull = cleaned
    return ParetoCurve([Point(c, r) for c, r in hull])


def merge_decision_curve(action_curves: Sequence[ParetoCurve]) -> ParetoCurve:
    """Pruned union of the vertices of all per-action curves."""
    if not action_curves:
        raise ValueError("merge of an empty curve list")
    pts: list[Point] = []
    for curve in action_curves:
        pts.extend(curve.vertices)
    return prune(pts)


Successor = tuple  # (probability, ParetoCurve, immediate_cost, immediate_reward)


def _check_probabilities(successors: Sequence[Successor]) -> None:
    total = 0.0
    for p, _curve, _c, _r in successors:
        if p < -PROB_TOL:
            raise ValueError(f"negative successor probability {p}")
        total += p
    if abs(total - 1.0) > PROB_TOL:
        raise ValueError(f"successor probabilities sum to {total}, expected 1")


def _scaled_segments(successors, gamma_c, gamma_r):
    """Per-successor segments scaled by probability and discounts.

    Yields (slope, successor_index, segment_index, dcost, dreward) where
    dcost/dreward are contributions to the aggregated curve.
    """
    segs = []
    for i, (p, curve, _ic, _ir) in enumerate(successors):
        if p <= 0.0:
            continue
        vs = curve.vertices
        for j in range(len(vs) - 1):
            dc = vs[j + 1].cost - vs[j].cost
            dr = vs[j + 1].reward - vs[j].reward
            segs.append((dr * gamma_r / (dc * gamma_c), i, j, p * gamma_c * dc, p * gamma_r * dr))
    segs.sort(key=lambda s: (-s[0], s[1], s[2]))
    return segs


def backup_action_curve(
    successors: Sequence[Successor], gamma_c: float, gamma_r: float
) -> ParetoCurve:
    """Weighted, discounted Minkowski sum of successor curves.

    Each successor contributes probability * (discounted curve shifted by
    its immediate (cost, reward)).  Concavity lets the sum be built by
    merging segments in decreasing-slope order instead of all-pairs sums.
    """
    _check_probabilities(successors)
    base_c = 0.0
    base_r = 0.0
    for p, curve, ic, ir in successors:
        if p <= 0.0:
            continue
        v0 = curve.vertices[0]
        base_c += p * (gamma_c * v0.cost + ic)
        base_r += p * (gamma_r * v0.reward + ir)
    pts = [(base_c, base_r)]
    c, r = base_c, base_r
    for _slope_val, _i, _j, dc, dr in _scaled_segments(successors, gamma_c, gamma_r):
        c += dc
        r += dr
        pts.append((c, r))
    return prune(pts)


class Bracket(NamedTuple):
    """Where a threshold sits relative to a curve's vertex costs."""

    kind: str  # "all_above" | "all_below" | "between"
    low: Optional[Point]
    high: Optional[Point]


def bracket(curve: ParetoCurve, threshold: float) -> Bracket:
    """Nearest vertices below/above the threshold (inclusive on both sides).

    A vertex whose cost equals the threshold exactly is returned as both
    ends of the pair; callers degenerate to a deterministic choice then.
    """
    vs = curve.vertices
    if vs[0].cost > threshold:
        return Bracket("all_above", None, None)
    if vs[-1].cost < threshold:
        return Bracket("all_below", None, None)
    low = vs[0]
    for v in vs:
        if v.cost == threshold:
            return Bracket("between", v, v)
        if v.cost < threshold:
            low = v
        else:
            return Bracket("between", low, v)
    return Bracket("between", low, low)


def max_reward_at(curve: ParetoCurve, threshold: float) -> Optional[float]:
    """Best reward at cost budget `threshold`; None when infeasible."""
    vs = curve.vertices
    if threshold < vs[0].cost:
        return None
    if threshold >= vs[-1].cost:
        return vs[-1].reward
    for (c0, r0), (c1, r1) in zip(vs, vs[1:]):
        if threshold <= c1:
            t = (threshold - c0) / (c1 - c0)
            return r0 + t * (r1 - r0)
    return vs[-1].reward


def decompose(
    successors: Sequence[Successor],
    gamma_c: float,
    gamma_r: float,
    target_cost: float,
) -> list[Point]:
    """Per-successor points realizing the backed-up value at `target_cost`.

    Greedy slope-merge: every successor starts at its min-cost vertex and
    the remaining cost budget is spent on successor segments in decreasing
    reward-per-cost order (ties: lowest successor index), which maximizes
    the combined reward on concave curves.  The weighted discounted
    combination of the returned points plus immediates reproduces
    (target_cost, max_reward_at(backup, target_cost)).
    """
    _check_probabilities(successors)
    pos = [list(curve.vertices[0]) for _p, curve, _ic, _ir in successors]
    base_c = 0.0
    max_c = 0.0
    for p, curve, ic, ir in successors:
        if p <= 0.0:
            continue
        base_c += p * (gamma_c * curve.min_cost + ic)
        max_c += p * (gamma_c * curve.max_cost + ic)
    budget = target_cost - base_c
    if budget < -EPS or target_cost > max_c + EPS:
        raise ValueError(
            f"target cost {target_cost} outside feasible range [{base_c}, {max_c}]"
        )
    budget = max(budget, 0.0)
    for _slope_val, i, j, dc, dr in _scaled_segments(successors, gamma_c, gamma_r):
        if budget <= 0.0:
            break
        curve = successors[i][1]
        v0, v1 = curve.vertices[j], curve.vertices[j + 1]
        if budget >= dc:
            pos[i][0] = v1.cost
            pos[i][1] = v1.reward
            budget -= dc
        else:
            frac = budget / dc
            pos[i][0] = v0.cost + frac * (v1.cost - v0.cost)
            pos[i][1] = v0.reward + frac * (v1.reward - v0.reward)
            budget = 0.0
    return [Point(c, r) for c, r in pos]


def simplify(curve: ParetoCurve, epsilon: float) -> ParetoCurve:
    """Drop interior vertices whose removal lowers the frontier <= epsilon.

    Endpoints are always kept; epsilon 0 returns the curve unchanged.
    """
    if epsilon <= 0.0 or len(curve) <= 2:
        return curve
    vs = list(curve.vertices)
    kept = [vs[0]]
    i = 1
    while i < len(vs) - 1:
        a = kept[-1]
        b = vs[i]
        c = vs[i + 1]
        # vertical gap between b and the chord a-c at b's cost
        t = (b.cost - a.cost) / (c.cost - a.cost)
        chord = a.reward + t * (c.reward - a.reward)
        if b.reward - chord <= epsilon:
            i += 1  # drop b
        else:
            kept.append(b)
            i += 1
    kept.append(vs[-1])
    return prune(kept)


def frontier_distance(a: ParetoCurve, b: ParetoCurve) -> float:
    """Max discrepancy between two frontiers, as curves over cost.

    Combines endpoint differences with the largest reward gap at any
    vertex cost of either curve; zero iff the frontiers coincide.
    """
    d = max(
        abs(a.min_cost - b.min_cost),
        abs(a.max_cost - b.max_cost),
        abs(a.min_reward - b.min_reward),
        abs(a.max_reward - b.max_reward),
    )
    lo = max(a.min_cost, b.min_cost)
    hi = min(a.max_cost, b.max_cost)
    for curve, other in ((a, b), (b, a)):
        for c, r in curve.vertices:
            x = min(max(c, lo), hi)
            ra = max_reward_at(curve, x)
            rb = max_reward_at(other, x)
            if ra is None or rb is None:
                continue
            d = max(d, abs(ra - rb))
    return d
