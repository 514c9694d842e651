"""Gridworld benchmark: map format, random generator, and dynamics.

Maps are rectangles of tiles: `B` start, `G` gold, `#` wall, `T` trap,
`.` empty, with walled borders.  The agent moves in four directions but
slides perpendicular with probability p_slide (split evenly between the
two sides); moves into walls leave it in place.  Gold pays reward 1 on
first visit.  Traps either terminate the episode with cost 1 with
probability p_trap ("avoid") or deterministically charge p_trap and let
the agent continue ("softavoid").
"""

from __future__ import annotations

import random
from collections import deque
from dataclasses import dataclass
from typing import NamedTuple, Optional

from ..cmdp import GenerativeModel

TILE_CHARS = {"B", "G", "#", "T", "."}
ACTIONS = ("up", "down", "left", "right")
_MOVES = {"up": (-1, 0), "down": (1, 0), "left": (0, -1), "right": (0, 1)}
_PERPENDICULAR = {
    "up": ("left", "right"),
    "down": ("left", "right"),
    "left": ("up", "down"),
    "right": ("up", "down"),
}
GENERATION_RETRY_CAP = 1000


class MapError(ValueError):
    """Malformed, invalid, or ungeneratable map."""


@dataclass(frozen=True)
class GridMap:
    width: int
    height: int
    initial: tuple
    walls: frozenset
    golds: frozenset
    traps: frozenset

    def is_wall(self, cell) -> bool:
        r, c = cell
        if r < 0 or c < 0 or r >= self.height or c >= self.width:
            return True
        return cell in self.walls

    def serialize(self) -> str:
        rows = []
        for r in range(self.height):
            row = []
            for c in range(self.width):
                cell = (r, c)
                if cell in self.walls:
                    row.append("#")
                elif cell == self.initial:
                    row.append("B")
                elif cell in self.golds:
                    row.append("G")
                elif cell in self.traps:
                    row.append("T")
                else:
                    row.append(".")
            rows.append("".join(row))
        return "\n".join(rows)


def _reachable_from(gmap: GridMap, start) -> set:
    seen = {start}
    queue = deque([start])
    while queue:
        r, c = queue.popleft()
        for dr, dc in _MOVES.values():
            nxt = (r + dr, c + dc)
            if nxt not in seen and not gmap.is_wall(nxt):
                seen.add(nxt)
                queue.append(nxt)
    return seen


def parse_map(text: str) -> GridMap:
    lines = [line for line in text.strip("\n").split("\n")]
    if not lines or not lines[0]:
        raise MapError("empty map text")
    width = len(lines[0])
    height = len(lines)
    initial = None
    walls, golds, traps = set(), set(), set()
    for r, line in enumerate(lines):
        if len(line) != width:
            raise MapError(f"non-rectangular map: row {r} has width {len(line)}, expected {width}")
        for c, ch in enumerate(line):
            if ch not in TILE_CHARS:
                raise MapError(f"unknown character {ch!r} at row {r}, column {c}")
            if ch == "#":
                walls.add((r, c))
            elif ch == "B":
                if initial is not None:
                    raise MapError(f"second initial tile at row {r}, column {c}")
                initial = (r, c)
            elif ch == "G":
                golds.add((r, c))
            elif ch == "T":
                traps.add((r, c))
    if initial is None:
        raise MapError("no initial tile 'B' in map")
    for r in range(height):
        for c in (0, width - 1):
            if (r, c) not in walls:
                raise MapError(f"border tile not a wall at row {r}, column {c}")
    for c in range(width):
        for r in (0, height - 1):
            if (r, c) not in walls:
                raise MapError(f"border tile not a wall at row {r}, column {c}")
    gmap = GridMap(
        width=width,
        height=height,
        initial=initial,
        walls=frozenset(walls),
        golds=frozenset(golds),
        traps=frozenset(traps),
    )
    reachable = _reachable_from(gmap, initial)
    for gold in sorted(golds):
        if gold not in reachable:
            raise MapError(f"unreachable gold at row {gold[0]}, column {gold[1]}")
    return gmap


def generate_map(
    width: int,
    height: int,
    gold_count: int,
    trap_density: float = 0.15,
    wall_density: float = 0.1,
    seed: int = 0,
) -> GridMap:
    """Random valid map; identical output for identical arguments."""
    interior = [(r, c) for r in range(1, height - 1) for c in range(1, width - 1)]
    if gold_count + 1 > len(interior):
        raise MapError(
            f"cannot place {gold_count} golds plus the start in {len(interior)} interior tiles"
        )
    border = frozenset(
        [(r, c) for r in range(height) for c in (0, width - 1)]
        + [(r, c) for c in range(width) for r in (0, height - 1)]
    )
    rng = random.Random(seed)
    for _ in range(GENERATION_RETRY_CAP):
        walls = set(border)
        free = []
        for cell in interior:
            if rng.random() < wall_density:
                walls.add(cell)
            else:
                free.append(cell)
        if len(free) < gold_count + 1:
            continue
        picks = rng.sample(free, gold_count + 1)
        initial, golds = picks[0], set(picks[1:])
        traps = {
            cell
            for cell in free
            if cell != initial and cell not in golds and rng.random() < trap_density
        }
        gmap = GridMap(
            width=width,
            height=height,
            initial=initial,
            walls=frozenset(walls),
            golds=frozenset(golds),
            traps=frozenset(traps),
        )
        reachable = _reachable_from(gmap, initial)
        if all(g in reachable for g in golds):
            return gmap
    raise MapError(
        f"no valid map found in {GENERATION_RETRY_CAP} attempts "
        f"(width={width}, height={height}, gold_count={gold_count}, seed={seed})"
    )


def save_map_dataset(maps, comments=None) -> str:
    """Dataset text: '#'-prefixed comment lines, blank line between maps."""
    blocks = []
    for i, gmap in enumerate(maps):
        lines = []
        if comments is not None:
            lines.append(f"# {comments[i]}")
        lines.append(gmap.serialize())
        blocks.append("\n".join(lines))
    return "\n\n".join(blocks) + "\n"


def load_map_dataset(text: str) -> list[GridMap]:
    """Parse a dataset file; a comment is any line with non-tile characters."""
    maps = []
    block: list[str] = []
    for line in text.split("\n") + [""]:
        stripped = line.rstrip()
        is_row = bool(stripped) and all(ch in TILE_CHARS for ch in stripped)
        if is_row:
            block.append(stripped)
        elif block:
            maps.append(parse_map("\n".join(block)))
            block = []
    return maps


class GridworldState(NamedTuple):
    position: tuple
    collected: frozenset
    alive: bool


@dataclass(frozen=True)
class GridworldConfig:
    mode: str = "avoid"  # "avoid" or "softavoid"
    p_trap: float = 0.2
    p_slide: float = 0.0

    def __post_init__(self):
        if self.mode not in ("avoid", "softavoid"):
            raise ValueError(f"unknown mode {self.mode!r}")
        if not 0.0 <= self.p_trap <= 1.0 or not 0.0 <= self.p_slide <= 1.0:
            raise ValueError("probabilities must lie in [0, 1]")


class GridworldEnv(GenerativeModel):
    """Finite-horizon gold collection with trap costs."""

    def __init__(self, gmap: GridMap, config: GridworldConfig):
        self.map = gmap
        self.config = config
        self._moves: dict = {}  # (position, action) -> [(target, probability)]

    def initial_state(self) -> GridworldState:
        return GridworldState(self.map.initial, frozenset(), True)

    def actions(self, state):
        return ACTIONS

    def is_terminal(self, state) -> bool:
        return not state.alive

    def max_step_cost(self) -> float:
        return 1.0 if self.config.mode == "avoid" else self.config.p_trap

    @property
    def has_exact_dynamics(self) -> bool:
        return True

    def _movement_outcomes(self, position, action):
        """(next position, probability) for the slide model, wall-clamped."""
        cached = self._moves.get((position, action))
        if cached is not None:
            return cached
        if action not in _MOVES:
            raise ValueError(f"unknown action {action!r}")
        p_slide = self.config.p_slide
        raw = [(action, 1.0 - p_slide)]
        if p_slide > 0.0:
            side_a, side_b = _PERPENDICULAR[action]
            raw.append((side_a, p_slide / 2.0))
            raw.append((side_b, p_slide / 2.0))
        merged: dict = {}
        for direction, p in raw:
            if p <= 0.0:
                continue
            dr, dc = _MOVES[direction]
            target = (position[0] + dr, position[1] + dc)
            if self.map.is_wall(target):
                target = position
            merged[target] = merged.get(target, 0.0) + p
        outcomes = list(merged.items())
        self._moves[(position, action)] = outcomes
        return outcomes

    def _land(self, state: GridworldState, target):
        """Deterministic consequences of arriving on `target`.

        Returns (new state, reward, cost, trap_hit); staying in place
        (wall bump) triggers nothing, since the tile's effects were
        already resolved on arrival.
        """
        if target == state.position:
            return GridworldState(target, state.collected, True), 0.0, 0.0, False
        reward = 0.0
        collected = state.collected
        if target in self.map.golds and target not in collected:
            reward = 1.0
            collected = collected | {target}
        trap_hit = target in self.map.traps
        cost = 0.0
        if trap_hit and self.config.mode == "softavoid":
            cost = self.config.p_trap
            trap_hit = False
        return GridworldState(target, collected, True), reward, cost, trap_hit

    def sample(self, state: GridworldState, action, rng):
        if not state.alive:
            raise ValueError("cannot step a terminal state")
        outcomes = self._movement_outcomes(state.position, action)
        u = rng.random()
        acc = 0.0
        target = outcomes[-1][0]
        for cell, p in outcomes:
            acc += p
            if u <= acc:
                target = cell
                break
        nxt, reward, cost, trap_hit = self._land(state, target)
        if trap_hit and rng.random() < self.config.p_trap:
            return GridworldState(nxt.position, nxt.collected, False), reward, cost + 1.0
        return nxt, reward, cost

    def exact_dynamics(self, state: GridworldState, action):
        if not state.alive:
            raise ValueError("cannot step a terminal state")
        transitions = []
        p_trap = self.config.p_trap
        for target, p in self._movement_outcomes(state.position, action):
            nxt, reward, cost, trap_hit = self._land(state, target)
            if trap_hit and p_trap > 0.0:
                dead = GridworldState(nxt.position, nxt.collected, False)
                transitions.append((dead, p * p_trap, reward, cost + 1.0))
                if p_trap < 1.0:
                    transitions.append((nxt, p * (1.0 - p_trap), reward, cost))
            else:
                transitions.append((nxt, p, reward, cost))
        return transitions
