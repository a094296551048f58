"""
agents.py

Game-playing agents: a UCT Monte Carlo tree search agent whose strength is
set by (max depth, max iterations), plus small scripted agents used as
baselines and in tests.

Simultaneous moves are approximated by alternation. One tree ply assigns a
command to one free unit; plies alternate between the players (the
searching player first) and once every free unit on both sides has a
command the joint action is applied. After that the state is fast-forwarded
until some unit has a real choice again.
"""

from __future__ import annotations

import logging
import math
from dataclasses import asdict, dataclass, replace
from typing import Any, Dict, List, Mapping, Optional, Tuple

import numpy as np

from engine import (
    Command,
    CommandKind,
    GameState,
    PlayerAction,
    UnitInstance,
    advance,
    chebyshev,
    has_choice,
    is_legal,
    manhattan,
    needs_decision,
    neighbor_cell,
    unit_commands,
)
from errors import ConfigError, ContractViolation

logger = logging.getLogger(__name__)

SKILL_LEVELS: Tuple[str, ...] = ("strong", "medium", "weak")

_PRESETS: Dict[str, Tuple[int, int]] = {
    "strong": (10, 1000),
    "medium": (5, 500),
    "weak": (2, 250),
}

# study-config key -> AgentConfig field
_CONFIG_KEYS = {
    "maxDepth": "max_depth",
    "maxIterations": "max_iterations",
    "explorationConstant": "exploration_constant",
    "playoutHorizon": "playout_horizon",
    "decisionPeriod": "decision_period",
    "seed": "seed",
}


@dataclass(frozen=True)
class AgentConfig:
    max_depth: int = 5
    max_iterations: int = 500
    exploration_constant: float = math.sqrt(2)
    playout_horizon: int = 100
    decision_period: int = 10
    seed: int = 0

    def __post_init__(self) -> None:
        for name in ("max_depth", "max_iterations", "playout_horizon", "decision_period"):
            if getattr(self, name) < 1:
                raise ConfigError(f"agent config: {name} must be >= 1")
        if self.exploration_constant <= 0:
            raise ConfigError("agent config: exploration_constant must be > 0")

    def with_overrides(self, overrides: Optional[Mapping[str, Any]]) -> "AgentConfig":
        """Apply camelCase overrides from a study config document."""
        if not overrides:
            return self
        changes = {}
        for key, value in overrides.items():
            if key not in _CONFIG_KEYS:
                raise ConfigError(f"agent config: unknown key {key!r}")
            changes[_CONFIG_KEYS[key]] = value
        return replace(self, **changes)

    def to_dict(self) -> Dict[str, Any]:
        values = asdict(self)
        return {key: values[attr] for key, attr in _CONFIG_KEYS.items()}


def skill_preset(level: str) -> AgentConfig:
    """AgentConfig for a skill tier: strong (10, 1000), medium (5, 500), weak (2, 250)."""
    try:
        depth, iterations = _PRESETS[level.lower()]
    except KeyError:
        raise ConfigError(f"unknown skill level {level!r}; expected one of {', '.join(SKILL_LEVELS)}") from None
    return AgentConfig(max_depth=depth, max_iterations=iterations)


# ============================================================================
# State evaluation
# ============================================================================

def _material(state: GameState, player: int) -> float:
    total = float(state.resources[player])
    for unit in state.units.values():
        if unit.owner == player:
            total += unit.hp * unit.type_def.cost + unit.carried
    return total


def evaluate_state(state: GameState, player: int) -> float:
    """Material balance from `player`'s point of view, in [-1, 1].

    Terminal states score +1 (win), -1 (loss) or 0 (draw).
    """
    if state.terminal is not None:
        if state.terminal.winner is None:
            return 0.0
        return 1.0 if state.terminal.winner == player else -1.0
    mine = _material(state, player)
    theirs = _material(state, 1 - player)
    if mine + theirs == 0:
        return 0.0
    return (mine - theirs) / (mine + theirs)


# ============================================================================
# Tree search
# ============================================================================

Slot = Tuple[int, int]  # (player, unit id)


def _decision_queue(state: GameState, first: int) -> Tuple[Slot, ...]:
    """Free units with a real choice, alternating players starting with `first`."""
    if state.terminal is not None:
        return ()
    per_player: List[List[Slot]] = [[], []]
    for player in (0, 1):
        for unit in state.free_units(player):
            if has_choice(state, unit):
                per_player[player].append((player, unit.id))
    ordered: List[Slot] = []
    mine, theirs = per_player[first], per_player[1 - first]
    for index in range(max(len(mine), len(theirs))):
        if index < len(mine):
            ordered.append(mine[index])
        if index < len(theirs):
            ordered.append(theirs[index])
    return tuple(ordered)


def _fast_forward(state: GameState) -> None:
    while state.terminal is None and not needs_decision(state, 0) and not needs_decision(state, 1):
        advance(state)


def _random_command(state: GameState, unit: UnitInstance, rng: np.random.Generator) -> Command:
    commands = unit_commands(state, unit)
    return commands[int(rng.integers(len(commands)))]


def random_action(state: GameState, player: int, rng: np.random.Generator) -> PlayerAction:
    """Uniformly random legal command for every free unit of `player`."""
    return {unit.id: _random_command(state, unit, rng) for unit in state.free_units(player)}


class _Node:
    __slots__ = (
        "state", "pending", "queue", "parent", "command", "applied",
        "depth", "untried", "children", "visits", "total", "proven",
    )

    def __init__(
        self,
        state: GameState,
        pending: Tuple[PlayerAction, PlayerAction],
        queue: Tuple[Slot, ...],
        root_player: int,
        parent: Optional["_Node"] = None,
        command: Optional[Command] = None,
        applied: bool = False,
    ):
        self.state = state
        self.pending = pending
        self.queue = queue
        self.parent = parent
        self.command = command
        # True when this node's state is the result of applying a joint action.
        self.applied = applied
        self.depth = 0 if parent is None else parent.depth + 1
        self.children: List[_Node] = []
        self.visits = 0
        # Sum of playout values from the searching player's point of view.
        self.total = 0.0
        self.proven: Optional[float] = None
        if state.terminal is not None:
            self.proven = evaluate_state(state, root_player)
            self.untried: List[Command] = []
        elif queue:
            _, unit_id = queue[0]
            self.untried = list(unit_commands(state, state.units[unit_id]))
        else:
            self.untried = []

    @property
    def mover(self) -> Optional[int]:
        return self.queue[0][0] if self.queue else None

    def expand(self, command: Command, root_player: int) -> "_Node":
        player, unit_id = self.queue[0]
        pending = (dict(self.pending[0]), dict(self.pending[1]))
        pending[player][unit_id] = command
        rest = self.queue[1:]
        if rest:
            child = _Node(self.state, pending, rest, root_player, self, command)
        else:
            state = self.state.clone(record_events=False)
            advance(state, pending[0], pending[1])
            _fast_forward(state)
            child = _Node(state, ({}, {}), _decision_queue(state, root_player), root_player, self, command, applied=True)
        self.children.append(child)
        return child

    def value_for(self, player: int, root_player: int) -> float:
        mean = self.proven if self.proven is not None else self.total / self.visits
        return mean if player == root_player else -mean


class _Search:
    def __init__(self, state: GameState, player: int, cfg: AgentConfig, rng: np.random.Generator):
        self.player = player
        self.cfg = cfg
        self.rng = rng
        self.root = _Node(state, ({}, {}), _decision_queue(state, player), player)

    def run(self) -> int:
        iterations = 0
        while iterations < self.cfg.max_iterations and self.root.proven is None:
            self._iterate()
            iterations += 1
        return iterations

    def _iterate(self) -> None:
        node = self.root
        while True:
            if node.proven is not None:
                value = node.proven
                break
            if node.depth >= self.cfg.max_depth or not node.queue:
                value = self._playout(node)
                break
            if node.untried:
                # Expansion order is random, not canonical.
                command = node.untried.pop(int(self.rng.integers(len(node.untried))))
                node = node.expand(command, self.player)
                value = node.proven if node.proven is not None else self._playout(node)
                break
            node = self._select(node)
        self._backpropagate(node, value)

    def _select(self, node: _Node) -> _Node:
        mover = node.mover
        log_n = math.log(node.visits)
        best, best_score = node.children[0], -math.inf
        for child in node.children:
            score = child.value_for(mover, self.player)
            if child.proven is None:
                score += self.cfg.exploration_constant * math.sqrt(log_n / child.visits)
            if score > best_score:
                best, best_score = child, score
        return best

    def _playout(self, node: _Node) -> float:
        state = node.state.clone(record_events=False)
        if node.queue:
            pending = (dict(node.pending[0]), dict(node.pending[1]))
            for player, unit_id in node.queue:
                pending[player][unit_id] = _random_command(state, state.units[unit_id], self.rng)
            advance(state, pending[0], pending[1])
        horizon = state.tick + self.cfg.playout_horizon
        while state.terminal is None and state.tick < horizon:
            advance(state, random_action(state, 0, self.rng), random_action(state, 1, self.rng))
        return evaluate_state(state, self.player)

    def _backpropagate(self, node: Optional[_Node], value: float) -> None:
        while node is not None:
            node.visits += 1
            node.total += value
            if node.proven is None and node.children:
                node.proven = self._proof(node)
            node = node.parent

    def _proof(self, node: _Node) -> Optional[float]:
        """Minimax over decided children; None while the node is still open."""
        maximizing = node.mover == self.player
        target = 1.0 if maximizing else -1.0
        if any(child.proven == target for child in node.children):
            return target
        if node.untried or node.depth >= self.cfg.max_depth:
            return None
        values = [child.proven for child in node.children]
        if any(value is None for value in values):
            return None
        return max(values) if maximizing else min(values)

    def best_child(self, node: _Node) -> Optional[_Node]:
        """Proven win for the mover if any, else most visits; ties go to the
        lowest index in the unit's canonical command list."""
        if not node.children:
            return None
        if node.mover == self.player:
            for child in node.children:
                if child.proven == 1.0:
                    return child
        _, unit_id = node.queue[0]
        rank = {command: i for i, command in enumerate(unit_commands(node.state, node.state.units[unit_id]))}
        return max(node.children, key=lambda child: (child.visits, -rank[child.command]))

    @staticmethod
    def _settled(node: _Node, child: _Node) -> bool:
        """True when `child` is a proven win or strictly the most visited."""
        if child.proven == 1.0:
            return True
        return all(other is child or other.visits < child.visits for other in node.children)

    def plan(self) -> PlayerAction:
        """Searching player's commands along the principal path of the current batch.

        The root unit always takes the root's best child. Further units take
        their tree command only while the search settled on it; from the first
        unsettled one on, the rest follow the playout policy.
        """
        action: PlayerAction = {}
        node = self.root
        while True:
            child = self.best_child(node)
            if child is None:
                break
            player, unit_id = node.queue[0]
            if player == self.player:
                if node is not self.root and not self._settled(node, child):
                    break
                action[unit_id] = child.command
            if child.applied:
                break
            node = child
        for player, unit_id in self.root.queue:
            if player == self.player and unit_id not in action:
                action[unit_id] = _random_command(self.root.state, self.root.state.units[unit_id], self.rng)
        return action


def choose_action(
    state: GameState,
    player: int,
    cfg: AgentConfig,
    rng: np.random.Generator,
) -> PlayerAction:
    """Run UCT from `state` and return commands for `player`'s free units."""
    if state.terminal is not None:
        raise ContractViolation("choose_action called on a terminal state")
    if not needs_decision(state, player):
        return {}
    search = _Search(state.clone(record_events=False), player, cfg, rng)
    iterations = search.run()
    action = search.plan()
    logger.debug(
        "Player %s at tick %s: %s iterations, root visits %s, proven %s",
        player, state.tick, iterations, search.root.visits, search.root.proven,
    )
    return action


# ============================================================================
# Agents
# ============================================================================

class MCTSAgent:
    """UCT agent. Re-plans every `decision_period` ticks; planned commands
    are re-issued to their (free) units while they stay legal."""

    def __init__(self, config: AgentConfig, name: Optional[str] = None):
        self.config = config
        self.name = name or "mcts"
        self.player: Optional[int] = None
        # None is a valid table (every type allowed), not "not captured yet".
        self.access = None
        self._access_captured = False
        self._rng = np.random.default_rng(config.seed)
        self._plan: PlayerAction = {}
        self._next_plan_tick = 0

    def begin_game(self, player: int, seed: int) -> None:
        self.player = player
        self.access = None
        self._access_captured = False
        self._rng = np.random.default_rng(np.random.SeedSequence([self.config.seed, seed]))
        self._plan = {}
        self._next_plan_tick = 0

    def choose_action(self, state: GameState, player: int) -> PlayerAction:
        allowed = state.config.access[player]
        if not self._access_captured:
            self.access = allowed
            self._access_captured = True
        elif self.access != allowed:
            raise ContractViolation("unit access table changed during a game")

        if state.tick >= self._next_plan_tick and needs_decision(state, player):
            self._plan = choose_action(state, player, self.config, self._rng)
            self._next_plan_tick = state.tick + self.config.decision_period

        action: PlayerAction = {}
        for unit in state.free_units(player):
            command = self._plan.get(unit.id)
            if command is not None and is_legal(state, unit, command):
                action[unit.id] = command
        return action


class IdleAgent:
    """Never issues a command."""

    name = "idle"

    def begin_game(self, player: int, seed: int) -> None:
        pass

    def choose_action(self, state: GameState, player: int) -> PlayerAction:
        return {}


class RandomAgent:
    """Uniformly random legal command for every free unit."""

    name = "random"

    def __init__(self, seed: int = 0):
        self.seed = seed
        self._rng = np.random.default_rng(seed)

    def begin_game(self, player: int, seed: int) -> None:
        self._rng = np.random.default_rng(np.random.SeedSequence([self.seed, seed]))

    def choose_action(self, state: GameState, player: int) -> PlayerAction:
        return random_action(state, player, self._rng)


class RushAgent:
    """Workers gather, buildings train, every other unit walks to the nearest
    enemy and attacks it.

    `preferred` is trained ahead of the barracks' default order; with
    `only_preferred` the barracks trains nothing else.
    """

    name = "rush"

    def __init__(self, preferred: Optional[str] = None, only_preferred: bool = False, max_workers: int = 2):
        self.preferred = preferred
        self.only_preferred = only_preferred
        self.max_workers = max_workers

    def begin_game(self, player: int, seed: int) -> None:
        pass

    def choose_action(self, state: GameState, player: int) -> PlayerAction:
        action: PlayerAction = {}
        enemies = state.units_of(1 - player)
        workers = sum(1 for u in state.units_of(player) if u.type_def.can_harvest)
        for unit in state.free_units(player):
            commands = unit_commands(state, unit)
            if unit.type_def.is_structure:
                command = self._train(unit, commands, workers)
                if command is not None and command.unit_type is not None:
                    if state.config.unit_type(command.unit_type).can_harvest:
                        workers += 1
            elif unit.type_def.can_harvest:
                command = self._gather(commands) or self._fight(unit, commands, enemies)
            else:
                command = self._fight(unit, commands, enemies)
            if command is not None:
                action[unit.id] = command
        return action

    def _train(self, unit: UnitInstance, commands: List[Command], workers: int) -> Optional[Command]:
        produce = [c for c in commands if c.kind is CommandKind.PRODUCE]
        if not produce:
            return None
        order = list(unit.type_def.produces)
        if self.preferred in order:
            order.remove(self.preferred)
            order.insert(0, self.preferred)
            if self.only_preferred:
                order = [self.preferred]
        for type_name in order:
            for command in produce:
                if command.unit_type != type_name:
                    continue
                if type_name == "Worker" and workers >= self.max_workers:
                    break
                return command
        return None

    @staticmethod
    def _gather(commands: List[Command]) -> Optional[Command]:
        for kind in (CommandKind.RETURN, CommandKind.HARVEST):
            for command in commands:
                if command.kind is kind:
                    return command
        return None

    @staticmethod
    def _fight(unit: UnitInstance, commands: List[Command], enemies: List[UnitInstance]) -> Optional[Command]:
        if not enemies:
            return None
        attacks = [c for c in commands if c.kind is CommandKind.ATTACK]
        by_id = {enemy.id: enemy for enemy in enemies}
        if attacks:
            return min(attacks, key=lambda c: (chebyshev(unit.position, by_id[c.target_id].position), c.target_id))
        target = min(enemies, key=lambda e: (chebyshev(unit.position, e.position), e.id))
        # Lexicographic (chebyshev, manhattan) progress, so units can step around blockers.
        best: Optional[Command] = None
        best_distance = (chebyshev(unit.position, target.position), manhattan(unit.position, target.position))
        for command in commands:
            if command.kind is not CommandKind.MOVE:
                continue
            cell = neighbor_cell(unit.position, command.direction)
            distance = (chebyshev(cell, target.position), manhattan(cell, target.position))
            if distance < best_distance:
                best, best_distance = command, distance
        return best


class BuilderAgent(RushAgent):
    """Trains `type_name` at every opportunity (nothing else at that building), then rushes."""

    name = "builder"

    def __init__(self, type_name: str, max_workers: int = 2):
        super().__init__(preferred=type_name, only_preferred=True, max_workers=max_workers)


def build_agent(kind: str, overrides: Optional[Mapping[str, Any]] = None, seed: int = 0):
    """Agent by name: a skill level ("strong", "medium", "weak") or a scripted
    agent ("idle", "random", "rush")."""
    kind = kind.lower()
    if kind in _PRESETS:
        config = skill_preset(kind).with_overrides(overrides)
        return MCTSAgent(replace(config, seed=seed) if seed else config, name=kind)
    if kind == "idle":
        return IdleAgent()
    if kind == "random":
        return RandomAgent(seed)
    if kind == "rush":
        return RushAgent()
    raise ConfigError(f"unknown agent {kind!r}")
