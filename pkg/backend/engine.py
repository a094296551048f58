"""
engine.py

Deterministic, tick-based mini-RTS simulation on a small grid.

Actions are durative: a command issued at tick t completes at
t + duration, and only then do its effects apply. Both players' commands
are issued in the same step and resolve together. Within a tick the
resolution order is fixed:

    moves -> harvests -> returns -> productions -> attacks
    attacks: damage -> deaths -> on-death hooks -> on-damage hooks
             (surviving victims only) -> on-deal / third-attack hooks

Ties inside a phase are broken by ascending unit id.
"""

from __future__ import annotations

import copy
import hashlib
import json
import logging
import time
from dataclasses import dataclass, field, replace
from enum import Enum
from functools import lru_cache
from typing import Any, Dict, Iterable, List, Mapping, NamedTuple, Optional, Protocol, Tuple

from errors import ConfigError, ContractViolation, IllegalCommand
from game_config import Cause, Effect, GameConfig, UnitTypeDef

logger = logging.getLogger(__name__)

Position = Tuple[int, int]

# up, right, down, left
DIRECTIONS: Tuple[Position, ...] = ((0, -1), (1, 0), (0, 1), (-1, 0))

HEAL_AMOUNT = 3
THIRD_ATTACK = 3
# Stats key owner for aggregates over both players.
ANY_PLAYER = -1


class CommandKind(str, Enum):
    IDLE = "idle"
    MOVE = "move"
    ATTACK = "attack"
    HARVEST = "harvest"
    RETURN = "return"
    PRODUCE = "produce"


@dataclass(frozen=True)
class Command:
    kind: CommandKind
    direction: Optional[int] = None
    target_id: Optional[int] = None
    position: Optional[Position] = None
    unit_type: Optional[str] = None

    def to_dict(self) -> Dict[str, Any]:
        doc: Dict[str, Any] = {"kind": self.kind.value}
        if self.direction is not None:
            doc["direction"] = self.direction
        if self.target_id is not None:
            doc["target"] = self.target_id
        if self.position is not None:
            doc["position"] = list(self.position)
        if self.unit_type is not None:
            doc["unitType"] = self.unit_type
        return doc


IDLE = Command(CommandKind.IDLE)
MOVES: Tuple[Command, ...] = tuple(Command(CommandKind.MOVE, direction=d) for d in range(len(DIRECTIONS)))


# Commands are immutable, so the few distinct ones a game uses are shared.
@lru_cache(maxsize=4096)
def _attack(target_id: int) -> Command:
    return Command(CommandKind.ATTACK, target_id=target_id)


@lru_cache(maxsize=4096)
def _at(kind: CommandKind, position: Position) -> Command:
    return Command(kind, position=position)


@lru_cache(maxsize=4096)
def _produce(direction: int, unit_type: str) -> Command:
    return Command(CommandKind.PRODUCE, direction=direction, unit_type=unit_type)


# unit id -> command
PlayerAction = Dict[int, Command]


@dataclass(frozen=True)
class ActiveAction:
    command: Command
    issued_tick: int
    completion_tick: int


@dataclass
class UnitInstance:
    id: int
    type_def: UnitTypeDef
    owner: int
    x: int
    y: int
    hp: int
    carried: int = 0
    action: Optional[ActiveAction] = None
    attack_counter: int = 0
    speed_boost: bool = False
    speed_penalty: bool = False
    born_tick: int = 0
    died_tick: Optional[int] = None

    @property
    def position(self) -> Position:
        return (self.x, self.y)

    @property
    def type_name(self) -> str:
        return self.type_def.name

    @property
    def is_free(self) -> bool:
        return self.action is None

    @property
    def attack_time(self) -> int:
        ticks = self.type_def.attack_time
        if self.speed_boost:
            ticks = max(1, ticks // 2)
        if self.speed_penalty:
            ticks *= 2
        return ticks


@dataclass
class TypeStats:
    times_produced: int = 0
    first_produced_tick: Optional[int] = None
    total_alive_ticks: int = 0
    alive_interval_union: int = 0

    def copy(self) -> "TypeStats":
        return replace(self)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "timesProduced": self.times_produced,
            "firstProducedTick": self.first_produced_tick,
            "totalAliveTicks": self.total_alive_ticks,
            "aliveIntervalUnion": self.alive_interval_union,
        }


class Event(NamedTuple):
    tick: int
    kind: str
    units: Tuple[int, ...]
    payload: Mapping[str, Any]

    def to_json(self) -> str:
        return json.dumps(
            {"tick": self.tick, "kind": self.kind, "units": list(self.units), "payload": dict(self.payload)},
            sort_keys=True,
            separators=(",", ":"),
        )


@dataclass(frozen=True)
class GameOutcome:
    # None means draw
    winner: Optional[int]
    end_tick: int
    reason: str

    @property
    def is_draw(self) -> bool:
        return self.winner is None


@dataclass
class GameState:
    config: GameConfig
    tick: int
    # Ids are issued in increasing order, so iteration order is ascending id.
    units: Dict[int, UnitInstance]
    grid: Dict[Position, int]
    resources: List[int]
    resource_nodes: Dict[Position, int]
    next_id: int
    seed: int = 0
    spent: List[int] = field(default_factory=lambda: [0, 0])
    injected: List[int] = field(default_factory=lambda: [0, 0])
    lost: List[int] = field(default_factory=lambda: [0, 0])
    initial_supply: int = 0
    # (player, type name) -> stats
    stats: Dict[Tuple[int, str], TypeStats] = field(default_factory=dict)
    events: Optional[List[Event]] = None
    terminal: Optional[GameOutcome] = None

    @property
    def max_ticks(self) -> int:
        return self.config.max_ticks

    def clone(self, record_events: Optional[bool] = None) -> "GameState":
        """Independent copy. Planning copies usually pass record_events=False."""
        keep_events = self.events is not None if record_events is None else record_events
        return GameState(
            config=self.config,
            tick=self.tick,
            units={uid: copy.copy(u) for uid, u in self.units.items()},
            grid=dict(self.grid),
            resources=list(self.resources),
            resource_nodes=dict(self.resource_nodes),
            next_id=self.next_id,
            seed=self.seed,
            spent=list(self.spent),
            injected=list(self.injected),
            lost=list(self.lost),
            initial_supply=self.initial_supply,
            stats={key: s.copy() for key, s in self.stats.items()},
            events=(list(self.events) if self.events is not None else []) if keep_events else None,
            terminal=self.terminal,
        )

    def units_of(self, player: int) -> List[UnitInstance]:
        return [u for u in self.units.values() if u.owner == player]

    def free_units(self, player: int) -> List[UnitInstance]:
        return [u for u in self.units_of(player) if u.action is None]

    def is_empty(self, pos: Position) -> bool:
        return self.in_bounds(pos) and pos not in self.grid and pos not in self.resource_nodes

    def in_bounds(self, pos: Position) -> bool:
        return 0 <= pos[0] < self.config.width and 0 <= pos[1] < self.config.height

    def carried_total(self) -> int:
        return sum(u.carried for u in self.units.values())

    def type_stats(self, player: int, type_name: str) -> TypeStats:
        key = (player, type_name)
        if key not in self.stats:
            self.stats[key] = TypeStats()
        return self.stats[key]

    def log(self, kind: str, units: Iterable[int] = (), **payload: Any) -> None:
        if self.events is not None:
            self.events.append(Event(self.tick, kind, tuple(units), payload))


def chebyshev(a: Position, b: Position) -> int:
    return max(abs(a[0] - b[0]), abs(a[1] - b[1]))


def manhattan(a: Position, b: Position) -> int:
    return abs(a[0] - b[0]) + abs(a[1] - b[1])


def neighbor_cell(pos: Position, direction: int) -> Position:
    dx, dy = DIRECTIONS[direction]
    return (pos[0] + dx, pos[1] + dy)


# ============================================================================
# Setup
# ============================================================================

def new_game(config: GameConfig, seed: int = 0, record_events: bool = True) -> GameState:
    """Tick-0 state. The layout is seed-independent; the seed is kept for reference only."""
    state = GameState(
        config=config,
        tick=0,
        units={},
        grid={},
        resources=[config.start_resources, config.start_resources],
        resource_nodes={(n.x, n.y): n.amount for n in config.resource_nodes if n.amount > 0},
        next_id=1,
        seed=seed,
        events=[] if record_events else None,
    )
    state.initial_supply = sum(n.amount for n in config.resource_nodes) + 2 * config.start_resources
    for placement in config.layout:
        pos = (placement.x, placement.y)
        if pos in state.grid or pos in state.resource_nodes:
            raise ConfigError(f"placement at {pos} overlaps another placement")
        _spawn(state, config.unit_type(placement.type_name), placement.player, pos, count_production=False)
    return state


def _spawn(
    state: GameState,
    type_def: UnitTypeDef,
    owner: int,
    pos: Position,
    count_production: bool = True,
) -> UnitInstance:
    unit = UnitInstance(
        id=state.next_id,
        type_def=type_def,
        owner=owner,
        x=pos[0],
        y=pos[1],
        hp=type_def.max_hp,
        born_tick=state.tick,
    )
    state.next_id += 1
    state.units[unit.id] = unit
    state.grid[pos] = unit.id
    if count_production:
        for key_owner in (owner, ANY_PLAYER):
            stats = state.type_stats(key_owner, type_def.name)
            stats.times_produced += 1
            if stats.first_produced_tick is None:
                stats.first_produced_tick = state.tick
    state.log("spawn", [unit.id], type=type_def.name, owner=owner, x=pos[0], y=pos[1])
    return unit


# ============================================================================
# Legal commands
# ============================================================================

def _valid_direction(direction: Any) -> bool:
    return isinstance(direction, int) and 0 <= direction < len(DIRECTIONS)


def _targets_in_range(state: GameState, unit: UnitInstance) -> List[int]:
    """Enemy unit ids within attack range, ascending."""
    pos, reach = unit.position, unit.type_def.attack_range
    if (2 * reach + 1) ** 2 >= len(state.units):
        return [
            other_id for other_id, other in state.units.items()
            if other.owner != unit.owner and chebyshev(pos, other.position) <= reach
        ]
    found = []
    x0, y0 = pos
    for x in range(max(0, x0 - reach), min(state.config.width, x0 + reach + 1)):
        for y in range(max(0, y0 - reach), min(state.config.height, y0 + reach + 1)):
            other_id = state.grid.get((x, y))
            if other_id is not None and state.units[other_id].owner != unit.owner:
                found.append(other_id)
    found.sort()
    return found


def _adjacent_nodes(state: GameState, pos: Position) -> List[Position]:
    cells = (neighbor_cell(pos, direction) for direction in range(len(DIRECTIONS)))
    return sorted(cell for cell in cells if state.resource_nodes.get(cell, 0) > 0)


def _adjacent_stockpiles(state: GameState, unit: UnitInstance) -> List[UnitInstance]:
    found = []
    for direction in range(len(DIRECTIONS)):
        other_id = state.grid.get(neighbor_cell(unit.position, direction))
        if other_id is None:
            continue
        other = state.units[other_id]
        if other.owner == unit.owner and other.type_def.is_stockpile:
            found.append(other)
    found.sort(key=lambda other: other.id)
    return found


def _can_afford(state: GameState, owner: int, produced: str) -> bool:
    return (
        state.config.may_produce(owner, produced)
        and state.resources[owner] >= state.config.unit_type(produced).cost
    )


def unit_commands(state: GameState, unit: UnitInstance) -> List[Command]:
    """Legal commands for one free unit, in canonical order (idle first)."""
    commands = [IDLE]
    type_def = unit.type_def
    pos = unit.position

    if not type_def.is_structure:
        for direction in range(len(DIRECTIONS)):
            if state.is_empty(neighbor_cell(pos, direction)):
                commands.append(MOVES[direction])

    if type_def.damage > 0:
        for other_id in _targets_in_range(state, unit):
            commands.append(_attack(other_id))

    if type_def.can_harvest:
        if unit.carried == 0:
            for node_pos in _adjacent_nodes(state, pos):
                commands.append(_at(CommandKind.HARVEST, node_pos))
        else:
            for base in _adjacent_stockpiles(state, unit):
                commands.append(_at(CommandKind.RETURN, base.position))

    for produced in type_def.produces:
        if not _can_afford(state, unit.owner, produced):
            continue
        for direction in range(len(DIRECTIONS)):
            if state.is_empty(neighbor_cell(pos, direction)):
                commands.append(_produce(direction, produced))

    return commands


def is_legal(state: GameState, unit: UnitInstance, command: Command) -> bool:
    """Same answer as `command in unit_commands(state, unit)`, without building the list."""
    type_def = unit.type_def
    pos = unit.position
    kind = command.kind

    if kind is CommandKind.IDLE:
        return command == IDLE
    if kind is CommandKind.MOVE:
        return (
            not type_def.is_structure
            and _valid_direction(command.direction)
            and command == Command(kind, direction=command.direction)
            and state.is_empty(neighbor_cell(pos, command.direction))
        )
    if kind is CommandKind.ATTACK:
        target = state.units.get(command.target_id)
        return (
            type_def.damage > 0
            and target is not None
            and target.owner != unit.owner
            and command == Command(kind, target_id=command.target_id)
            and chebyshev(pos, target.position) <= type_def.attack_range
        )
    if kind in (CommandKind.HARVEST, CommandKind.RETURN):
        cell = command.position
        if not type_def.can_harvest or not isinstance(cell, tuple) or command != Command(kind, position=cell):
            return False
        if manhattan(pos, cell) != 1:
            return False
        if kind is CommandKind.HARVEST:
            return unit.carried == 0 and state.resource_nodes.get(cell, 0) > 0
        base_id = state.grid.get(cell)
        if unit.carried == 0 or base_id is None:
            return False
        base = state.units[base_id]
        return base.owner == unit.owner and base.type_def.is_stockpile
    if kind is CommandKind.PRODUCE:
        return (
            command.unit_type in type_def.produces
            and _valid_direction(command.direction)
            and command == Command(kind, direction=command.direction, unit_type=command.unit_type)
            and _can_afford(state, unit.owner, command.unit_type)
            and state.is_empty(neighbor_cell(pos, command.direction))
        )
    return False


def has_choice(state: GameState, unit: UnitInstance) -> bool:
    """True if `unit` has a legal command other than idling."""
    type_def = unit.type_def
    pos = unit.position
    free_cell = any(state.is_empty(neighbor_cell(pos, d)) for d in range(len(DIRECTIONS)))
    if free_cell and not type_def.is_structure:
        return True
    if type_def.damage > 0 and _targets_in_range(state, unit):
        return True
    if type_def.can_harvest:
        if unit.carried == 0 and _adjacent_nodes(state, pos):
            return True
        if unit.carried > 0 and _adjacent_stockpiles(state, unit):
            return True
    return free_cell and any(_can_afford(state, unit.owner, produced) for produced in type_def.produces)


def legal_actions(state: GameState, player: int) -> Dict[int, List[Command]]:
    """Per free unit of `player`, its legal commands (ascending unit id)."""
    if state.terminal is not None:
        raise ContractViolation("legal_actions called on a terminal state")
    return {u.id: unit_commands(state, u) for u in state.free_units(player)}


def needs_decision(state: GameState, player: int) -> bool:
    """True if some free unit of `player` has a choice other than idling."""
    return any(has_choice(state, u) for u in state.free_units(player))


# ============================================================================
# Stepping
# ============================================================================

def _duration(state: GameState, unit: UnitInstance, command: Command) -> int:
    config = state.config
    if command.kind is CommandKind.MOVE:
        return unit.type_def.move_time
    if command.kind is CommandKind.ATTACK:
        return unit.attack_time
    if command.kind is CommandKind.HARVEST:
        return config.harvest_time
    if command.kind is CommandKind.RETURN:
        return config.return_time
    if command.kind is CommandKind.PRODUCE:
        return config.unit_type(command.unit_type).produce_time
    return 1


def _issue(state: GameState, player: int, action: Mapping[int, Command]) -> List[IllegalCommand]:
    rejected: List[IllegalCommand] = []
    for unit_id in sorted(action):
        command = action[unit_id]
        unit = state.units.get(unit_id)
        error: Optional[str] = None
        if unit is None:
            error = "no such living unit"
        elif unit.owner != player:
            error = f"not owned by player {player}"
        elif unit.action is not None:
            error = "unit is busy"
        elif not is_legal(state, unit, command):
            error = f"illegal command {command.to_dict()}"
        if error is not None:
            rejected.append(IllegalCommand(unit_id, error))
            state.log("rejected", [unit_id], player=player, reason=error)
            logger.debug("Rejected command for unit %s: %s", unit_id, error)
            continue

        assert unit is not None
        if command.kind is CommandKind.PRODUCE:
            cost = state.config.unit_type(command.unit_type).cost
            state.resources[player] -= cost
            state.spent[player] += cost
        unit.action = ActiveAction(command, state.tick, state.tick + _duration(state, unit, command))
    return rejected


def _count_alive(state: GameState) -> None:
    counts: Dict[Tuple[int, str], int] = {}
    for unit in state.units.values():
        for key in ((unit.owner, unit.type_name), (ANY_PLAYER, unit.type_name)):
            counts[key] = counts.get(key, 0) + 1
    for (owner, type_name), count in counts.items():
        stats = state.type_stats(owner, type_name)
        stats.alive_interval_union += 1
        stats.total_alive_ticks += count


def advance(
    state: GameState,
    action0: Optional[Mapping[int, Command]] = None,
    action1: Optional[Mapping[int, Command]] = None,
) -> List[IllegalCommand]:
    """Advance `state` in place by one tick; return the rejected commands."""
    if state.terminal is not None:
        raise ContractViolation("step called on a terminal state")

    rejected = _issue(state, 0, action0 or {})
    rejected += _issue(state, 1, action1 or {})

    # Units alive during [tick, tick + 1) count towards the alive intervals.
    _count_alive(state)
    state.tick += 1

    completing = [
        u for u in state.units.values()
        if u.action is not None and u.action.completion_tick <= state.tick
    ]
    if completing:
        by_kind: Dict[CommandKind, List[UnitInstance]] = {kind: [] for kind in CommandKind}
        # Idle completes with no effect.
        for unit in completing:
            by_kind[unit.action.command.kind].append(unit)

        for unit in by_kind[CommandKind.MOVE]:
            _complete_move(state, unit)
        for unit in by_kind[CommandKind.HARVEST]:
            _complete_harvest(state, unit)
        for unit in by_kind[CommandKind.RETURN]:
            _complete_return(state, unit)
        for unit in by_kind[CommandKind.PRODUCE]:
            _complete_produce(state, unit)
        _resolve_attacks(state, by_kind[CommandKind.ATTACK])

        for unit in completing:
            unit.action = None

    _check_terminal(state)
    return rejected


def step(
    state: GameState,
    action0: Optional[Mapping[int, Command]] = None,
    action1: Optional[Mapping[int, Command]] = None,
) -> GameState:
    """Pure variant of `advance`: returns the next state and leaves `state` untouched."""
    nxt = state.clone()
    advance(nxt, action0, action1)
    return nxt


def _complete_move(state: GameState, unit: UnitInstance) -> None:
    target = neighbor_cell(unit.position, unit.action.command.direction)
    if not state.is_empty(target):
        state.log("move_blocked", [unit.id], x=target[0], y=target[1])
        return
    del state.grid[unit.position]
    unit.x, unit.y = target
    state.grid[target] = unit.id
    state.log("move", [unit.id], x=target[0], y=target[1])


def _complete_harvest(state: GameState, unit: UnitInstance) -> None:
    node_pos = unit.action.command.position
    amount = state.resource_nodes.get(node_pos, 0)
    if amount <= 0 or manhattan(unit.position, node_pos) != 1 or unit.carried:
        state.log("harvest_failed", [unit.id])
        return
    taken = min(amount, state.config.harvest_amount)
    unit.carried += taken
    if amount - taken > 0:
        state.resource_nodes[node_pos] = amount - taken
    else:
        del state.resource_nodes[node_pos]
    state.log("harvest", [unit.id], amount=taken, x=node_pos[0], y=node_pos[1])


def _complete_return(state: GameState, unit: UnitInstance) -> None:
    base_id = state.grid.get(unit.action.command.position)
    base = state.units.get(base_id) if base_id is not None else None
    if base is None or base.owner != unit.owner or not base.type_def.is_stockpile or not unit.carried:
        state.log("return_failed", [unit.id])
        return
    state.resources[unit.owner] += unit.carried
    state.log("return", [unit.id, base.id], amount=unit.carried)
    unit.carried = 0


def _complete_produce(state: GameState, unit: UnitInstance) -> None:
    command = unit.action.command
    produced = state.config.unit_type(command.unit_type)
    target = neighbor_cell(unit.position, command.direction)
    if not state.is_empty(target):
        # Blocked: refund so the stockpile ledger stays balanced.
        state.resources[unit.owner] += produced.cost
        state.spent[unit.owner] -= produced.cost
        state.log("produce_blocked", [unit.id], type=produced.name, refund=produced.cost)
        return
    child = _spawn(state, produced, unit.owner, target)
    state.log("produce", [unit.id, child.id], type=produced.name)


# ============================================================================
# Combat and ability hooks
# ============================================================================

class _Hit(NamedTuple):
    attacker: UnitInstance
    victim: UnitInstance
    damage: int


def _resolve_attacks(state: GameState, attackers: List[UnitInstance]) -> None:
    hits: List[_Hit] = []
    for unit in attackers:
        victim = state.units.get(unit.action.command.target_id)
        if victim is None or chebyshev(unit.position, victim.position) > unit.type_def.attack_range:
            state.log("attack_missed", [unit.id])
            continue
        hits.append(_Hit(unit, victim, unit.type_def.damage))

    # Damage lands simultaneously.
    for hit in hits:
        hit.victim.hp = max(0, hit.victim.hp - hit.damage)
        hit.attacker.attack_counter += 1
        state.log("damage", [hit.attacker.id, hit.victim.id], amount=hit.damage, hp=hit.victim.hp)

    killers: Dict[int, UnitInstance] = {}
    for hit in hits:
        if hit.victim.hp == 0 and hit.victim.id not in killers:
            killers[hit.victim.id] = hit.attacker
    for victim_id in sorted(killers):
        victim = state.units.get(victim_id)
        if victim is not None:
            _kill(state, victim, killers[victim_id])

    if not state.config.abilities_enabled:
        return

    for hit in hits:
        ability = hit.victim.type_def.ability
        if ability is not None and ability.cause is Cause.ON_DAMAGE_TAKEN and hit.victim.died_tick is None:
            _fire(state, hit.victim, ability.cause, ability.effect, hit.attacker)

    for hit in hits:
        attacker = hit.attacker
        ability = attacker.type_def.ability
        if ability is None or attacker.died_tick is not None:
            continue
        if ability.cause is Cause.ON_DAMAGE_DEALT:
            _fire(state, attacker, ability.cause, ability.effect, hit.victim)
        elif ability.cause is Cause.ON_THIRD_ATTACK and attacker.attack_counter >= THIRD_ATTACK:
            attacker.attack_counter = 0
            _fire(state, attacker, ability.cause, ability.effect, hit.victim)


def _kill(state: GameState, victim: UnitInstance, killer: Optional[UnitInstance]) -> None:
    victim.hp = 0
    victim.died_tick = state.tick
    del state.units[victim.id]
    del state.grid[victim.position]
    if victim.carried:
        state.lost[victim.owner] += victim.carried
        state.log("cargo_lost", [victim.id], amount=victim.carried)
    state.log("death", [victim.id] + ([killer.id] if killer is not None else []), type=victim.type_name)

    ability = victim.type_def.ability
    if state.config.abilities_enabled and ability is not None and ability.cause is Cause.ON_DEATH:
        _fire(state, victim, ability.cause, ability.effect, killer)


def _fire(
    state: GameState,
    unit: UnitInstance,
    cause: Cause,
    effect: Effect,
    other: Optional[UnitInstance],
) -> None:
    """Apply `unit`'s ability effect. `other` is the attacker/killer (causes 1-2) or target (3-4)."""
    state.log("ability", [unit.id] + ([other.id] if other is not None else []), cause=int(cause), effect=int(effect))
    if effect is Effect.RETURN_RESOURCES:
        if cause in (Cause.ON_DEATH, Cause.ON_DAMAGE_TAKEN):
            amount = unit.type_def.cost
        elif other is not None:
            amount = other.type_def.cost
        else:
            return
        state.resources[unit.owner] += amount
        state.injected[unit.owner] += amount
        state.log("grant", [unit.id], owner=unit.owner, amount=amount)
    elif effect is Effect.COUNTER_OR_DOUBLE_ATTACK:
        if other is not None:
            _hook_damage(state, unit, other)
    elif effect is Effect.HEAL:
        if unit.died_tick is None:
            before = unit.hp
            unit.hp = min(unit.type_def.max_hp, unit.hp + HEAL_AMOUNT)
            state.log("heal", [unit.id], amount=unit.hp - before, hp=unit.hp)
    elif effect is Effect.SPEED_CHANGE:
        if cause is Cause.ON_DEATH:
            if other is not None and other.died_tick is None and not other.speed_penalty:
                other.speed_penalty = True
                state.log("slowed", [other.id], attackTime=other.attack_time)
        elif unit.died_tick is None and not unit.speed_boost:
            unit.speed_boost = True
            state.log("hastened", [unit.id], attackTime=unit.attack_time)


def _hook_damage(state: GameState, source: UnitInstance, target: UnitInstance) -> None:
    """Ability damage: resolves deaths (and on-death hooks) but no damage hooks."""
    if target.died_tick is not None or target.id not in state.units:
        return
    target.hp = max(0, target.hp - source.type_def.damage)
    state.log("ability_damage", [source.id, target.id], amount=source.type_def.damage, hp=target.hp)
    if target.hp == 0:
        _kill(state, target, source)


def _check_terminal(state: GameState) -> None:
    alive = [False, False]
    for unit in state.units.values():
        alive[unit.owner] = True
    outcome: Optional[GameOutcome] = None
    if not alive[0] and not alive[1]:
        outcome = GameOutcome(None, state.tick, "mutual_elimination")
    elif not alive[0]:
        outcome = GameOutcome(1, state.tick, "elimination")
    elif not alive[1]:
        outcome = GameOutcome(0, state.tick, "elimination")
    elif state.tick >= state.config.max_ticks:
        outcome = GameOutcome(None, state.tick, "timeout")
    if outcome is not None:
        state.terminal = outcome
        state.log("terminal", [], winner=outcome.winner, reason=outcome.reason)


def resource_balance(state: GameState) -> int:
    """Conservation residual; 0 when every resource is accounted for.

    supply  = initial node resources + start stockpiles + ability grants
    holding = remaining node resources + carried + stockpiles + spent + lost cargo
    """
    supply = state.initial_supply + sum(state.injected)
    holding = (
        sum(state.resource_nodes.values())
        + state.carried_total()
        + sum(state.resources)
        + sum(state.spent)
        + sum(state.lost)
    )
    return supply - holding


# ============================================================================
# Whole games
# ============================================================================

class Agent(Protocol):
    """What run_game needs from a player."""

    def begin_game(self, player: int, seed: int) -> None: ...

    def choose_action(self, state: GameState, player: int) -> PlayerAction: ...


@dataclass
class GameResult:
    outcome: GameOutcome
    end_tick: int
    events: List[Event]
    # (player, type name) -> stats
    player_stats: Dict[Tuple[int, str], TypeStats]
    generated_type: Optional[str] = None
    timeouts: int = 0

    @property
    def per_type_stats(self) -> Dict[str, TypeStats]:
        """Stats per type over both players (alive union: ticks with >= 1 instance of either side)."""
        return {
            type_name: stats
            for (owner, type_name), stats in sorted(self.player_stats.items())
            if owner == ANY_PLAYER
        }

    def stats_for(self, player: int, type_name: str) -> TypeStats:
        """Stats for one player's instances of `type_name`; ANY_PLAYER for the aggregate."""
        return self.player_stats.get((player, type_name), TypeStats())

    def made_by(self, player: int, type_name: Optional[str] = None) -> bool:
        name = type_name or self.generated_type
        return name is not None and self.stats_for(player, name).times_produced > 0

    def event_lines(self) -> List[str]:
        return [event.to_json() for event in self.events]

    def event_digest(self) -> str:
        digest = hashlib.sha256()
        for line in self.event_lines():
            digest.update(line.encode("utf-8"))
            digest.update(b"\n")
        return digest.hexdigest()


def run_game(
    config: GameConfig,
    agent0: Agent,
    agent1: Agent,
    seed: int = 0,
    decision_budget: Optional[float] = None,
    record_events: bool = True,
) -> GameResult:
    """Play one game to completion and collect its statistics.

    If an agent takes longer than `decision_budget` seconds for a decision,
    that decision is replaced by all-idle (logged).
    """
    state = new_game(config, seed, record_events=record_events)
    agents = (agent0, agent1)
    for player, agent in enumerate(agents):
        agent.begin_game(player, seed * 2 + player)

    timeouts = 0
    while state.terminal is None:
        actions: List[PlayerAction] = []
        for player, agent in enumerate(agents):
            started = time.perf_counter()
            action = agent.choose_action(state, player)
            elapsed = time.perf_counter() - started
            if decision_budget is not None and elapsed > decision_budget:
                logger.warning(
                    "Player %s decision at tick %s took %.3fs (budget %.3fs); idling instead",
                    player, state.tick, elapsed, decision_budget,
                )
                state.log("decision_timeout", [], player=player, seconds=round(elapsed, 3))
                timeouts += 1
                action = {}
            actions.append(action)
        advance(state, actions[0], actions[1])

    return GameResult(
        outcome=state.terminal,
        end_tick=state.tick,
        events=state.events or [],
        player_stats={key: s.copy() for key, s in state.stats.items()},
        generated_type=config.generated_type,
        timeouts=timeouts,
    )


def write_event_log(result: GameResult, path) -> None:
    """Write the event log as line-delimited JSON."""
    with open(path, "w", encoding="utf-8") as f:
        for line in result.event_lines():
            f.write(line + "\n")
