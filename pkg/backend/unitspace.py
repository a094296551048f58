"""
unitspace.py

The generated-unit genome: six searched stats plus one (cause, effect)
ability. Provides random initialization, single-gene neighbours, the JSON
codec for unit files and the bridge to an engine UnitTypeDef.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Any, Dict, List, Mapping, Optional, Tuple

import numpy as np

from errors import UnitValidationError
from game_config import Ability, Cause, Effect, UnitTypeDef

# Genome stat order; also the canonical order of neighbours and unit files.
STATS: Tuple[str, ...] = ("cost", "hp", "damage", "attack_range", "move_time", "attack_time")

# unit-file key for each stat
STAT_KEYS: Dict[str, str] = {
    "cost": "cost",
    "hp": "hp",
    "damage": "damage",
    "attack_range": "range",
    "move_time": "moveTime",
    "attack_time": "attackTime",
}

CAUSE_TEXT = {
    Cause.ON_DEATH: "When it dies",
    Cause.ON_DAMAGE_TAKEN: "When it takes damage",
    Cause.ON_DAMAGE_DEALT: "When it deals damage",
    Cause.ON_THIRD_ATTACK: "Every third attack",
}


@dataclass(frozen=True)
class GeneratedUnit:
    cost: int
    hp: int
    damage: int
    attack_range: int
    move_time: int
    attack_time: int
    cause: Cause
    effect: Effect
    name: Optional[str] = None
    fitness: Optional[float] = None

    def __post_init__(self) -> None:
        for stat in STATS:
            value = getattr(self, stat)
            if isinstance(value, bool) or not isinstance(value, (int, np.integer)):
                raise UnitValidationError(STAT_KEYS[stat], f"must be an integer, got {value!r}")
            if value < 1:
                raise UnitValidationError(STAT_KEYS[stat], f"must be >= 1, got {value}")
            object.__setattr__(self, stat, int(value))
        object.__setattr__(self, "cause", _coerce_enum(Cause, self.cause, "cause"))
        object.__setattr__(self, "effect", _coerce_enum(Effect, self.effect, "effect"))

    @property
    def stats(self) -> Tuple[int, ...]:
        return tuple(getattr(self, stat) for stat in STATS)

    @property
    def genome(self) -> Tuple[int, ...]:
        """The searched genes only (six stats, cause, effect)."""
        return self.stats + (int(self.cause), int(self.effect))

    def with_fitness(self, fitness: Optional[float]) -> "GeneratedUnit":
        return replace(self, fitness=fitness)

    def with_name(self, name: Optional[str]) -> "GeneratedUnit":
        return replace(self, name=name)


def _coerce_enum(enum_cls, value: Any, field_name: str):
    if isinstance(value, bool):
        raise UnitValidationError(field_name, f"must be one of 1-4, got {value!r}")
    try:
        return enum_cls(int(value))
    except (TypeError, ValueError):
        raise UnitValidationError(field_name, f"must be one of 1-4, got {value!r}") from None


@dataclass(frozen=True)
class SearchBounds:
    """Inclusive initialization ranges. They bound random_unit only, not search drift."""

    cost: Tuple[int, int] = (1, 3)
    hp: Tuple[int, int] = (1, 4)
    damage: Tuple[int, int] = (1, 4)
    attack_range: Tuple[int, int] = (1, 3)
    move_time: Tuple[int, int] = (5, 14)
    attack_time: Tuple[int, int] = (3, 7)

    def __post_init__(self) -> None:
        for stat in STATS:
            low, high = getattr(self, stat)
            if low < 1:
                raise UnitValidationError(STAT_KEYS[stat], f"lower bound must be >= 1, got {low}")
            if low > high:
                raise UnitValidationError(STAT_KEYS[stat], f"lower bound {low} exceeds upper bound {high}")

    @classmethod
    def from_dict(cls, doc: Mapping[str, Any]) -> "SearchBounds":
        kwargs = {}
        for stat in STATS:
            key = STAT_KEYS[stat]
            if key in doc:
                low, high = doc[key]
                kwargs[stat] = (int(low), int(high))
        return cls(**kwargs)

    def to_dict(self) -> Dict[str, List[int]]:
        return {STAT_KEYS[stat]: list(getattr(self, stat)) for stat in STATS}


@dataclass(frozen=True)
class ProduceTimeRule:
    """produceTime of a generated unit = base + per_cost * cost ticks."""

    base: int = 60
    per_cost: int = 20
    producer: str = "Barracks"

    def produce_time(self, cost: int) -> int:
        return max(1, self.base + self.per_cost * cost)


def random_unit(bounds: SearchBounds, seed: int) -> GeneratedUnit:
    """Uniform draw of every stat from its inclusive range and of cause/effect from 1-4."""
    rng = np.random.default_rng(seed)
    values = {}
    for stat in STATS:
        low, high = getattr(bounds, stat)
        values[stat] = int(rng.integers(low, high + 1))
    cause = Cause(int(rng.integers(1, 5)))
    effect = Effect(int(rng.integers(1, 5)))
    return GeneratedUnit(cause=cause, effect=effect, **values)


def neighbors(unit: GeneratedUnit) -> List[GeneratedUnit]:
    """All single-gene edits: each stat -1 (never below 1) and +1, then every other
    cause, then every other effect. Names and fitness are not carried over."""
    base = replace(unit, name=None, fitness=None)
    result: List[GeneratedUnit] = []
    for stat in STATS:
        value = getattr(unit, stat)
        if value > 1:
            result.append(replace(base, **{stat: value - 1}))
        result.append(replace(base, **{stat: value + 1}))
    for cause in Cause:
        if cause != unit.cause:
            result.append(replace(base, cause=cause))
    for effect in Effect:
        if effect != unit.effect:
            result.append(replace(base, effect=effect))
    return result


def to_type_def(unit: GeneratedUnit, rule: Optional[ProduceTimeRule] = None) -> UnitTypeDef:
    """Engine unit type for a genome; trained at rule.producer."""
    rule = rule or ProduceTimeRule()
    return UnitTypeDef(
        name=unit.name or "Generated",
        cost=unit.cost,
        max_hp=unit.hp,
        damage=unit.damage,
        attack_range=unit.attack_range,
        move_time=unit.move_time,
        attack_time=unit.attack_time,
        produce_time=rule.produce_time(unit.cost),
        ability=Ability(unit.cause, unit.effect),
    )


# ============================================================================
# Unit files
# ============================================================================

def unit_to_dict(unit: GeneratedUnit) -> Dict[str, Any]:
    """Canonical document: stats in genome order, then cause, effect, name, fitness."""
    doc: Dict[str, Any] = {STAT_KEYS[stat]: getattr(unit, stat) for stat in STATS}
    doc["cause"] = int(unit.cause)
    doc["effect"] = int(unit.effect)
    if unit.name is not None:
        doc["name"] = unit.name
    if unit.fitness is not None:
        doc["fitness"] = unit.fitness
    return doc


def unit_from_dict(doc: Mapping[str, Any]) -> GeneratedUnit:
    if not isinstance(doc, Mapping):
        raise UnitValidationError("document", "must be a JSON object")
    values: Dict[str, Any] = {}
    for stat in STATS:
        key = STAT_KEYS[stat]
        if key not in doc:
            raise UnitValidationError(key, "is required")
        values[stat] = doc[key]
    for key in ("cause", "effect"):
        if key not in doc:
            raise UnitValidationError(key, "is required")
        values[key] = doc[key]

    name = doc.get("name")
    if name is not None and not isinstance(name, str):
        raise UnitValidationError("name", f"must be a string, got {name!r}")
    fitness = doc.get("fitness")
    if fitness is not None:
        if isinstance(fitness, bool) or not isinstance(fitness, (int, float)):
            raise UnitValidationError("fitness", f"must be a number, got {fitness!r}")
        fitness = float(fitness)
    return GeneratedUnit(name=name, fitness=fitness, **values)


def dumps_unit(unit: GeneratedUnit) -> str:
    return json.dumps(unit_to_dict(unit), indent=2, ensure_ascii=False) + "\n"


def loads_unit(text: str) -> GeneratedUnit:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise UnitValidationError("document", f"invalid JSON: {exc}") from exc
    return unit_from_dict(doc)


def load_unit(path: Path) -> GeneratedUnit:
    with open(path, "r", encoding="utf-8") as f:
        return loads_unit(f.read())


def save_unit(unit: GeneratedUnit, path: Path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as f:
        f.write(dumps_unit(unit))


# Written next to unit files by `evaluate` and `generate`; not units themselves.
DERIVED_SUFFIXES = (".report.json", ".trace.json")


def is_unit_file(path: Path) -> bool:
    return path.suffix == ".json" and not path.name.endswith(DERIVED_SUFFIXES)


def load_fixture_units(directory: Path) -> List[GeneratedUnit]:
    """Every unit file (*.json, minus reports and traces) in `directory`, sorted by file name."""
    paths = sorted(path for path in Path(directory).glob("*.json") if is_unit_file(path))
    return [load_unit(path) for path in paths]


def describe_unit(unit: GeneratedUnit) -> str:
    """One-line designer-facing summary of a unit."""
    cause, effect = unit.cause, unit.effect
    on_self = cause in (Cause.ON_DEATH, Cause.ON_DAMAGE_TAKEN)
    if effect is Effect.RETURN_RESOURCES:
        what = "refund its own cost" if on_self else "gain the target's cost in resources"
    elif effect is Effect.COUNTER_OR_DOUBLE_ATTACK:
        what = "strike back at its attacker" if on_self else "attack the same target again"
    elif effect is Effect.HEAL:
        what = "heal 3 hp"
    elif cause is Cause.ON_DEATH:
        what = "slow its killer's attacks to half speed"
    else:
        what = "attack twice as fast from then on"
    label = unit.name or "Unnamed unit"
    return (
        f"{label}: cost {unit.cost}, hp {unit.hp}, damage {unit.damage}, range {unit.attack_range}, "
        f"move {unit.move_time}, attack {unit.attack_time}. {CAUSE_TEXT[cause]}: {what}."
    )
