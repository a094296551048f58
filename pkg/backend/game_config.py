"""
game_config.py

Unit-type table and game configuration for the engine, plus the JSON codec
for both. The defaults live in data/default_config.json; every value there
is configurable and nothing downstream hard-codes them.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from enum import IntEnum
from functools import lru_cache
from pathlib import Path
from typing import Any, Dict, FrozenSet, Mapping, Optional, Tuple

from errors import ConfigError
from settings import DEFAULT_CONFIG_PATH


class Cause(IntEnum):
    ON_DEATH = 1
    ON_DAMAGE_TAKEN = 2
    ON_DAMAGE_DEALT = 3
    ON_THIRD_ATTACK = 4


class Effect(IntEnum):
    RETURN_RESOURCES = 1
    COUNTER_OR_DOUBLE_ATTACK = 2
    HEAL = 3
    SPEED_CHANGE = 4


@dataclass(frozen=True)
class Ability:
    cause: Cause
    effect: Effect


@dataclass(frozen=True)
class UnitTypeDef:
    name: str
    cost: int
    max_hp: int
    damage: int
    attack_range: int
    move_time: int
    attack_time: int
    produce_time: int
    is_structure: bool = False
    can_harvest: bool = False
    # Workers return harvested resources to an adjacent own stockpile building.
    is_stockpile: bool = False
    produces: Tuple[str, ...] = ()
    ability: Optional[Ability] = None

    def __post_init__(self) -> None:
        for name in ("cost", "max_hp", "attack_range", "move_time", "attack_time", "produce_time"):
            if getattr(self, name) < 1:
                raise ConfigError(f"unit type {self.name!r}: {name} must be >= 1")
        if self.damage < 0:
            raise ConfigError(f"unit type {self.name!r}: damage must be >= 0")


@dataclass(frozen=True)
class Placement:
    player: int
    type_name: str
    x: int
    y: int


@dataclass(frozen=True)
class ResourceNode:
    x: int
    y: int
    amount: int


@dataclass(frozen=True)
class GameConfig:
    unit_types: Mapping[str, UnitTypeDef]
    layout: Tuple[Placement, ...]
    resource_nodes: Tuple[ResourceNode, ...]
    width: int = 8
    height: int = 8
    max_ticks: int = 3000
    start_resources: int = 5
    harvest_time: int = 20
    return_time: int = 10
    harvest_amount: int = 1
    abilities_enabled: bool = True
    # None means the player may produce every type its buildings can make.
    access: Tuple[Optional[FrozenSet[str]], Optional[FrozenSet[str]]] = (None, None)
    generated_type: Optional[str] = None
    # Unused by the engine; documents which JSON file (if any) the config came from.
    source: Optional[str] = field(default=None, compare=False)

    def __post_init__(self) -> None:
        validate_game_config(self)

    def unit_type(self, name: str) -> UnitTypeDef:
        try:
            return self.unit_types[name]
        except KeyError:
            raise ConfigError(f"unknown unit type {name!r}") from None

    def may_produce(self, player: int, type_name: str) -> bool:
        allowed = self.access[player]
        return allowed is None or type_name in allowed

    def with_unit_type(self, type_def: UnitTypeDef, producer: str = "Barracks") -> "GameConfig":
        """Return a copy with `type_def` added and buildable at `producer`."""
        producer_def = self.unit_type(producer)
        types = dict(self.unit_types)
        types[type_def.name] = type_def
        if type_def.name not in producer_def.produces:
            types[producer] = replace(producer_def, produces=producer_def.produces + (type_def.name,))
        return replace(self, unit_types=types, generated_type=type_def.name)

    def with_access(
        self,
        player0: Optional[FrozenSet[str]],
        player1: Optional[FrozenSet[str]],
    ) -> "GameConfig":
        return replace(self, access=(player0, player1))

    def without_types(self, player: int, names: FrozenSet[str]) -> Optional[FrozenSet[str]]:
        """Access set for `player` that allows everything except `names`."""
        allowed = self.access[player]
        pool = set(self.unit_types) if allowed is None else set(allowed)
        return frozenset(pool - set(names))


def validate_game_config(config: GameConfig) -> None:
    """Raise ConfigError if the layout is out of bounds or overlaps."""
    if config.width < 1 or config.height < 1:
        raise ConfigError("map dimensions must be >= 1")
    if config.max_ticks < 1:
        raise ConfigError("maxTicks must be >= 1")
    if config.start_resources < 0:
        raise ConfigError("startResources must be >= 0")
    for name in ("harvest_time", "return_time", "harvest_amount"):
        if getattr(config, name) < 1:
            raise ConfigError(f"{name} must be >= 1")
    for type_def in config.unit_types.values():
        for produced in type_def.produces:
            if produced not in config.unit_types:
                raise ConfigError(f"unit type {type_def.name!r} produces unknown type {produced!r}")

    occupied: Dict[Tuple[int, int], str] = {}

    def _claim(x: int, y: int, what: str) -> None:
        if not (0 <= x < config.width and 0 <= y < config.height):
            raise ConfigError(f"{what} at ({x}, {y}) is outside the {config.width}x{config.height} map")
        if (x, y) in occupied:
            raise ConfigError(f"{what} at ({x}, {y}) overlaps {occupied[(x, y)]}")
        occupied[(x, y)] = what

    for node in config.resource_nodes:
        if node.amount < 0:
            raise ConfigError(f"resource node at ({node.x}, {node.y}) has negative amount")
        _claim(node.x, node.y, "resource node")
    for placement in config.layout:
        if placement.player not in (0, 1):
            raise ConfigError(f"placement player must be 0 or 1, got {placement.player}")
        if placement.type_name not in config.unit_types:
            raise ConfigError(f"placement uses unknown unit type {placement.type_name!r}")
        _claim(placement.x, placement.y, f"player {placement.player} {placement.type_name}")


# ============================================================================
# JSON codec
# ============================================================================

_TYPE_FIELDS = {
    "name": "name",
    "cost": "cost",
    "maxHp": "max_hp",
    "damage": "damage",
    "attackRange": "attack_range",
    "moveTime": "move_time",
    "attackTime": "attack_time",
    "produceTime": "produce_time",
    "isStructure": "is_structure",
    "canHarvest": "can_harvest",
    "isStockpile": "is_stockpile",
}


def _require(doc: Mapping[str, Any], key: str, where: str) -> Any:
    if key not in doc:
        raise ConfigError(f"{where}: missing {key!r}")
    return doc[key]


def unit_type_from_dict(doc: Mapping[str, Any]) -> UnitTypeDef:
    where = f"unit type {doc.get('name', '?')!r}"
    kwargs: Dict[str, Any] = {}
    for json_key, attr in _TYPE_FIELDS.items():
        if json_key in ("isStructure", "canHarvest", "isStockpile"):
            kwargs[attr] = bool(doc.get(json_key, False))
        else:
            kwargs[attr] = _require(doc, json_key, where)
    kwargs["produces"] = tuple(doc.get("produces", ()))
    ability = doc.get("ability")
    if ability is not None:
        try:
            kwargs["ability"] = Ability(Cause(ability["cause"]), Effect(ability["effect"]))
        except (KeyError, ValueError) as exc:
            raise ConfigError(f"{where}: invalid ability {ability!r}") from exc
    return UnitTypeDef(**kwargs)


def unit_type_to_dict(type_def: UnitTypeDef) -> Dict[str, Any]:
    doc = {json_key: getattr(type_def, attr) for json_key, attr in _TYPE_FIELDS.items()}
    if type_def.produces:
        doc["produces"] = list(type_def.produces)
    if type_def.ability is not None:
        doc["ability"] = {"cause": int(type_def.ability.cause), "effect": int(type_def.ability.effect)}
    return doc


def game_config_from_dict(doc: Mapping[str, Any], source: Optional[str] = None) -> GameConfig:
    """Build a GameConfig from its JSON document."""
    try:
        types = [unit_type_from_dict(item) for item in _require(doc, "unitTypes", "game config")]
        layout = tuple(
            Placement(int(p["player"]), str(p["type"]), int(p["x"]), int(p["y"]))
            for p in _require(doc, "layout", "game config")
        )
        nodes = tuple(
            ResourceNode(int(n["x"]), int(n["y"]), int(n["amount"]))
            for n in doc.get("resourceNodes", [])
        )
    except (KeyError, TypeError) as exc:
        raise ConfigError(f"malformed game config: {exc}") from exc

    access_doc = doc.get("access") or [None, None]
    access = tuple(None if item is None else frozenset(item) for item in access_doc)

    return GameConfig(
        unit_types={t.name: t for t in types},
        layout=layout,
        resource_nodes=nodes,
        width=int(doc.get("width", 8)),
        height=int(doc.get("height", 8)),
        max_ticks=int(doc.get("maxTicks", 3000)),
        start_resources=int(doc.get("startResources", 5)),
        harvest_time=int(doc.get("harvestTime", 20)),
        return_time=int(doc.get("returnTime", 10)),
        harvest_amount=int(doc.get("harvestAmount", 1)),
        abilities_enabled=bool(doc.get("abilitiesEnabled", True)),
        access=access,  # type: ignore[arg-type]
        generated_type=doc.get("generatedType"),
        source=source,
    )


def game_config_to_dict(config: GameConfig) -> Dict[str, Any]:
    doc: Dict[str, Any] = {
        "width": config.width,
        "height": config.height,
        "maxTicks": config.max_ticks,
        "startResources": config.start_resources,
        "harvestTime": config.harvest_time,
        "returnTime": config.return_time,
        "harvestAmount": config.harvest_amount,
        "abilitiesEnabled": config.abilities_enabled,
        "unitTypes": [unit_type_to_dict(t) for t in config.unit_types.values()],
        "resourceNodes": [{"x": n.x, "y": n.y, "amount": n.amount} for n in config.resource_nodes],
        "layout": [
            {"player": p.player, "type": p.type_name, "x": p.x, "y": p.y} for p in config.layout
        ],
    }
    if any(item is not None for item in config.access):
        doc["access"] = [None if item is None else sorted(item) for item in config.access]
    if config.generated_type is not None:
        doc["generatedType"] = config.generated_type
    return doc


def load_game_config(path: Path) -> GameConfig:
    try:
        with open(path, "r", encoding="utf-8") as f:
            doc = json.load(f)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read game config {path}: {exc}") from exc
    return game_config_from_dict(doc, source=str(path))


@lru_cache(maxsize=1)
def default_game_config() -> GameConfig:
    """The shipped default configuration (8x8 map, microRTS-like unit table)."""
    return load_game_config(DEFAULT_CONFIG_PATH)


def apply_overrides(config: GameConfig, overrides: Mapping[str, Any]) -> GameConfig:
    """Apply a study-config style override document (camelCase keys) to a config."""
    if not overrides:
        return config
    merged = game_config_to_dict(config)
    for key, value in overrides.items():
        if key == "unitTypes":
            by_name = {t["name"]: t for t in merged["unitTypes"]}
            for patch in value:
                base = by_name.get(patch.get("name"), {})
                by_name[patch.get("name")] = {**base, **patch}
            merged["unitTypes"] = list(by_name.values())
        else:
            merged[key] = value
    return game_config_from_dict(merged, source=config.source)
