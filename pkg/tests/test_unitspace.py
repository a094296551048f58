import itertools
from collections import Counter

import numpy as np
import pytest
from scipy.stats import chisquare

from errors import UnitValidationError
from game_config import Cause, Effect
from settings import FIXTURES_DIR
from unitspace import (
    STATS,
    GeneratedUnit,
    ProduceTimeRule,
    SearchBounds,
    describe_unit,
    dumps_unit,
    load_fixture_units,
    load_unit,
    loads_unit,
    neighbors,
    random_unit,
    save_unit,
    to_type_def,
    unit_to_dict,
)


def make_unit(stats=(2, 2, 2, 2, 6, 4), cause=1, effect=1, **extra):
    return GeneratedUnit(*stats, cause=cause, effect=effect, **extra)


def brute_force_neighbors(unit):
    genes = list(unit.genome)
    found = set()
    for index in range(6):
        for delta in (-1, 1):
            edited = list(genes)
            edited[index] += delta
            if edited[index] >= 1:
                found.add(tuple(edited))
    for index in (6, 7):
        for value in range(1, 5):
            if value != genes[index]:
                edited = list(genes)
                edited[index] = value
                found.add(tuple(edited))
    return found


# ============================================================================
# Neighbours
# ============================================================================

def test_all_stats_above_floor_gives_eighteen():
    assert len(neighbors(make_unit())) == 18


def test_cost_at_floor_gives_seventeen():
    result = neighbors(make_unit(stats=(1, 2, 2, 2, 6, 4)))
    assert len(result) == 17
    assert all(n.cost >= 1 for n in result)


def test_all_stats_at_floor_gives_twelve():
    result = neighbors(make_unit(stats=(1, 1, 1, 1, 1, 1), cause=2, effect=3))
    assert len(result) == 12
    assert sum(1 for n in result if n.stats != (1, 1, 1, 1, 1, 1)) == 6


def test_neighbor_order_is_canonical():
    unit = make_unit(cause=2, effect=3)
    result = neighbors(unit)
    assert result[0].stats == (1, 2, 2, 2, 6, 4)
    assert result[1].stats == (3, 2, 2, 2, 6, 4)
    assert [int(n.cause) for n in result[12:15]] == [1, 3, 4]
    assert [int(n.effect) for n in result[15:]] == [1, 2, 4]


def test_neighbors_drop_name_and_fitness():
    result = neighbors(make_unit(name="Named", fitness=1.0))
    assert all(n.name is None and n.fitness is None for n in result)


def test_neighbors_match_brute_force():
    rng = np.random.default_rng(2024)
    for _ in range(1000):
        stats = tuple(int(v) for v in rng.integers(1, 6, size=6))
        unit = make_unit(stats, cause=int(rng.integers(1, 5)), effect=int(rng.integers(1, 5)))
        result = neighbors(unit)
        genomes = [n.genome for n in result]
        assert len(genomes) == len(set(genomes))
        assert set(genomes) == brute_force_neighbors(unit)
        assert len(result) == 18 - sum(1 for v in stats if v == 1)


def test_drift_above_init_range_is_allowed():
    unit = make_unit(stats=(3, 4, 4, 3, 14, 7))
    assert any(n.move_time == 15 for n in neighbors(unit))


# ============================================================================
# Random initialization
# ============================================================================

def test_random_unit_is_deterministic():
    bounds = SearchBounds()
    assert random_unit(bounds, 11) == random_unit(bounds, 11)
    assert random_unit(bounds, 11).name is None


def test_random_unit_covers_bounds_uniformly():
    bounds = SearchBounds()
    seen = {stat: Counter() for stat in STATS}
    pairs = Counter()
    for seed in range(10_000):
        unit = random_unit(bounds, seed)
        for stat in STATS:
            seen[stat][getattr(unit, stat)] += 1
        pairs[(int(unit.cause), int(unit.effect))] += 1
    for stat in STATS:
        low, high = getattr(bounds, stat)
        values = range(low, high + 1)
        assert set(seen[stat]) == set(values), stat
        assert chisquare([seen[stat][v] for v in values]).pvalue > 1e-4, stat
    all_pairs = list(itertools.product(range(1, 5), repeat=2))
    assert set(pairs) == set(all_pairs)
    assert chisquare([pairs[p] for p in all_pairs]).pvalue > 1e-4


def test_degenerate_bounds_fix_stats():
    bounds = SearchBounds(cost=(2, 2), hp=(3, 3), damage=(1, 1), attack_range=(2, 2),
                          move_time=(9, 9), attack_time=(4, 4))
    for seed in range(20):
        assert random_unit(bounds, seed).stats == (2, 3, 1, 2, 9, 4)


@pytest.mark.parametrize("field,bounds", [
    ("cost", {"cost": (0, 3)}),
    ("hp", {"hp": (3, 2)}),
])
def test_invalid_bounds_are_rejected(field, bounds):
    with pytest.raises(UnitValidationError) as info:
        SearchBounds(**bounds)
    assert info.value.field == field


def test_bounds_codec():
    bounds = SearchBounds.from_dict({"moveTime": [4, 9]})
    assert bounds.move_time == (4, 9)
    assert bounds.cost == (1, 3)
    assert SearchBounds.from_dict(bounds.to_dict()) == bounds


# ============================================================================
# Validation and the engine bridge
# ============================================================================

def test_zero_hp_is_rejected_with_field_name():
    with pytest.raises(UnitValidationError) as info:
        make_unit(stats=(1, 0, 1, 1, 5, 3))
    assert info.value.field == "hp"


@pytest.mark.parametrize("kwargs,field", [
    ({"cause": 5}, "cause"),
    ({"effect": 0}, "effect"),
    ({"cause": True}, "cause"),
])
def test_ability_must_be_one_to_four(kwargs, field):
    with pytest.raises(UnitValidationError) as info:
        make_unit(**{"cause": 1, "effect": 1, **kwargs})
    assert info.value.field == field


def test_non_integer_stat_is_rejected():
    with pytest.raises(UnitValidationError):
        make_unit(stats=(1, 2.5, 1, 1, 5, 3))


def test_to_type_def_uses_produce_time_rule(fixture_units):
    revenger = next(u for u in fixture_units if u.name == "Revenger")
    type_def = to_type_def(revenger)
    assert type_def.name == "Revenger"
    assert (type_def.cost, type_def.max_hp, type_def.damage, type_def.attack_range) == (3, 4, 2, 3)
    assert (type_def.move_time, type_def.attack_time) == (13, 10)
    assert type_def.produce_time == 120
    assert type_def.ability.cause is Cause.ON_DEATH
    assert type_def.ability.effect is Effect.COUNTER_OR_DOUBLE_ATTACK
    assert not type_def.is_structure

    assert to_type_def(revenger.with_name(None)).name == "Generated"
    assert to_type_def(revenger, ProduceTimeRule(base=10, per_cost=5)).produce_time == 25


# ============================================================================
# Unit files
# ============================================================================

def test_fixtures_load_in_file_name_order(fixture_units):
    names = [u.name for u in fixture_units]
    assert len(names) == 10
    assert names[0] == "Barrage"
    assert set(names) >= {"Revenger", "LooTennet", "Phoenix", "Penny Pincher", "Chopper"}


def test_unit_directory_skips_reports_and_traces(tmp_path):
    save_unit(make_unit(name="Alpha"), tmp_path / "alpha.json")
    save_unit(make_unit(name="Beta"), tmp_path / "beta.json")
    (tmp_path / "alpha.report.json").write_text('{"f1": 1.0}')
    (tmp_path / "beta.trace.json").write_text('{"seed": 3}')
    (tmp_path / "notes.txt").write_text("not a unit")
    assert [u.name for u in load_fixture_units(tmp_path)] == ["Alpha", "Beta"]


def test_phoenix_fixture(fixture_units):
    phoenix = next(u for u in fixture_units if u.name == "Phoenix")
    assert phoenix.stats == (2, 1, 3, 1, 15, 3)
    assert phoenix.fitness == pytest.approx(1.3577)


def test_fixture_files_round_trip_byte_identical():
    for path in sorted(FIXTURES_DIR.glob("*.json")):
        text = path.read_text(encoding="utf-8")
        assert dumps_unit(loads_unit(text)) == text, path.name


def test_save_and_load(tmp_path):
    unit = make_unit(name="Tester", fitness=0.5)
    path = tmp_path / "units" / "tester.json"
    save_unit(unit, path)
    assert load_unit(path) == unit


def test_unit_document_key_order():
    doc = unit_to_dict(make_unit(name="X", fitness=1.0))
    assert list(doc) == ["cost", "hp", "damage", "range", "moveTime", "attackTime", "cause", "effect",
                         "name", "fitness"]
    assert "name" not in unit_to_dict(make_unit())


@pytest.mark.parametrize("text,field", [
    ('{"cost": 1, "hp": 1, "damage": 1, "range": 1, "moveTime": 5, "attackTime": 3, "cause": 1}', "effect"),
    ('{"cost": 1, "hp": 0, "damage": 1, "range": 1, "moveTime": 5, "attackTime": 3, "cause": 1, "effect": 1}',
     "hp"),
    ('{"cost": 1, "hp": 1, "damage": 1, "range": 1, "moveTime": 5, "attackTime": 3, "cause": 1, "effect": 1,'
     ' "fitness": "high"}', "fitness"),
    ('{"cost": 1, "hp": 1, "damage": 1, "range": 1, "moveTime": 5, "attackTime": 3, "cause": 1, "effect": 1,'
     ' "name": 7}', "name"),
    ("[1, 2]", "document"),
    ("{not json", "document"),
])
def test_malformed_documents_name_the_field(text, field):
    with pytest.raises(UnitValidationError) as info:
        loads_unit(text)
    assert info.value.field == field


def test_describe_unit(fixture_units):
    revenger = next(u for u in fixture_units if u.name == "Revenger")
    text = describe_unit(revenger)
    assert text.startswith("Revenger: cost 3, hp 4")
    assert "When it dies: strike back at its attacker." in text
