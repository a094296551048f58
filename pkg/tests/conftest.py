"""Shared fixtures. Puts backend/ on sys.path so tests import modules by bare name."""

import sys
from pathlib import Path

import pytest

BACKEND = Path(__file__).resolve().parent.parent / "backend"
sys.path.insert(0, str(BACKEND))

import lab_store  # noqa: E402
from game_config import GameConfig, Placement, ResourceNode, UnitTypeDef, default_game_config  # noqa: E402
from settings import FIXTURES_DIR, get_settings  # noqa: E402
from unitspace import load_fixture_units  # noqa: E402


def pytest_addoption(parser):
    parser.addoption("--runslow", action="store_true", default=False, help="run slow statistical tests")


def pytest_collection_modifyitems(config, items):
    if config.getoption("--runslow") or get_settings().run_slow:
        return
    skip_slow = pytest.mark.skip(reason="needs --runslow or UNITFORGE_RUN_SLOW=1")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip_slow)


@pytest.fixture(autouse=True)
def isolated_store(monkeypatch, tmp_path):
    """Keep the lab store out of backend/data during tests."""
    monkeypatch.setenv("UNITFORGE_DATA_DIR", str(tmp_path / "data"))
    monkeypatch.setattr(lab_store, "_default_store", None)


@pytest.fixture
def default_config() -> GameConfig:
    return default_game_config()


@pytest.fixture
def fixture_units():
    return load_fixture_units(FIXTURES_DIR)


def build_config(layout, extra_types=(), resource_nodes=(), **overrides) -> GameConfig:
    """Default unit table plus `extra_types`, with a custom layout.

    layout items are (player, type name, x, y); resource nodes are (x, y, amount).
    """
    base = default_game_config()
    types = dict(base.unit_types)
    for type_def in extra_types:
        types[type_def.name] = type_def
    return GameConfig(
        unit_types=types,
        layout=tuple(Placement(*item) for item in layout),
        resource_nodes=tuple(ResourceNode(*node) for node in resource_nodes),
        **overrides,
    )


@pytest.fixture
def make_config():
    return build_config


@pytest.fixture
def make_type():
    def _make(name="Subject", cost=1, hp=4, damage=1, attack_range=1, move_time=10, attack_time=5,
              produce_time=50, ability=None):
        return UnitTypeDef(
            name=name, cost=cost, max_hp=hp, damage=damage, attack_range=attack_range,
            move_time=move_time, attack_time=attack_time, produce_time=produce_time, ability=ability,
        )
    return _make
