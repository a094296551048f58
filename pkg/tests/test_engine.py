from dataclasses import replace

import pytest

from agents import IdleAgent, RandomAgent, RushAgent, build_agent
from engine import (
    ANY_PLAYER,
    IDLE,
    Command,
    CommandKind,
    advance,
    has_choice,
    is_legal,
    legal_actions,
    needs_decision,
    neighbor_cell,
    new_game,
    resource_balance,
    run_game,
    step,
    unit_commands,
    write_event_log,
)
from errors import ConfigError, ContractViolation
from evaluator import unit_game_config
from game_config import Ability, Cause, Effect, Placement

RIGHT, DOWN, LEFT, UP = 1, 2, 3, 0


def hold(state, orders):
    """Orders for the units in `orders` that are alive and free right now."""
    return {uid: cmd for uid, cmd in orders.items() if uid in state.units and state.units[uid].is_free}


def run_ticks(state, ticks, orders0=None, orders1=None, check_balance=True):
    for _ in range(ticks):
        advance(state, hold(state, orders0 or {}), hold(state, orders1 or {}))
        if check_balance:
            assert resource_balance(state) == 0
        if state.terminal is not None:
            break
    return state


def kinds(state):
    return [event.kind for event in state.events]


# ============================================================================
# Setup and legal commands
# ============================================================================

def test_new_game_places_default_layout(default_config):
    state = new_game(default_config)
    assert state.tick == 0
    assert state.resources == [5, 5]
    assert [u.id for u in state.units_of(0)] == [1, 3, 5]
    assert [u.id for u in state.units_of(1)] == [2, 4, 6]
    assert state.units[1].type_name == "Base" and state.units[1].position == (1, 1)
    assert state.units[6].position == (6, 7)
    assert state.grid[(2, 3)] == 3
    assert resource_balance(state) == 0
    assert state.stats == {}


def test_overlapping_layout_is_rejected(make_config):
    with pytest.raises(ConfigError):
        make_config([(0, "Worker", 2, 2), (1, "Worker", 2, 2)])


def test_legal_actions_start_with_idle_and_list_everything(default_config):
    state = new_game(default_config)
    actions = legal_actions(state, 0)
    assert sorted(actions) == [1, 3, 5]
    for commands in actions.values():
        assert commands[0] == IDLE

    worker = actions[5]
    assert Command(CommandKind.HARVEST, position=(0, 0)) in worker
    assert Command(CommandKind.MOVE, direction=RIGHT) in worker
    # (1, 1) holds the base; no return without cargo
    assert Command(CommandKind.MOVE, direction=DOWN) not in worker
    assert all(c.kind is not CommandKind.RETURN for c in worker)

    base = actions[1]
    assert all(c.kind is not CommandKind.MOVE for c in base)
    assert {c.unit_type for c in base if c.kind is CommandKind.PRODUCE} == {"Worker"}


def test_production_needs_resources(default_config):
    state = new_game(replace(default_config, start_resources=1))
    barracks = legal_actions(state, 0)[3]
    assert barracks == [IDLE]
    assert needs_decision(state, 0)


def test_access_table_hides_types(default_config):
    config = default_config.with_access(frozenset({"Worker", "Heavy"}), None)
    state = new_game(config)
    produced = {c.unit_type for c in legal_actions(state, 0)[3] if c.kind is CommandKind.PRODUCE}
    assert produced == {"Heavy"}
    produced1 = {c.unit_type for c in legal_actions(state, 1)[4] if c.kind is CommandKind.PRODUCE}
    assert produced1 == {"Light", "Heavy", "Ranged"}


def test_illegal_commands_are_rejected_not_raised(default_config):
    state = new_game(default_config)
    rejected = advance(state, {2: IDLE, 5: Command(CommandKind.MOVE, direction=DOWN)}, {})
    assert {r.unit_id for r in rejected} == {2, 5}
    assert state.units[5].is_free
    assert kinds(state).count("rejected") == 2


# ============================================================================
# Stepping
# ============================================================================

def test_step_is_pure(default_config):
    state = new_game(default_config)
    nxt = step(state, {5: Command(CommandKind.MOVE, direction=RIGHT)})
    assert state.tick == 0
    assert state.units[5].is_free
    assert nxt.tick == 1
    assert not nxt.units[5].is_free


def test_move_completes_after_move_time(default_config):
    state = new_game(default_config)
    advance(state, {5: Command(CommandKind.MOVE, direction=RIGHT)})
    run_ticks(state, 8)
    assert state.tick == 9
    assert state.units[5].position == (1, 0)
    assert 5 not in legal_actions(state, 0)
    advance(state)
    assert state.units[5].position == (2, 0)
    assert state.grid[(2, 0)] == 5 and (1, 0) not in state.grid
    assert state.units[5].is_free


def test_idle_lasts_one_tick(default_config):
    state = new_game(default_config)
    advance(state, {5: IDLE})
    assert state.units[5].is_free


def test_move_conflict_goes_to_lower_id(make_config):
    state = new_game(make_config([(0, "Light", 3, 4), (1, "Light", 5, 4)]))
    advance(state, {1: Command(CommandKind.MOVE, direction=RIGHT)}, {2: Command(CommandKind.MOVE, direction=LEFT)})
    run_ticks(state, 7)
    assert state.tick == 8
    assert state.units[1].position == (4, 4)
    assert state.units[2].position == (5, 4)
    assert "move_blocked" in kinds(state)


def test_harvest_and_return_cycle(default_config):
    state = new_game(default_config)
    run_ticks(state, 20, {5: Command(CommandKind.HARVEST, position=(0, 0))})
    assert state.tick == 20
    assert state.units[5].carried == 1
    assert state.resource_nodes[(0, 0)] == 19
    ret = Command(CommandKind.RETURN, position=(1, 1))
    assert ret in legal_actions(state, 0)[5]
    run_ticks(state, 10, {5: ret})
    assert state.resources[0] == 6
    assert state.units[5].carried == 0


def test_production_spawns_unit_and_records_stats(default_config):
    state = new_game(default_config)
    produce = Command(CommandKind.PRODUCE, direction=UP, unit_type="Light")
    advance(state, {3: produce})
    assert state.resources[0] == 3
    run_ticks(state, 79)
    assert state.tick == 80
    child = state.units[7]
    assert child.type_name == "Light" and child.owner == 0 and child.position == (2, 2)
    assert child.born_tick == 80
    stats = state.type_stats(0, "Light")
    assert stats.times_produced == 1 and stats.first_produced_tick == 80
    assert state.type_stats(ANY_PLAYER, "Light").times_produced == 1
    assert resource_balance(state) == 0

    run_ticks(state, 20)
    assert state.type_stats(0, "Light").alive_interval_union == 20
    assert state.type_stats(0, "Light").total_alive_ticks == 20


def test_blocked_production_is_refunded(make_config):
    config = make_config([(0, "Barracks", 3, 3), (0, "Light", 3, 1), (1, "Worker", 7, 7)])
    state = new_game(config)
    advance(state, {
        1: Command(CommandKind.PRODUCE, direction=UP, unit_type="Light"),
        2: Command(CommandKind.MOVE, direction=DOWN),
    })
    assert state.resources[0] == 3
    run_ticks(state, 79)
    assert state.units[2].position == (3, 2)
    assert "produce_blocked" in kinds(state)
    assert state.resources[0] == 5
    assert state.type_stats(0, "Light").times_produced == 0


# ============================================================================
# Combat and abilities
# ============================================================================

def test_elimination_ends_game(make_config):
    state = new_game(make_config([(0, "Worker", 3, 3), (1, "Light", 4, 3)]))
    run_ticks(state, 10, {}, {2: Command(CommandKind.ATTACK, target_id=1)})
    assert state.terminal is not None
    assert state.terminal.winner == 1
    assert state.terminal.reason == "elimination"
    assert state.terminal.end_tick == 5
    with pytest.raises(ContractViolation):
        step(state)
    with pytest.raises(ContractViolation):
        legal_actions(state, 0)


def test_simultaneous_attacks_give_mutual_elimination(make_config):
    state = new_game(make_config([(0, "Worker", 3, 3), (1, "Worker", 4, 3)]))
    run_ticks(
        state, 10,
        {1: Command(CommandKind.ATTACK, target_id=2)},
        {2: Command(CommandKind.ATTACK, target_id=1)},
    )
    assert state.terminal.winner is None
    assert state.terminal.reason == "mutual_elimination"
    assert state.terminal.end_tick == 5


def test_timeout_is_a_draw(default_config):
    state = new_game(replace(default_config, max_ticks=5))
    run_ticks(state, 4)
    assert state.terminal is None
    advance(state)
    assert state.terminal.winner is None
    assert state.terminal.reason == "timeout"
    assert state.terminal.end_tick == 5


def test_attack_misses_when_target_moved_out_of_range(make_config, make_type):
    slow = make_type(name="Slow", attack_time=12)
    state = new_game(make_config([(0, "Light", 3, 3), (1, "Slow", 4, 3)], extra_types=[slow]))
    advance(state, {1: Command(CommandKind.MOVE, direction=LEFT)}, {2: Command(CommandKind.ATTACK, target_id=1)})
    run_ticks(state, 12)
    assert state.units[1].position == (2, 3)
    assert state.units[1].hp == 4
    assert "attack_missed" in kinds(state)


@pytest.fixture
def ability_config(make_config, make_type):
    def _build(cause, effect, *, hp=4, cost=1, attack_time=5, enemy="Worker", abilities_enabled=True):
        subject = make_type(cost=cost, hp=hp, attack_time=attack_time, ability=Ability(Cause(cause), Effect(effect)))
        # Subject is unit 1, the enemy unit 2.
        layout = [(0, "Subject", 3, 3), (1, enemy, 4, 3), (0, "Base", 0, 7)]
        return make_config(layout, extra_types=[subject], abilities_enabled=abilities_enabled)
    return _build


def test_heal_on_damage_taken(ability_config):
    state = new_game(ability_config(Cause.ON_DAMAGE_TAKEN, Effect.HEAL))
    state.units[1].hp = 2
    run_ticks(state, 5, {}, {2: Command(CommandKind.ATTACK, target_id=1)})
    assert state.units[1].hp == 4
    assert "heal" in kinds(state)


def test_lethal_damage_suppresses_damage_taken_hook(ability_config):
    state = new_game(ability_config(Cause.ON_DAMAGE_TAKEN, Effect.HEAL))
    state.units[1].hp = 1
    run_ticks(state, 5, {}, {2: Command(CommandKind.ATTACK, target_id=1)})
    assert 1 not in state.units
    assert "heal" not in kinds(state)


def test_abilities_can_be_disabled(ability_config):
    state = new_game(ability_config(Cause.ON_DAMAGE_TAKEN, Effect.HEAL, abilities_enabled=False))
    state.units[1].hp = 2
    run_ticks(state, 5, {}, {2: Command(CommandKind.ATTACK, target_id=1)})
    assert state.units[1].hp == 1
    assert "ability" not in kinds(state)


def test_counter_attack_on_damage_taken(ability_config):
    state = new_game(ability_config(Cause.ON_DAMAGE_TAKEN, Effect.COUNTER_OR_DOUBLE_ATTACK, enemy="Light"))
    run_ticks(state, 5, {}, {2: Command(CommandKind.ATTACK, target_id=1)})
    assert state.units[1].hp == 2
    assert state.units[2].hp == 3


def test_double_attack_on_damage_dealt(ability_config):
    state = new_game(ability_config(Cause.ON_DAMAGE_DEALT, Effect.COUNTER_OR_DOUBLE_ATTACK, enemy="Base"))
    run_ticks(state, 5, {1: Command(CommandKind.ATTACK, target_id=2)})
    assert state.units[2].hp == 8


def test_resource_grant_on_damage_dealt(ability_config):
    state = new_game(ability_config(Cause.ON_DAMAGE_DEALT, Effect.RETURN_RESOURCES, enemy="Base"))
    run_ticks(state, 5, {1: Command(CommandKind.ATTACK, target_id=2)})
    assert state.resources[0] == 15
    assert state.injected[0] == 10
    assert resource_balance(state) == 0


def test_resource_refund_on_death(ability_config):
    state = new_game(ability_config(Cause.ON_DEATH, Effect.RETURN_RESOURCES, hp=1, cost=3, enemy="Light"))
    run_ticks(state, 5, {}, {2: Command(CommandKind.ATTACK, target_id=1)})
    assert 1 not in state.units
    assert state.resources[0] == 8
    assert resource_balance(state) == 0


def test_death_slows_the_killer(ability_config):
    state = new_game(ability_config(Cause.ON_DEATH, Effect.SPEED_CHANGE, hp=1, enemy="Light"))
    assert state.units[2].attack_time == 5
    run_ticks(state, 5, {}, {2: Command(CommandKind.ATTACK, target_id=1)})
    assert state.units[2].speed_penalty
    assert state.units[2].attack_time == 10


def test_every_third_attack_hastens(ability_config):
    state = new_game(ability_config(Cause.ON_THIRD_ATTACK, Effect.SPEED_CHANGE, attack_time=6, enemy="Base"))
    orders = {1: Command(CommandKind.ATTACK, target_id=2)}
    run_ticks(state, 17, orders)
    assert not state.units[1].speed_boost
    assert state.units[2].hp == 8
    run_ticks(state, 1, orders)
    assert state.tick == 18
    assert state.units[2].hp == 7
    assert state.units[1].speed_boost
    assert state.units[1].attack_time == 3
    assert state.units[1].attack_counter == 0


# ============================================================================
# Whole games
# ============================================================================

def test_rush_beats_idle(default_config):
    result = run_game(default_config, IdleAgent(), RushAgent(), seed=0)
    assert result.outcome.winner == 1
    assert result.outcome.reason == "elimination"
    assert result.end_tick < default_config.max_ticks
    assert result.made_by(1, "Light")
    assert not result.made_by(0, "Light")


def test_random_games_replay_identically(default_config):
    config = replace(default_config, max_ticks=400)
    first = run_game(config, RandomAgent(), RandomAgent(), seed=7)
    second = run_game(config, RandomAgent(), RandomAgent(), seed=7)
    assert first.event_lines() == second.event_lines()
    assert first.event_digest() == second.event_digest()
    assert first.outcome == second.outcome


def test_resources_are_conserved_with_abilities(default_config, make_config, make_type):
    refunder = make_type(name="Refunder", cost=2, hp=2, damage=1, attack_time=4,
                         ability=Ability(Cause.ON_DEATH, Effect.RETURN_RESOURCES))
    barracks = replace(default_config.unit_type("Barracks"), produces=("Light", "Refunder"))
    config = make_config(
        [(p.player, p.type_name, p.x, p.y) for p in default_config.layout],
        extra_types=[refunder, barracks],
        resource_nodes=[(0, 0, 20), (7, 7, 20)],
        max_ticks=600,
    )
    for seed in range(3):
        state = new_game(config, seed, record_events=False)
        agents = (RandomAgent(), RandomAgent())
        for player, agent in enumerate(agents):
            agent.begin_game(player, seed * 2 + player)
        while state.terminal is None:
            advance(state, agents[0].choose_action(state, 0), agents[1].choose_action(state, 1))
            assert resource_balance(state) == 0


def test_event_log_written_as_jsonl(default_config, tmp_path):
    result = run_game(replace(default_config, max_ticks=30), IdleAgent(), IdleAgent())
    path = tmp_path / "game.jsonl"
    write_event_log(result, path)
    lines = path.read_text().splitlines()
    assert lines == result.event_lines()
    assert '"kind":"terminal"' in lines[-1]


def test_placement_player_must_be_zero_or_one(make_config):
    with pytest.raises(ConfigError):
        make_config([(2, "Worker", 1, 1)])
    assert Placement(0, "Worker", 1, 1).player == 0


def candidate_commands(state, unit):
    """Legal and illegal commands a careless caller might send for `unit`."""
    cells = {neighbor_cell(unit.position, d) for d in range(4)}
    cells |= set(state.resource_nodes) | {other.position for other in state.units.values()}
    yield IDLE
    yield Command(CommandKind.IDLE, direction=0)
    for direction in range(-1, 5):
        yield Command(CommandKind.MOVE, direction=direction)
        for type_name in state.config.unit_types:
            yield Command(CommandKind.PRODUCE, direction=direction, unit_type=type_name)
    yield Command(CommandKind.MOVE, direction=1, target_id=unit.id)
    for other_id in list(state.units) + [state.next_id]:
        yield Command(CommandKind.ATTACK, target_id=other_id)
    for cell in cells:
        yield Command(CommandKind.HARVEST, position=cell)
        yield Command(CommandKind.RETURN, position=cell)


def test_fast_legality_checks_agree_with_command_lists(fixture_units):
    config = replace(unit_game_config(fixture_units[0]), max_ticks=600)
    for seed in range(3):
        state = new_game(config, seed, record_events=False)
        agents = (RandomAgent(seed), RushAgent())
        for player, agent in enumerate(agents):
            agent.begin_game(player, seed * 2 + player)
        while state.terminal is None:
            if state.tick % 7 == 0:
                for unit in state.units.values():
                    commands = unit_commands(state, unit)
                    assert has_choice(state, unit) == (len(commands) > 1)
                    for command in candidate_commands(state, unit):
                        assert is_legal(state, unit, command) == (command in commands), command
            advance(state, agents[0].choose_action(state, 0), agents[1].choose_action(state, 1))


def test_replays_are_identical_across_fifty_seeds(default_config):
    config = replace(default_config, max_ticks=1000)
    for seed in range(50):
        first = run_game(config, RandomAgent(seed), RushAgent(), seed=seed)
        second = run_game(config, RandomAgent(seed), RushAgent(), seed=seed)
        assert first.event_digest() == second.event_digest()


def test_conservation_holds_every_tick_of_random_games(fixture_units):
    for seed in range(20):
        unit = fixture_units[seed % len(fixture_units)]
        state = new_game(unit_game_config(unit), seed, record_events=False)
        agents = (RandomAgent(seed), RandomAgent(seed + 100))
        for player, agent in enumerate(agents):
            agent.begin_game(player, seed * 2 + player)
        while state.terminal is None:
            advance(state, agents[0].choose_action(state, 0), agents[1].choose_action(state, 1))
            assert resource_balance(state) == 0


@pytest.mark.slow
def test_mcts_replays_are_identical_across_many_seeds(default_config):
    config = replace(default_config, max_ticks=1000)
    budget = {"maxIterations": 50, "playoutHorizon": 50}
    for seed in range(50):
        first = run_game(config, build_agent("weak", budget), build_agent("weak", budget), seed=seed)
        second = run_game(config, build_agent("weak", budget), build_agent("weak", budget), seed=seed)
        assert first.event_digest() == second.event_digest()


@pytest.mark.slow
def test_conservation_holds_every_tick_of_mcts_games(fixture_units):
    budget = {"maxIterations": 50, "decisionPeriod": 25}
    for seed in range(20):
        unit = fixture_units[seed % len(fixture_units)]
        state = new_game(unit_game_config(unit), seed, record_events=False)
        agents = (build_agent("weak", budget), build_agent("weak", budget))
        for player, agent in enumerate(agents):
            agent.begin_game(player, seed * 2 + player)
        while state.terminal is None:
            advance(state, agents[0].choose_action(state, 0), agents[1].choose_action(state, 1))
            assert resource_balance(state) == 0
