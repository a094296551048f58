"""
evaluator.py

Simulation-based fitness of a generated unit.

Round one (utility): only one agent, the holder, may build the unit. Each
game where it was built contributes +/-(1 + alive/game ticks) depending on
whether the holder won or lost (draws contribute 0); the sum is divided by
the number of such games.

Round two (balance): both agents may build it. With e the games player 1
won among games where the unit was made, and z/h the games player 1/2
made it, the score is 1 - |0.5 - e / (z + h)|.

The fitness is the sum of both scores.
"""

from __future__ import annotations

import concurrent.futures
import json
import logging
from dataclasses import dataclass, field, replace
from enum import Enum
from functools import partial
from pathlib import Path
from typing import Any, Callable, Dict, List, NamedTuple, Optional, Sequence, Tuple

from agents import AgentConfig, MCTSAgent, skill_preset
from engine import ANY_PLAYER, Agent, GameResult, run_game
from errors import ConfigError, MetricsIntegrityError, RoundAborted
from game_config import GameConfig, default_game_config
from unitspace import GeneratedUnit, ProduceTimeRule, to_type_def, unit_to_dict

logger = logging.getLogger(__name__)

# Zero-argument, picklable callable returning a fresh agent for one game.
AgentFactory = Callable[[], Agent]


class Outcome(str, Enum):
    WIN = "win"
    LOSS = "loss"
    DRAW = "draw"

    @property
    def sign(self) -> int:
        return {Outcome.WIN: 1, Outcome.LOSS: -1, Outcome.DRAW: 0}[self]

    @classmethod
    def for_player(cls, winner: Optional[int], player: int) -> "Outcome":
        if winner is None:
            return cls.DRAW
        return cls.WIN if winner == player else cls.LOSS


class Score(NamedTuple):
    value: float
    low_confidence: bool = False


# ============================================================================
# Metrics
# ============================================================================

@dataclass(frozen=True)
class GameRecord:
    """One round-one game, seen from the unit holder."""

    unit_made: bool
    outcome: Outcome
    alive_ticks: int
    game_ticks: int
    game_index: int = 0
    seed: int = 0
    holder_seat: int = 0
    first_made_tick: Optional[int] = None
    end_reason: str = ""

    def to_dict(self) -> Dict[str, Any]:
        return {
            "gameIndex": self.game_index,
            "seed": self.seed,
            "holderSeat": self.holder_seat,
            "unitMade": self.unit_made,
            "outcome": self.outcome.value,
            "aliveTicks": self.alive_ticks,
            "gameTicks": self.game_ticks,
            "firstMadeTick": self.first_made_tick,
            "endReason": self.end_reason,
        }


@dataclass
class RoundOneMetrics:
    games: List[GameRecord] = field(default_factory=list)

    @property
    def gamma(self) -> int:
        return sum(1 for g in self.games if g.unit_made)

    def validate(self) -> None:
        for record in self.games:
            if record.alive_ticks < 0 or record.game_ticks < 0:
                raise MetricsIntegrityError(f"game {record.game_index}: negative tick count")
            if record.alive_ticks > record.game_ticks:
                raise MetricsIntegrityError(
                    f"game {record.game_index}: alive ticks {record.alive_ticks} exceed game ticks {record.game_ticks}"
                )
            if record.alive_ticks and not record.unit_made:
                raise MetricsIntegrityError(f"game {record.game_index}: unit alive but never made")

    def to_dict(self) -> Dict[str, Any]:
        return {"gamma": self.gamma, "games": [g.to_dict() for g in self.games]}


@dataclass(frozen=True)
class DuelRecord:
    """One round-two game. Player 1 is engine seat 0."""

    game_index: int
    seed: int
    winner: Optional[int]
    made_by: Tuple[bool, bool]
    # Seat that made the unit first; None if nobody did or both on the same tick.
    first_maker: Optional[int]
    game_ticks: int
    end_reason: str

    @property
    def unit_made(self) -> bool:
        return any(self.made_by)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "gameIndex": self.game_index,
            "seed": self.seed,
            "winner": self.winner,
            "madeBy": list(self.made_by),
            "firstMaker": self.first_maker,
            "gameTicks": self.game_ticks,
            "endReason": self.end_reason,
        }


@dataclass
class RoundTwoMetrics:
    epsilon: int = 0
    zeta: int = 0
    eta: int = 0
    games: List[DuelRecord] = field(default_factory=list)

    @classmethod
    def from_games(cls, games: Sequence[DuelRecord]) -> "RoundTwoMetrics":
        metrics = cls(games=list(games))
        for game in games:
            metrics.zeta += game.made_by[0]
            metrics.eta += game.made_by[1]
            if game.unit_made and game.winner == 0:
                metrics.epsilon += 1
        return metrics

    @property
    def first_maker_wins(self) -> int:
        """Games won by whichever player made the unit first."""
        return sum(1 for g in self.games if g.first_maker is not None and g.winner == g.first_maker)

    def validate(self) -> None:
        if min(self.epsilon, self.zeta, self.eta) < 0:
            raise MetricsIntegrityError("round-two counts must be >= 0")
        if self.epsilon > self.zeta + self.eta:
            raise MetricsIntegrityError(
                f"epsilon {self.epsilon} exceeds zeta + eta = {self.zeta + self.eta}"
            )

    def to_dict(self) -> Dict[str, Any]:
        return {
            "epsilon": self.epsilon,
            "zeta": self.zeta,
            "eta": self.eta,
            "firstMakerWins": self.first_maker_wins,
            "games": [g.to_dict() for g in self.games],
        }


def fitness_round_one(metrics: RoundOneMetrics) -> Score:
    """Utility score in [-2, 2]; 0 with low confidence when the unit was never made."""
    metrics.validate()
    gamma = metrics.gamma
    if gamma == 0:
        return Score(0.0, True)
    total = 0.0
    for record in metrics.games:
        if not record.unit_made:
            continue
        presence = record.alive_ticks / record.game_ticks if record.game_ticks else 0.0
        total += record.outcome.sign * (1.0 + presence)
    return Score(total / gamma, False)


def fitness_round_two(metrics: RoundTwoMetrics) -> Score:
    """Balance score in [0.5, 1]; 0.5 with low confidence when nobody made the unit."""
    metrics.validate()
    made = metrics.zeta + metrics.eta
    if made == 0:
        return Score(0.5, True)
    # 1 - |0.5 - e/n| written over integers so e and n - e score identically.
    return Score(1.0 - abs(2 * metrics.epsilon - made) / (2 * made), False)


# ============================================================================
# Playing games
# ============================================================================

@dataclass(frozen=True)
class GameTask:
    index: int
    config: GameConfig
    seats: Tuple[AgentFactory, AgentFactory]
    seed: int
    decision_budget: Optional[float] = None
    record_events: bool = False


def _play(task: GameTask) -> GameResult:
    return run_game(
        task.config,
        task.seats[0](),
        task.seats[1](),
        seed=task.seed,
        decision_budget=task.decision_budget,
        record_events=task.record_events,
    )


def play_games(tasks: Sequence[GameTask], jobs: int = 1) -> List[GameResult]:
    """Play every task; results come back in task order whatever the completion order.

    Any failing game aborts the batch with RoundAborted naming the game.
    """
    results: Dict[int, GameResult] = {}
    if jobs <= 1 or len(tasks) <= 1:
        for task in tasks:
            try:
                results[task.index] = _play(task)
            except Exception as exc:
                raise RoundAborted(task.index, exc) from exc
    else:
        with concurrent.futures.ProcessPoolExecutor(max_workers=jobs) as executor:
            futures: Dict[concurrent.futures.Future, int] = {
                executor.submit(_play, task): task.index for task in tasks
            }
            for future in concurrent.futures.as_completed(futures):
                index = futures[future]
                try:
                    results[index] = future.result()
                except Exception as exc:
                    for pending in futures:
                        pending.cancel()
                    raise RoundAborted(index, exc) from exc
    return [results[task.index] for task in tasks]


def mcts_factory(config: AgentConfig) -> AgentFactory:
    return partial(MCTSAgent, config)


def unit_game_config(
    unit: GeneratedUnit,
    base: Optional[GameConfig] = None,
    rule: Optional[ProduceTimeRule] = None,
) -> GameConfig:
    """Base config with the generated unit added to its producer's build list."""
    base = base or default_game_config()
    rule = rule or ProduceTimeRule()
    type_def = to_type_def(unit, rule)
    if type_def.name in base.unit_types:
        raise ConfigError(f"generated unit name {type_def.name!r} clashes with an existing unit type")
    return base.with_unit_type(type_def, producer=rule.producer)


def _first_made(result: GameResult, seat: int, type_name: str) -> Optional[int]:
    return result.stats_for(seat, type_name).first_produced_tick


def run_round_one(
    unit: GeneratedUnit,
    games: int,
    cfg: AgentConfig,
    seed_base: int,
    *,
    game_config: Optional[GameConfig] = None,
    rule: Optional[ProduceTimeRule] = None,
    holder: Optional[AgentFactory] = None,
    rival: Optional[AgentFactory] = None,
    alternate_corners: bool = True,
    decision_budget: Optional[float] = None,
    jobs: int = 1,
) -> RoundOneMetrics:
    """Utility round: only the holder may build the unit. The holder's seat
    alternates per game unless `alternate_corners` is off."""
    if games < 1:
        raise ConfigError("games must be >= 1")
    config = unit_game_config(unit, game_config, rule)
    type_name = config.generated_type
    holder = holder or mcts_factory(cfg)
    rival = rival or mcts_factory(cfg)

    tasks: List[GameTask] = []
    seats: List[int] = []
    for index in range(games):
        seat = index % 2 if alternate_corners else 0
        access = [None, None]
        access[1 - seat] = config.without_types(1 - seat, frozenset({type_name}))
        seat_factories = (holder, rival) if seat == 0 else (rival, holder)
        tasks.append(GameTask(
            index=index,
            config=config.with_access(access[0], access[1]),
            seats=seat_factories,
            seed=seed_base + index,
            decision_budget=decision_budget,
        ))
        seats.append(seat)

    records: List[GameRecord] = []
    for task, seat, result in zip(tasks, seats, play_games(tasks, jobs)):
        records.append(GameRecord(
            unit_made=result.made_by(seat, type_name),
            outcome=Outcome.for_player(result.outcome.winner, seat),
            alive_ticks=result.stats_for(ANY_PLAYER, type_name).alive_interval_union,
            game_ticks=result.end_tick,
            game_index=task.index,
            seed=task.seed,
            holder_seat=seat,
            first_made_tick=_first_made(result, seat, type_name),
            end_reason=result.outcome.reason,
        ))
    metrics = RoundOneMetrics(records)
    metrics.validate()
    return metrics


def run_round_two(
    unit: GeneratedUnit,
    games: int,
    cfg: AgentConfig,
    seed_base: int,
    *,
    game_config: Optional[GameConfig] = None,
    rule: Optional[ProduceTimeRule] = None,
    player1: Optional[AgentFactory] = None,
    player2: Optional[AgentFactory] = None,
    decision_budget: Optional[float] = None,
    jobs: int = 1,
) -> RoundTwoMetrics:
    """Balance round: both players may build the unit; player 1 keeps seat 0."""
    if games < 1:
        raise ConfigError("games must be >= 1")
    config = unit_game_config(unit, game_config, rule)
    type_name = config.generated_type
    seats = (player1 or mcts_factory(cfg), player2 or mcts_factory(cfg))
    tasks = [
        GameTask(index=index, config=config, seats=seats, seed=seed_base + index, decision_budget=decision_budget)
        for index in range(games)
    ]

    records: List[DuelRecord] = []
    for task, result in zip(tasks, play_games(tasks, jobs)):
        firsts = [_first_made(result, seat, type_name) for seat in (0, 1)]
        first_maker: Optional[int] = None
        if firsts[0] is not None and (firsts[1] is None or firsts[0] < firsts[1]):
            first_maker = 0
        elif firsts[1] is not None and (firsts[0] is None or firsts[1] < firsts[0]):
            first_maker = 1
        records.append(DuelRecord(
            game_index=task.index,
            seed=task.seed,
            winner=result.outcome.winner,
            made_by=(firsts[0] is not None, firsts[1] is not None),
            first_maker=first_maker,
            game_ticks=result.end_tick,
            end_reason=result.outcome.reason,
        ))
    metrics = RoundTwoMetrics.from_games(records)
    metrics.validate()
    return metrics


# ============================================================================
# Fitness reports
# ============================================================================

@dataclass(frozen=True)
class EvaluationConfig:
    games_per_round: int = 10
    agent: AgentConfig = field(default_factory=lambda: skill_preset("medium"))
    seed_base: int = 0
    game_config: Optional[GameConfig] = None
    rule: ProduceTimeRule = field(default_factory=ProduceTimeRule)
    alternate_corners: bool = True
    decision_budget: Optional[float] = None
    jobs: int = 1

    def __post_init__(self) -> None:
        if self.games_per_round < 1:
            raise ConfigError("games_per_round must be >= 1")

    def with_seed(self, seed_base: int) -> "EvaluationConfig":
        return replace(self, seed_base=seed_base)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "gamesPerRound": self.games_per_round,
            "agent": self.agent.to_dict(),
            "seedBase": self.seed_base,
            "gameConfig": self.game_config.source if self.game_config else None,
            "produceTime": {"base": self.rule.base, "perCost": self.rule.per_cost, "producer": self.rule.producer},
            "alternateCorners": self.alternate_corners,
        }


@dataclass
class FitnessReport:
    unit: GeneratedUnit
    f1: float
    f2: float
    round_one: RoundOneMetrics
    round_two: RoundTwoMetrics
    low_confidence_f1: bool = False
    low_confidence_f2: bool = False
    config: Dict[str, Any] = field(default_factory=dict)

    @property
    def total(self) -> float:
        return self.f1 + self.f2

    @property
    def low_confidence(self) -> bool:
        return self.low_confidence_f1 or self.low_confidence_f2

    def to_dict(self) -> Dict[str, Any]:
        return {
            "unit": unit_to_dict(self.unit),
            "f1": self.f1,
            "f2": self.f2,
            "total": self.total,
            "lowConfidence": {"f1": self.low_confidence_f1, "f2": self.low_confidence_f2},
            "roundOne": self.round_one.to_dict(),
            "roundTwo": self.round_two.to_dict(),
            "config": self.config,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2) + "\n"

    def save(self, path: Path) -> None:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", encoding="utf-8") as f:
            f.write(self.to_json())


def evaluate_unit(
    unit: GeneratedUnit,
    eval_cfg: Optional[EvaluationConfig] = None,
    *,
    holder: Optional[AgentFactory] = None,
    rival: Optional[AgentFactory] = None,
) -> FitnessReport:
    """Run both rounds and combine them. Round two's seeds follow round one's."""
    eval_cfg = eval_cfg or EvaluationConfig()
    games = eval_cfg.games_per_round
    common = dict(
        game_config=eval_cfg.game_config,
        rule=eval_cfg.rule,
        decision_budget=eval_cfg.decision_budget,
        jobs=eval_cfg.jobs,
    )
    round_one = run_round_one(
        unit, games, eval_cfg.agent, eval_cfg.seed_base,
        holder=holder, rival=rival, alternate_corners=eval_cfg.alternate_corners, **common,
    )
    round_two = run_round_two(
        unit, games, eval_cfg.agent, eval_cfg.seed_base + games,
        player1=holder, player2=rival, **common,
    )
    f1 = fitness_round_one(round_one)
    f2 = fitness_round_two(round_two)
    report = FitnessReport(
        unit=unit,
        f1=f1.value,
        f2=f2.value,
        round_one=round_one,
        round_two=round_two,
        low_confidence_f1=f1.low_confidence,
        low_confidence_f2=f2.low_confidence,
        config=eval_cfg.to_dict(),
    )
    logger.info(
        "Evaluated %s: f1=%.4f f2=%.4f total=%.4f (made %s/%s, %s/%s)",
        unit.name or "unit", report.f1, report.f2, report.total,
        round_one.gamma, games, round_two.zeta + round_two.eta, 2 * games,
    )
    return report

