"""
balancelab.py

Balance study harness. Every ordered pair of skill tiers plays every unit
in exclusive mode (only player 1 may build it), shared mode (both may) and
optionally baseline mode (neither may). A matchup-round whose units were
built too rarely on average is replayed once with fresh seeds; if it is
still too rare it is flagged as low-production.

Reports come out as a long-form CSV (one row per unit and matchup-round)
and a JSON document with mean/std win-rate matrices per mode.
"""

from __future__ import annotations

import csv
import json
import logging
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Any, Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np
from scipy.stats import binomtest

from agents import SKILL_LEVELS, AgentConfig, skill_preset
from engine import ANY_PLAYER, GameResult, write_event_log
from errors import ConfigError, UsageError
from evaluator import AgentFactory, GameTask, mcts_factory, play_games, unit_game_config
from game_config import GameConfig, apply_overrides, default_game_config, load_game_config
from searchgen import genome_key
from unitspace import GeneratedUnit, ProduceTimeRule

logger = logging.getLogger(__name__)


class Mode(str, Enum):
    EXCLUSIVE = "exclusive"
    SHARED = "shared"
    BASELINE = "baseline"


@dataclass(frozen=True)
class MatchupSpec:
    p1_skill: str
    p2_skill: str
    mode: Mode = Mode.SHARED
    games_per_unit: int = 100
    seed_base: int = 0
    # Player 1 takes seat 0 on even games and seat 1 on odd games.
    alternate_corners: bool = False

    def __post_init__(self) -> None:
        if self.games_per_unit < 1:
            raise ConfigError("games_per_unit must be >= 1")
        object.__setattr__(self, "mode", Mode(self.mode))

    @property
    def label(self) -> str:
        return f"{self.p1_skill}-vs-{self.p2_skill}"


@dataclass(frozen=True)
class RedoRule:
    threshold: float = 25.0

    def __post_init__(self) -> None:
        if self.threshold <= 0:
            raise ConfigError("redo threshold must be > 0")

    def fires(self, average_made: float) -> bool:
        return average_made < self.threshold


@dataclass
class CellResult:
    unit_name: str
    unit_key: str
    p1_skill: str
    p2_skill: str
    mode: Mode
    games: int = 0
    p1_wins: int = 0
    p2_wins: int = 0
    draws: int = 0
    p1_made: int = 0
    p2_made: int = 0
    made_games: int = 0
    p1_made_wins: int = 0
    alive_ticks_total: int = 0
    attempt: int = 0

    @property
    def win_rate(self) -> float:
        return self.p1_wins / self.games if self.games else 0.0

    @property
    def loss_rate(self) -> float:
        return self.p2_wins / self.games if self.games else 0.0

    @property
    def draw_rate(self) -> float:
        return self.draws / self.games if self.games else 0.0

    @property
    def avg_alive_ticks(self) -> float:
        """Mean alive-interval union of the unit over games where it was built."""
        return self.alive_ticks_total / self.made_games if self.made_games else 0.0

    @property
    def win_rate_when_made(self) -> Optional[float]:
        """Player 1's win rate over games in which player 1 built the unit."""
        return self.p1_made_wins / self.p1_made if self.p1_made else None

    @property
    def decisive_interval(self) -> Tuple[float, float]:
        """95% Clopper-Pearson interval on player 1's share of decisive games."""
        decisive = self.p1_wins + self.p2_wins
        if decisive == 0:
            return (0.0, 1.0)
        ci = binomtest(self.p1_wins, decisive).proportion_ci(confidence_level=0.95, method="exact")
        return (float(ci.low), float(ci.high))

    def to_row(self) -> Dict[str, Any]:
        low, high = self.decisive_interval
        when_made = self.win_rate_when_made
        return {
            "matchup": f"{self.p1_skill}-vs-{self.p2_skill}",
            "p1Skill": self.p1_skill,
            "p2Skill": self.p2_skill,
            "unit": self.unit_name,
            "mode": self.mode.value,
            "games": self.games,
            "p1Wins": self.p1_wins,
            "p2Wins": self.p2_wins,
            "draws": self.draws,
            "winRate": self.win_rate,
            "drawRate": self.draw_rate,
            "p1Made": self.p1_made,
            "p2Made": self.p2_made,
            "madeGames": self.made_games,
            "avgAliveTicks": self.avg_alive_ticks,
            "p1WinRateWhenMade": "" if when_made is None else when_made,
            "ciLow": low,
            "ciHigh": high,
            "attempt": self.attempt,
        }


CSV_FIELDS = [
    "matchup", "p1Skill", "p2Skill", "unit", "mode", "games", "p1Wins", "p2Wins", "draws",
    "winRate", "drawRate", "p1Made", "p2Made", "madeGames", "avgAliveTicks",
    "p1WinRateWhenMade", "ciLow", "ciHigh", "attempt", "lowProduction",
]


def _unit_label(unit: GeneratedUnit, index: int) -> str:
    return unit.name or f"unit-{index + 1}"


def _access(config: GameConfig, mode: Mode, p1_seat: int) -> Tuple[Optional[frozenset], Optional[frozenset]]:
    blocked = frozenset({config.generated_type})
    access: List[Optional[frozenset]] = [None, None]
    if mode is Mode.BASELINE:
        access = [config.without_types(0, blocked), config.without_types(1, blocked)]
    elif mode is Mode.EXCLUSIVE:
        access[1 - p1_seat] = config.without_types(1 - p1_seat, blocked)
    return access[0], access[1]


def run_matchup(
    units: Sequence[GeneratedUnit],
    spec: MatchupSpec,
    *,
    game_config: Optional[GameConfig] = None,
    rule: Optional[ProduceTimeRule] = None,
    agent_overrides: Optional[Mapping[str, Mapping[str, Any]]] = None,
    agents: Optional[Tuple[AgentFactory, AgentFactory]] = None,
    decision_budget: Optional[float] = None,
    jobs: int = 1,
    event_dir: Optional[Path] = None,
    attempt: int = 0,
) -> List[CellResult]:
    """Play spec.games_per_unit games per unit; one CellResult per unit, in input order.

    `agents` replaces the (player 1, player 2) MCTS agents built from the skills.
    """
    if not units:
        raise UsageError("run_matchup needs at least one unit")
    overrides = agent_overrides or {}
    if agents is None:
        agents = (
            mcts_factory(agent_config_for(spec.p1_skill, overrides)),
            mcts_factory(agent_config_for(spec.p2_skill, overrides)),
        )

    games = spec.games_per_unit
    cells: List[CellResult] = []
    for unit_index, unit in enumerate(units):
        config = unit_game_config(unit, game_config, rule)
        type_name = config.generated_type
        tasks: List[GameTask] = []
        p1_seats: List[int] = []
        for game_index in range(games):
            seat = game_index % 2 if spec.alternate_corners else 0
            seats = agents if seat == 0 else (agents[1], agents[0])
            tasks.append(GameTask(
                index=game_index,
                config=config.with_access(*_access(config, spec.mode, seat)),
                seats=seats,
                seed=spec.seed_base + unit_index * games + game_index,
                decision_budget=decision_budget,
                record_events=event_dir is not None,
            ))
            p1_seats.append(seat)

        label = _unit_label(unit, unit_index)
        cell = CellResult(label, genome_key(unit), spec.p1_skill, spec.p2_skill, spec.mode, attempt=attempt)
        for task, seat, result in zip(tasks, p1_seats, play_games(tasks, jobs)):
            _tally(cell, result, seat, type_name)
            if event_dir is not None:
                suffix = f"-redo{attempt}" if attempt else ""
                path = Path(event_dir) / spec.label / spec.mode.value / f"{label}-game{task.index:03d}{suffix}.jsonl"
                path.parent.mkdir(parents=True, exist_ok=True)
                write_event_log(result, path)
        cells.append(cell)
        logger.debug(
            "%s %s %s: P1 %s/%s wins, made in %s games",
            spec.label, spec.mode.value, label, cell.p1_wins, cell.games, cell.made_games,
        )
    return cells


def _tally(cell: CellResult, result: GameResult, p1_seat: int, type_name: str) -> None:
    cell.games += 1
    winner = result.outcome.winner
    if winner is None:
        cell.draws += 1
    elif winner == p1_seat:
        cell.p1_wins += 1
    else:
        cell.p2_wins += 1
    p1_made = result.made_by(p1_seat, type_name)
    p2_made = result.made_by(1 - p1_seat, type_name)
    cell.p1_made += p1_made
    cell.p2_made += p2_made
    if p1_made and winner == p1_seat:
        cell.p1_made_wins += 1
    if p1_made or p2_made:
        cell.made_games += 1
        cell.alive_ticks_total += result.stats_for(ANY_PLAYER, type_name).alive_interval_union


def agent_config_for(skill: str, overrides: Mapping[str, Mapping[str, Any]]) -> AgentConfig:
    """Preset for `skill` with the study's "all" then per-skill overrides applied."""
    config = skill_preset(skill)
    config = config.with_overrides(overrides.get("all"))
    return config.with_overrides(overrides.get(skill.lower()))


# ============================================================================
# Studies
# ============================================================================

@dataclass(frozen=True)
class StudyConfig:
    games_per_unit: int = 100
    seed_base: int = 0
    redo: RedoRule = field(default_factory=RedoRule)
    modes: Tuple[Mode, ...] = (Mode.EXCLUSIVE, Mode.SHARED)
    # {"all": {...}, "strong": {...}, ...}: AgentConfig overrides in camelCase.
    agent_overrides: Mapping[str, Mapping[str, Any]] = field(default_factory=dict)
    # GameConfig overrides in camelCase, applied to the base config.
    engine_overrides: Mapping[str, Any] = field(default_factory=dict)
    game_config_path: Optional[str] = None
    rule: ProduceTimeRule = field(default_factory=ProduceTimeRule)
    alternate_corners: bool = False
    decision_budget: Optional[float] = None
    jobs: int = 1
    record_events: bool = False

    def __post_init__(self) -> None:
        if self.games_per_unit < 1:
            raise ConfigError("gamesPerUnit must be >= 1")
        object.__setattr__(self, "modes", tuple(Mode(m) for m in self.modes))

    def game_config(self) -> GameConfig:
        base = load_game_config(Path(self.game_config_path)) if self.game_config_path else default_game_config()
        return apply_overrides(base, self.engine_overrides)

    @classmethod
    def from_dict(cls, doc: Mapping[str, Any]) -> "StudyConfig":
        known = {
            "gamesPerUnit", "seedBase", "redoThreshold", "modes", "agents", "engine", "gameConfig",
            "produceTime", "alternateCorners", "decisionBudget", "jobs", "recordEvents",
        }
        unknown = set(doc) - known
        if unknown:
            raise ConfigError(f"study config: unknown keys {sorted(unknown)}")
        kwargs: Dict[str, Any] = {}
        if "gamesPerUnit" in doc:
            kwargs["games_per_unit"] = int(doc["gamesPerUnit"])
        if "seedBase" in doc:
            kwargs["seed_base"] = int(doc["seedBase"])
        if "redoThreshold" in doc:
            kwargs["redo"] = RedoRule(float(doc["redoThreshold"]))
        if "modes" in doc:
            try:
                kwargs["modes"] = tuple(Mode(m) for m in doc["modes"])
            except ValueError as exc:
                raise ConfigError(f"study config: {exc}") from exc
        if "agents" in doc:
            kwargs["agent_overrides"] = {str(k).lower(): dict(v) for k, v in doc["agents"].items()}
        if "engine" in doc:
            kwargs["engine_overrides"] = dict(doc["engine"])
        if "gameConfig" in doc:
            kwargs["game_config_path"] = doc["gameConfig"]
        if "produceTime" in doc:
            produce = doc["produceTime"]
            kwargs["rule"] = ProduceTimeRule(
                base=int(produce.get("base", 60)),
                per_cost=int(produce.get("perCost", 20)),
                producer=produce.get("producer", "Barracks"),
            )
        for key, attr in (("alternateCorners", "alternate_corners"), ("recordEvents", "record_events")):
            if key in doc:
                kwargs[attr] = bool(doc[key])
        if doc.get("decisionBudget") is not None:
            kwargs["decision_budget"] = float(doc["decisionBudget"])
        if "jobs" in doc:
            kwargs["jobs"] = max(1, int(doc["jobs"]))
        return cls(**kwargs)


def load_study_config(path: Path) -> StudyConfig:
    try:
        with open(path, "r", encoding="utf-8") as f:
            doc = json.load(f)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read study config {path}: {exc}") from exc
    return StudyConfig.from_dict(doc)


@dataclass(frozen=True)
class RedoEntry:
    p1_skill: str
    p2_skill: str
    mode: Mode
    attempt: int
    average_made: float
    threshold: float
    fired: bool

    def to_dict(self) -> Dict[str, Any]:
        return {
            "matchup": f"{self.p1_skill}-vs-{self.p2_skill}",
            "mode": self.mode.value,
            "attempt": self.attempt,
            "averageMade": self.average_made,
            "threshold": self.threshold,
            "fired": self.fired,
        }


@dataclass
class StudyReport:
    skills: List[str]
    modes: List[Mode]
    games_per_unit: int
    unit_names: List[str]
    cells: List[CellResult] = field(default_factory=list)
    redo_log: List[RedoEntry] = field(default_factory=list)
    # (p1 skill, p2 skill, mode) of matchup-rounds still too rare after a redo
    low_production: List[Tuple[str, str, Mode]] = field(default_factory=list)

    def cells_for(self, p1_skill: str, p2_skill: str, mode: Mode) -> List[CellResult]:
        return [c for c in self.cells if (c.p1_skill, c.p2_skill, c.mode) == (p1_skill, p2_skill, Mode(mode))]

    def aggregate(self, p1_skill: str, p2_skill: str, mode: Mode) -> Tuple[float, float]:
        """Mean and population standard deviation of player 1's win rate across units."""
        rates = [c.win_rate for c in self.cells_for(p1_skill, p2_skill, mode)]
        if not rates:
            return (0.0, 0.0)
        values = np.asarray(rates, dtype=float)
        return (float(values.mean()), float(values.std(ddof=0)))

    def is_low_production(self, p1_skill: str, p2_skill: str, mode: Mode) -> bool:
        return (p1_skill, p2_skill, Mode(mode)) in self.low_production

    def utility(self, p1_skill: str, p2_skill: str) -> Dict[str, float]:
        """Per unit: exclusive-mode win rate minus baseline win rate (needs both modes)."""
        baseline = {c.unit_name: c.win_rate for c in self.cells_for(p1_skill, p2_skill, Mode.BASELINE)}
        return {
            c.unit_name: c.win_rate - baseline[c.unit_name]
            for c in self.cells_for(p1_skill, p2_skill, Mode.EXCLUSIVE)
            if c.unit_name in baseline
        }

    def matrices(self) -> Dict[str, Any]:
        doc: Dict[str, Any] = {
            "rows": "player 1 skill",
            "columns": "player 2 skill",
            "skills": list(self.skills),
            "gamesPerUnit": self.games_per_unit,
            "units": list(self.unit_names),
            "modes": {},
        }
        for mode in self.modes:
            means, stds = [], []
            for p1 in self.skills:
                row_mean, row_std = [], []
                for p2 in self.skills:
                    mean, std = self.aggregate(p1, p2, mode)
                    row_mean.append(mean)
                    row_std.append(std)
                means.append(row_mean)
                stds.append(row_std)
            doc["modes"][mode.value] = {"mean": means, "std": stds}
        doc["lowProduction"] = [
            {"matchup": f"{p1}-vs-{p2}", "mode": mode.value} for p1, p2, mode in self.low_production
        ]
        doc["redoLog"] = [entry.to_dict() for entry in self.redo_log]
        return doc


def _average_made(cells: Sequence[CellResult]) -> float:
    return float(np.mean([c.made_games for c in cells])) if cells else 0.0


def run_study(
    units: Sequence[GeneratedUnit],
    skills: Sequence[str] = SKILL_LEVELS,
    cfg: Optional[StudyConfig] = None,
    *,
    agent_builder=None,
    event_dir: Optional[Path] = None,
) -> StudyReport:
    """Every ordered skill pair x every mode, with the redo rule applied per matchup-round.

    `agent_builder(p1_skill, p2_skill)` may supply the (player 1, player 2)
    factories instead of the MCTS presets.
    """
    if not units:
        raise UsageError("run_study needs at least one unit")
    if not skills:
        raise UsageError("run_study needs at least one skill level")
    cfg = cfg or StudyConfig()
    game_config = cfg.game_config()
    games = cfg.games_per_unit
    stride = len(units) * games

    report = StudyReport(
        skills=list(skills),
        modes=list(cfg.modes),
        games_per_unit=games,
        unit_names=[_unit_label(u, i) for i, u in enumerate(units)],
    )
    round_index = 0
    for p1 in skills:
        for p2 in skills:
            for mode in cfg.modes:
                agents = agent_builder(p1, p2) if agent_builder is not None else None

                def play(attempt: int) -> List[CellResult]:
                    spec = MatchupSpec(
                        p1, p2, mode, games,
                        seed_base=cfg.seed_base + (2 * round_index + attempt) * stride,
                        alternate_corners=cfg.alternate_corners,
                    )
                    return run_matchup(
                        units, spec,
                        game_config=game_config,
                        rule=cfg.rule,
                        agent_overrides=cfg.agent_overrides,
                        agents=agents,
                        decision_budget=cfg.decision_budget,
                        jobs=cfg.jobs,
                        event_dir=event_dir,
                        attempt=attempt,
                    )

                cells = play(0)
                # Nothing can be built in baseline mode, so the redo rule does not apply.
                if mode is not Mode.BASELINE:
                    cells = _apply_redo(report, cfg.redo, p1, p2, mode, cells, play)
                report.cells.extend(cells)
                round_index += 1
    return report


def _apply_redo(report: StudyReport, rule: RedoRule, p1: str, p2: str, mode: Mode, cells, play) -> List[CellResult]:
    average = _average_made(cells)
    fired = rule.fires(average)
    report.redo_log.append(RedoEntry(p1, p2, mode, 0, average, rule.threshold, fired))
    if not fired:
        return cells
    logger.warning(
        "%s-vs-%s %s: unit made in %.2f games on average (< %s); replaying with fresh seeds",
        p1, p2, mode.value, average, rule.threshold,
    )
    cells = play(1)
    average = _average_made(cells)
    still_low = rule.fires(average)
    report.redo_log.append(RedoEntry(p1, p2, mode, 1, average, rule.threshold, still_low))
    if still_low:
        logger.warning("%s-vs-%s %s: still %.2f after the replay; flagged low-production", p1, p2, mode.value, average)
        report.low_production.append((p1, p2, mode))
    return cells


def emit_report(report: StudyReport, out_dir: Path, formats: Sequence[str] = ("csv", "json")) -> List[Path]:
    """Write cells.csv (long form) and/or matrix.json under `out_dir`; returns the paths."""
    if not report.cells:
        raise UsageError("report has no cells")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written: List[Path] = []
    for fmt in formats:
        if fmt == "csv":
            path = out_dir / "cells.csv"
            with open(path, "w", encoding="utf-8", newline="") as f:
                writer = csv.DictWriter(f, fieldnames=CSV_FIELDS)
                writer.writeheader()
                for cell in report.cells:
                    row = cell.to_row()
                    row["lowProduction"] = report.is_low_production(cell.p1_skill, cell.p2_skill, cell.mode)
                    writer.writerow(row)
        elif fmt == "json":
            path = out_dir / "matrix.json"
            with open(path, "w", encoding="utf-8") as f:
                json.dump(report.matrices(), f, indent=2)
                f.write("\n")
        else:
            raise UsageError(f"unknown report format {fmt!r}")
        written.append(path)
    return written
