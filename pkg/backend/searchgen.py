"""
searchgen.py

Greedy hill climbing over the unit genome. Every neighbour of the current
unit is evaluated; the best one replaces the current unit only if its
fitness is strictly higher, otherwise the current unit is a local maximum
and is returned. Fitness is evaluated once per genome and cached.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Tuple

from evaluator import EvaluationConfig, evaluate_unit
from unitspace import STAT_KEYS, STATS, GeneratedUnit, SearchBounds, neighbors, random_unit, unit_to_dict

logger = logging.getLogger(__name__)

# Maps a unit to its fitness; the default runs both evaluation rounds.
FitnessFn = Callable[[GeneratedUnit], float]


def genome_key(unit: GeneratedUnit) -> str:
    """Canonical text key of the searched genes; name and fitness are ignored."""
    parts = [f"{STAT_KEYS[stat]}={getattr(unit, stat)}" for stat in STATS]
    parts.append(f"cause={int(unit.cause)}")
    parts.append(f"effect={int(unit.effect)}")
    return ",".join(parts)


@dataclass
class SearchIteration:
    current: GeneratedUnit
    current_fitness: float
    evaluated: List[Tuple[GeneratedUnit, float]] = field(default_factory=list)
    chosen: Optional[GeneratedUnit] = None

    @property
    def neighbor_count(self) -> int:
        return len(self.evaluated)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "currentUnit": unit_to_dict(self.current),
            "currentFitness": self.current_fitness,
            "neighborCount": self.neighbor_count,
            "evaluatedNeighbors": [
                {"unit": unit_to_dict(unit), "fitness": fitness} for unit, fitness in self.evaluated
            ],
            "chosenNeighbor": unit_to_dict(self.chosen) if self.chosen is not None else None,
        }


@dataclass
class SearchTrace:
    """Per-iteration record of one climb. The last entry never has a chosen
    neighbour; when the iteration cap stops the climb it is an extra entry with
    no evaluated neighbours."""

    seed: int
    iterations: List[SearchIteration] = field(default_factory=list)
    terminal_unit: Optional[GeneratedUnit] = None
    total_games_simulated: int = 0
    evaluations: int = 0
    cache_hits: int = 0
    hit_iteration_cap: bool = False
    error: Optional[str] = None

    @property
    def accepted_fitness(self) -> List[float]:
        """Fitness of the current unit at the start of every iteration."""
        return [it.current_fitness for it in self.iterations]

    def to_dict(self) -> Dict[str, Any]:
        return {
            "seed": self.seed,
            "iterations": [it.to_dict() for it in self.iterations],
            "terminalUnit": unit_to_dict(self.terminal_unit) if self.terminal_unit is not None else None,
            "totalGamesSimulated": self.total_games_simulated,
            "evaluations": self.evaluations,
            "cacheHits": self.cache_hits,
            "hitIterationCap": self.hit_iteration_cap,
            "error": self.error,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2) + "\n"

    def save(self, path: Path) -> None:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", encoding="utf-8") as f:
            f.write(self.to_json())


class _Evaluation(Exception):
    """Wraps a failure of the fitness function for one genome."""


def hill_climb(
    bounds: SearchBounds,
    eval_cfg: Optional[EvaluationConfig] = None,
    seed: int = 0,
    *,
    evaluator: Optional[FitnessFn] = None,
    max_iterations: Optional[int] = None,
) -> Tuple[GeneratedUnit, SearchTrace]:
    """Climb from random_unit(bounds, seed) to a local maximum.

    `evaluator` replaces the simulation-based fitness (tests use analytic stubs).
    If it raises, the search stops and the partial trace carries the error.
    """
    eval_cfg = eval_cfg or EvaluationConfig()
    if evaluator is None:
        games_per_evaluation = 2 * eval_cfg.games_per_round

        def evaluator(unit: GeneratedUnit) -> float:
            return evaluate_unit(unit, eval_cfg).total
    else:
        games_per_evaluation = 0

    trace = SearchTrace(seed=seed)
    cache: Dict[str, float] = {}

    def fitness_of(unit: GeneratedUnit) -> float:
        key = genome_key(unit)
        if key in cache:
            trace.cache_hits += 1
            return cache[key]
        try:
            value = float(evaluator(unit))
        except Exception as exc:
            raise _Evaluation(f"evaluating {key}: {exc}") from exc
        cache[key] = value
        trace.evaluations += 1
        trace.total_games_simulated += games_per_evaluation
        return value

    current = random_unit(bounds, seed)
    try:
        current_fitness = fitness_of(current)
        while True:
            if max_iterations is not None and len(trace.iterations) >= max_iterations:
                trace.hit_iteration_cap = True
                # Closing entry: the unit the climb stopped at, neighbours not evaluated.
                trace.iterations.append(SearchIteration(current, current_fitness))
                logger.warning("Hill climb (seed %s) stopped at the iteration cap of %s", seed, max_iterations)
                break
            iteration = SearchIteration(current, current_fitness)
            trace.iterations.append(iteration)
            best: Optional[Tuple[GeneratedUnit, float]] = None
            for candidate in neighbors(current):
                value = fitness_of(candidate)
                iteration.evaluated.append((candidate, value))
                if best is None or value > best[1]:
                    best = (candidate, value)
            if best is None or best[1] <= current_fitness:
                break
            iteration.chosen = best[0]
            current, current_fitness = best
            logger.debug("Seed %s accepted %s at fitness %.4f", seed, genome_key(current), current_fitness)
    except _Evaluation as exc:
        trace.error = str(exc)
        logger.error("Hill climb (seed %s) aborted: %s", seed, exc)
        current_fitness = cache.get(genome_key(current))

    result = current.with_fitness(current_fitness)
    trace.terminal_unit = result
    return result, trace


def generate_units(
    count: int,
    bounds: SearchBounds,
    eval_cfg: Optional[EvaluationConfig] = None,
    seed: int = 0,
    *,
    evaluator: Optional[FitnessFn] = None,
    max_iterations: Optional[int] = None,
) -> List[Tuple[GeneratedUnit, SearchTrace]]:
    """Independent climbs seeded seed, seed + 1, ...; local maxima in seed order."""
    results = []
    for index in range(count):
        unit, trace = hill_climb(
            bounds, eval_cfg, seed + index, evaluator=evaluator, max_iterations=max_iterations,
        )
        results.append((unit, trace))
    return results
