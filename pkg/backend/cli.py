"""
cli.py

Command-line entry point:

    python backend/cli.py generate --seed 3 --games-per-round 10 --out units/u3.json
    python backend/cli.py evaluate --unit fixtures/phoenix.json --seed 7
    python backend/cli.py matchup --unit fixtures/revenger.json --p1 strong --p2 weak --mode shared
    python backend/cli.py study --units-dir fixtures --out-dir out --games 4
    python backend/cli.py simulate --p1 weak --p2 rush --seed 1 --out game.jsonl
    python backend/cli.py validate fixtures/revenger.json
    python backend/cli.py describe fixtures/chopper.json
    python backend/cli.py serve --port 5060
"""

import argparse
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path
from typing import Any, Dict, Optional, Sequence, Tuple

from agents import SKILL_LEVELS, build_agent
from balancelab import MatchupSpec, Mode, RedoRule, StudyConfig, agent_config_for, emit_report, run_matchup, run_study
from engine import run_game, write_event_log
from errors import UnitForgeError, UsageError
from evaluator import EvaluationConfig, evaluate_unit, unit_game_config
from lab_store import get_default_store
from searchgen import generate_units
from settings import configure_logging, get_settings
from unitspace import SearchBounds, describe_unit, load_fixture_units, load_unit, save_unit

logger = logging.getLogger(__name__)

BANNER = "=" * 70


def _load_config_doc(path: Optional[str]) -> Dict[str, Any]:
    if not path:
        return {}
    try:
        with open(path, "r", encoding="utf-8") as f:
            return json.load(f)
    except (OSError, json.JSONDecodeError) as exc:
        raise UsageError(f"cannot read config {path}: {exc}") from exc


def _study_config(args: argparse.Namespace) -> Tuple[StudyConfig, Dict[str, Any]]:
    doc = _load_config_doc(args.config)
    cfg = StudyConfig.from_dict(doc)
    settings = get_settings()
    changes: Dict[str, Any] = {}
    if args.jobs is not None:
        changes["jobs"] = max(1, args.jobs)
    elif "jobs" not in doc:
        changes["jobs"] = settings.jobs
    if cfg.decision_budget is None and settings.decision_budget is not None:
        changes["decision_budget"] = settings.decision_budget
    if "gameConfig" not in doc:
        changes["game_config_path"] = str(settings.game_config_path)
    return replace(cfg, **changes), doc


def _evaluation_config(args: argparse.Namespace, skill: str, seed: int, games: Optional[int]) -> EvaluationConfig:
    cfg, _ = _study_config(args)
    return EvaluationConfig(
        games_per_round=games or 10,
        agent=agent_config_for(skill, cfg.agent_overrides),
        seed_base=seed,
        game_config=cfg.game_config(),
        rule=cfg.rule,
        decision_budget=cfg.decision_budget,
        jobs=cfg.jobs,
    )


# ============================================================================
# Subcommands
# ============================================================================

def cmd_generate(args: argparse.Namespace) -> int:
    eval_cfg = _evaluation_config(args, args.skill, args.seed, args.games_per_round)
    bounds = SearchBounds()
    results = generate_units(args.count, bounds, eval_cfg, args.seed, max_iterations=args.max_iterations)
    out = Path(args.out)
    store = None if args.no_store else get_default_store()

    print(BANNER)
    for index, (unit, trace) in enumerate(results):
        path = out if args.count == 1 else out.with_name(f"{out.stem}-{index + 1}{out.suffix}")
        save_unit(unit, path)
        trace.save(path.with_suffix(".trace.json"))
        if store is not None:
            store.add_unit(unit, source=str(path))
            store.add_trace(trace)
        status = f"error: {trace.error}" if trace.error else f"{len(trace.iterations)} iterations"
        print(f"Seed {trace.seed}: fitness {unit.fitness} ({status}) -> {path}")
        print(f"  {describe_unit(unit)}")
    print(BANNER)
    return 1 if any(trace.error for _, trace in results) else 0


def cmd_evaluate(args: argparse.Namespace) -> int:
    unit = load_unit(Path(args.unit))
    eval_cfg = _evaluation_config(args, args.skill, args.seed, args.games_per_round)
    report = evaluate_unit(unit, eval_cfg)
    out = Path(args.out) if args.out else Path(args.unit).with_suffix(".report.json")
    report.save(out)
    if not args.no_store:
        get_default_store().add_report(report)

    print(BANNER)
    print(describe_unit(unit))
    print(f"f1 (utility) = {report.f1:.4f}{'  [low confidence]' if report.low_confidence_f1 else ''}")
    print(f"f2 (balance) = {report.f2:.4f}{'  [low confidence]' if report.low_confidence_f2 else ''}")
    print(f"fitness      = {report.total:.4f}")
    print(f"Report written to {out}")
    print(BANNER)
    return 0


def cmd_matchup(args: argparse.Namespace) -> int:
    cfg, _ = _study_config(args)
    unit = load_unit(Path(args.unit))
    spec = MatchupSpec(
        args.p1, args.p2, Mode(args.mode), args.games,
        seed_base=args.seed, alternate_corners=cfg.alternate_corners,
    )
    (cell,) = run_matchup(
        [unit], spec,
        game_config=cfg.game_config(),
        rule=cfg.rule,
        agent_overrides=cfg.agent_overrides,
        decision_budget=cfg.decision_budget,
        jobs=cfg.jobs,
    )
    low, high = cell.decisive_interval
    print(BANNER)
    print(f"{spec.label} ({spec.mode.value}), {cell.unit_name}: {cell.games} games")
    print(f"P1 wins {cell.p1_wins}, P2 wins {cell.p2_wins}, draws {cell.draws}")
    print(f"P1 win rate {cell.win_rate:.3f} (decisive-game 95% CI {low:.3f}-{high:.3f})")
    print(f"Unit made by P1 in {cell.p1_made} games, by P2 in {cell.p2_made}; avg alive {cell.avg_alive_ticks:.1f} ticks")
    print(BANNER)
    return 0


def cmd_study(args: argparse.Namespace) -> int:
    cfg, doc = _study_config(args)
    changes: Dict[str, Any] = {}
    if args.games is not None:
        changes["games_per_unit"] = args.games
    if args.seed is not None:
        changes["seed_base"] = args.seed
    if args.modes:
        changes["modes"] = tuple(Mode(m) for m in args.modes)
    if args.events:
        changes["record_events"] = True
    cfg = replace(cfg, **changes)
    if args.redo_threshold is not None:
        cfg = replace(cfg, redo=RedoRule(args.redo_threshold))
    elif "redoThreshold" not in doc:
        # 25 of every 100 games, scaled to the games actually played.
        cfg = replace(cfg, redo=RedoRule(25.0 * cfg.games_per_unit / 100))

    units = load_fixture_units(Path(args.units_dir))
    if not units:
        raise UsageError(f"no unit files in {args.units_dir}")
    out_dir = Path(args.out_dir)
    event_dir = out_dir / "events" if cfg.record_events else None

    report = run_study(units, args.skills or list(SKILL_LEVELS), cfg, event_dir=event_dir)
    paths = emit_report(report, out_dir)

    summary = {
        "outDir": str(out_dir),
        "units": report.unit_names,
        "gamesPerUnit": report.games_per_unit,
        "matrix": report.matrices(),
    }
    if not args.no_store:
        get_default_store().add_study(str(out_dir.resolve()), summary)

    print(BANNER)
    print(f"Study over {len(units)} units, {len(report.skills)} skills, modes {[m.value for m in report.modes]}")
    for mode in report.modes:
        print(f"\n{mode.value} (rows: player 1, columns: player 2)")
        for p1 in report.skills:
            cells = []
            for p2 in report.skills:
                mean, std = report.aggregate(p1, p2, mode)
                cells.append(f"{mean:.2f}+/-{std:.2f}")
            print(f"  {p1:>7}: " + "  ".join(cells))
    if report.low_production:
        print(f"\nLow-production matchup-rounds: {len(report.low_production)}")
    for path in paths:
        print(f"Wrote {path}")
    print(BANNER)
    return 0


def cmd_simulate(args: argparse.Namespace) -> int:
    cfg, _ = _study_config(args)
    config = cfg.game_config()
    if args.unit:
        config = unit_game_config(load_unit(Path(args.unit)), config, cfg.rule)
    shared = cfg.agent_overrides.get("all", {})
    agent0 = build_agent(args.p1, {**shared, **cfg.agent_overrides.get(args.p1.lower(), {})}, seed=args.seed)
    agent1 = build_agent(args.p2, {**shared, **cfg.agent_overrides.get(args.p2.lower(), {})}, seed=args.seed)
    result = run_game(config, agent0, agent1, seed=args.seed, decision_budget=cfg.decision_budget)
    if args.out:
        write_event_log(result, Path(args.out))

    winner = "draw" if result.outcome.winner is None else f"player {result.outcome.winner + 1}"
    print(BANNER)
    print(f"{args.p1} vs {args.p2}, seed {args.seed}: {winner} at tick {result.end_tick} ({result.outcome.reason})")
    if config.generated_type:
        stats = result.per_type_stats.get(config.generated_type)
        made = stats.times_produced if stats else 0
        alive = stats.alive_interval_union if stats else 0
        print(f"{config.generated_type}: made {made} times, alive {alive} ticks")
    print(f"Event log digest {result.event_digest()}")
    if args.out:
        print(f"Event log written to {args.out}")
    print(BANNER)
    return 0


def cmd_validate(args: argparse.Namespace) -> int:
    failures = 0
    for path in args.paths:
        try:
            unit = load_unit(Path(path))
        except (UnitForgeError, OSError) as exc:
            failures += 1
            print(f"{path}: INVALID ({exc})", file=sys.stderr)
            continue
        print(f"{path}: ok ({unit.name or 'unnamed'})")
    return 1 if failures else 0


def cmd_describe(args: argparse.Namespace) -> int:
    print(describe_unit(load_unit(Path(args.path))))
    return 0


def cmd_serve(args: argparse.Namespace) -> int:
    from lab_server import main as serve

    serve(port=args.port)
    return 0


# ============================================================================
# Argument parsing
# ============================================================================

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="unitforge", description="Generate and evaluate balanced RTS units.")
    parser.add_argument("--config", help="study config JSON (agent presets, engine overrides, thresholds)")
    parser.add_argument("--jobs", type=int, help="parallel game workers")
    parser.add_argument("--log-level", help="logging level (default from UNITFORGE_LOG_LEVEL)")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="hill-climb new units")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--games-per-round", type=int, default=10)
    p.add_argument("--max-iterations", type=int)
    p.add_argument("--count", type=int, default=1)
    p.add_argument("--skill", choices=SKILL_LEVELS, default="medium")
    p.add_argument("--out", required=True)
    p.add_argument("--no-store", action="store_true")
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("evaluate", help="fitness of a unit file")
    p.add_argument("--unit", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--games-per-round", type=int, default=10)
    p.add_argument("--skill", choices=SKILL_LEVELS, default="medium")
    p.add_argument("--out")
    p.add_argument("--no-store", action="store_true")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("matchup", help="one skill matchup for one unit")
    p.add_argument("--unit", required=True)
    p.add_argument("--p1", choices=SKILL_LEVELS, default="strong")
    p.add_argument("--p2", choices=SKILL_LEVELS, default="strong")
    p.add_argument("--mode", choices=[m.value for m in Mode], default=Mode.SHARED.value)
    p.add_argument("--games", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_matchup)

    p = sub.add_parser("study", help="full skill x mode study over a directory of units")
    p.add_argument("--units-dir", required=True)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--games", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--redo-threshold", type=float)
    p.add_argument("--skills", nargs="+", choices=SKILL_LEVELS)
    p.add_argument("--modes", nargs="+", choices=[m.value for m in Mode])
    p.add_argument("--events", action="store_true",
                   help="also write one JSONL event log per game under <out-dir>/events (off by default)")
    p.add_argument("--no-store", action="store_true")
    p.set_defaults(func=cmd_study)

    p = sub.add_parser("simulate", help="play one game and dump its event log")
    p.add_argument("--unit")
    p.add_argument("--p1", default="weak", help="skill level or idle/random/rush")
    p.add_argument("--p2", default="weak", help="skill level or idle/random/rush")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("validate", help="lint unit files")
    p.add_argument("paths", nargs="+")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("describe", help="one-line summary of a unit file")
    p.add_argument("path")
    p.set_defaults(func=cmd_describe)

    p = sub.add_parser("serve", help="start the read-only lab API")
    p.add_argument("--port", type=int)
    p.set_defaults(func=cmd_serve)
    return parser


def cli_main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)

    configure_logging(args.log_level)
    try:
        return args.func(args)
    except (UnitForgeError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(cli_main())
