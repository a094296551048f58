"""
errors.py

Exception types shared by the engine, the evaluator and the study harness.
Callers that only care about "something in unitforge went wrong" catch
UnitForgeError; the rest also subclass the matching builtin so plain
ValueError/RuntimeError handlers keep working.
"""

from typing import Optional


class UnitForgeError(Exception):
    """Base class for every error raised on purpose by this project."""


class ConfigError(UnitForgeError, ValueError):
    """A game or study configuration document is invalid."""


class UnitValidationError(UnitForgeError, ValueError):
    """A generated-unit document failed validation."""

    def __init__(self, field: str, message: str):
        self.field = field
        super().__init__(f"{field}: {message}")


class ContractViolation(UnitForgeError, RuntimeError):
    """An operation was called outside its precondition (e.g. on a finished game)."""


class IllegalCommand(UnitForgeError, ValueError):
    """A unit command is not legal in the current state."""

    def __init__(self, unit_id: int, message: str):
        self.unit_id = unit_id
        super().__init__(f"unit {unit_id}: {message}")


class MetricsIntegrityError(UnitForgeError, ValueError):
    """Evaluation counters are inconsistent (alive time above game time, negative counts)."""


class RoundAborted(UnitForgeError, RuntimeError):
    """A game inside an evaluation round or matchup failed."""

    def __init__(self, game_index: int, cause: Optional[BaseException] = None):
        self.game_index = game_index
        self.cause = cause
        detail = f": {cause}" if cause is not None else ""
        super().__init__(f"game {game_index} failed{detail}")


class UsageError(UnitForgeError, ValueError):
    """Degenerate input to a study operation (e.g. an empty unit list)."""
