"""
settings.py

Environment-driven settings. The project-level .env is loaded once (if it
exists) so the CLI, the lab server and the tests see the same values
regardless of the working directory.
"""

import logging
import os
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

from dotenv import load_dotenv

PROJECT_ROOT = Path(__file__).resolve().parent.parent
BACKEND_DIR = PROJECT_ROOT / "backend"
FIXTURES_DIR = PROJECT_ROOT / "fixtures"
DEFAULT_CONFIG_PATH = BACKEND_DIR / "data" / "default_config.json"

LOG_FORMAT = "%(asctime)s %(levelname)s %(name)s: %(message)s"


def _load_env() -> None:
    """Ensure the project-level .env file is loaded regardless of cwd."""
    env_path = PROJECT_ROOT / ".env"
    # Only attempt to load if the file exists; this keeps CI runs happy.
    if env_path.exists():
        load_dotenv(dotenv_path=env_path, override=False)
    else:
        load_dotenv(override=False)


def _optional_float(name: str) -> Optional[float]:
    raw = os.getenv(name)
    if raw is None or not raw.strip():
        return None
    return float(raw)


@dataclass(frozen=True)
class Settings:
    data_dir: Path
    game_config_path: Path
    jobs: int
    decision_budget: Optional[float]
    log_level: str
    lab_port: int
    flask_debug: bool
    run_slow: bool


def get_settings() -> Settings:
    """Read settings from the environment (after loading .env)."""
    _load_env()
    data_dir = Path(os.getenv("UNITFORGE_DATA_DIR") or BACKEND_DIR / "data")
    return Settings(
        data_dir=data_dir,
        game_config_path=Path(os.getenv("UNITFORGE_GAME_CONFIG") or DEFAULT_CONFIG_PATH),
        jobs=max(1, int(os.getenv("UNITFORGE_JOBS", "1"))),
        decision_budget=_optional_float("UNITFORGE_DECISION_BUDGET"),
        log_level=os.getenv("UNITFORGE_LOG_LEVEL", "INFO").upper(),
        lab_port=int(os.getenv("LAB_PORT", "5060")),
        flask_debug=os.getenv("FLASK_DEBUG", "false").lower() == "true",
        run_slow=os.getenv("UNITFORGE_RUN_SLOW", "").lower() in {"1", "true", "yes"},
    )


def configure_logging(level: Optional[str] = None) -> None:
    """Configure the root logger once for entry points."""
    logging.basicConfig(level=level or get_settings().log_level, format=LOG_FORMAT)
