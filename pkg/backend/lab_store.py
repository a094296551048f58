"""
lab_store.py

A simple JSON file-based store for generated units, fitness reports,
search traces and study summaries. Every record carries a "key"; adding a
record with an existing key replaces it.
"""

import json
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Dict, List, Optional

from evaluator import FitnessReport
from searchgen import SearchTrace, genome_key
from settings import get_settings
from unitspace import GeneratedUnit, unit_to_dict

COLLECTIONS = ("units", "reports", "traces", "studies")


def _now() -> str:
    return datetime.now(timezone.utc).isoformat()


class LabStore:
    """JSON file-based store for lab results."""

    def __init__(self, db_path: str = "data/lab.json"):
        self.db_path = Path(db_path)
        self._ensure_db_exists()

    @staticmethod
    def _empty() -> Dict[str, Any]:
        return {name: [] for name in COLLECTIONS}

    def _ensure_db_exists(self) -> None:
        """Create the store file and directory if they don't exist."""
        self.db_path.parent.mkdir(parents=True, exist_ok=True)
        if not self.db_path.exists():
            self._write_db(self._empty())

    def _read_db(self) -> Dict[str, Any]:
        try:
            with open(self.db_path, "r", encoding="utf-8") as f:
                data = json.load(f)
        except (json.JSONDecodeError, FileNotFoundError):
            return self._empty()
        for name in COLLECTIONS:
            data.setdefault(name, [])
        return data

    def _write_db(self, data: Dict[str, Any]) -> None:
        with open(self.db_path, "w", encoding="utf-8") as f:
            json.dump(data, f, indent=2, ensure_ascii=False)

    @staticmethod
    def _check(collection: str) -> None:
        if collection not in COLLECTIONS:
            raise KeyError(f"unknown collection {collection!r}")

    # Generic record operations
    def add_record(self, collection: str, record: Dict[str, Any]) -> Dict[str, Any]:
        """Add or replace a record by its "key"."""
        self._check(collection)
        if not record.get("key"):
            raise ValueError("record needs a non-empty 'key'")
        data = self._read_db()
        records = [item for item in data[collection] if item.get("key") != record["key"]]
        stored = {"created_at": _now(), **record}
        records.append(stored)
        data[collection] = records
        self._write_db(data)
        return stored

    def get_record(self, collection: str, key: str) -> Optional[Dict[str, Any]]:
        self._check(collection)
        for record in self._read_db()[collection]:
            if record.get("key") == key:
                return record
        return None

    def list_records(self, collection: str) -> List[Dict[str, Any]]:
        self._check(collection)
        return self._read_db()[collection]

    def delete_record(self, collection: str, key: str) -> bool:
        self._check(collection)
        if not key:
            return False
        data = self._read_db()
        records = data[collection]
        remaining = [item for item in records if item.get("key") != key]
        if len(remaining) == len(records):
            return False
        data[collection] = remaining
        self._write_db(data)
        return True

    def clear_all(self) -> None:
        """Clear all data from the store."""
        self._write_db(self._empty())

    # Typed helpers
    def add_unit(self, unit: GeneratedUnit, source: str = "") -> Dict[str, Any]:
        return self.add_record("units", {"key": genome_key(unit), "unit": unit_to_dict(unit), "source": source})

    def add_report(self, report: FitnessReport) -> Dict[str, Any]:
        return self.add_record("reports", {"key": genome_key(report.unit), **report.to_dict()})

    def add_trace(self, trace: SearchTrace) -> Dict[str, Any]:
        terminal = genome_key(trace.terminal_unit) if trace.terminal_unit is not None else "none"
        return self.add_record("traces", {"key": f"seed{trace.seed}:{terminal}", **trace.to_dict()})

    def add_study(self, key: str, summary: Dict[str, Any]) -> Dict[str, Any]:
        return self.add_record("studies", {"key": key, **summary})


# Default store instance
_default_store: Optional[LabStore] = None


def get_default_store() -> LabStore:
    """Get or create the store under the configured data directory."""
    global _default_store
    if _default_store is None:
        _default_store = LabStore(str(get_settings().data_dir / "lab.json"))
    return _default_store
