import json

import pytest

from evaluator import FitnessReport, RoundOneMetrics, RoundTwoMetrics
from lab_store import LabStore, get_default_store
from searchgen import SearchTrace, genome_key


@pytest.fixture
def store(tmp_path):
    return LabStore(str(tmp_path / "lab.json"))


@pytest.fixture
def revenger(fixture_units):
    return next(u for u in fixture_units if u.name == "Revenger")


def test_new_store_has_empty_collections(store):
    with open(store.db_path, encoding="utf-8") as f:
        assert json.load(f) == {"units": [], "reports": [], "traces": [], "studies": []}


def test_add_replaces_by_key(store):
    store.add_record("studies", {"key": "a", "value": 1})
    store.add_record("studies", {"key": "a", "value": 2})
    store.add_record("studies", {"key": "b", "value": 3})
    records = store.list_records("studies")
    assert [r["value"] for r in records] == [2, 3]
    assert "created_at" in records[0]
    assert store.get_record("studies", "a")["value"] == 2
    assert store.get_record("studies", "zzz") is None


def test_delete_and_clear(store):
    store.add_record("units", {"key": "x"})
    assert store.delete_record("units", "x")
    assert not store.delete_record("units", "x")
    store.add_record("units", {"key": "y"})
    store.clear_all()
    assert store.list_records("units") == []


def test_bad_collection_and_key(store):
    with pytest.raises(KeyError):
        store.list_records("weapons")
    with pytest.raises(ValueError):
        store.add_record("units", {"value": 1})


def test_corrupt_file_reads_as_empty(store):
    store.db_path.write_text("{not json")
    assert store.list_records("reports") == []


def test_typed_helpers(store, revenger):
    store.add_unit(revenger, source="fixtures/revenger.json")
    [unit] = store.list_records("units")
    assert unit["key"] == genome_key(revenger)
    assert unit["unit"]["name"] == "Revenger"

    report = FitnessReport(revenger, 1.2, 0.75, RoundOneMetrics(), RoundTwoMetrics())
    stored = store.add_report(report)
    assert stored["total"] == pytest.approx(1.95)

    trace = SearchTrace(seed=4, terminal_unit=revenger)
    assert store.add_trace(trace)["key"] == f"seed4:{genome_key(revenger)}"
    assert store.add_trace(SearchTrace(seed=5))["key"] == "seed5:none"


def test_default_store_follows_data_dir(tmp_path):
    store = get_default_store()
    assert store.db_path == tmp_path / "data" / "lab.json"
    assert get_default_store() is store
