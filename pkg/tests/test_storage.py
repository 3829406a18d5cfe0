"""Tests for result files and snapshots."""

import tempfile
from pathlib import Path

import pytest

from femto_handover.errors import ConfigurationError
from femto_handover.storage import (
    DecisionLog,
    format_csv,
    load_topology,
    read_csv,
    save_topology,
    write_csv,
)
from femto_handover.topology import FapDescriptor, MacroCell, Topology, Wall


class TestCsv:
    """Test CSV rendering."""

    def test_format(self):
        text = format_csv(["a", "b", "c"], [{"a": 1, "b": 0.1, "c": None}, {"a": True, "b": "x"}])
        assert text.splitlines() == ["a,b,c", "1,0.1,", "1,x,"]

    def test_extra_keys_ignored(self):
        assert format_csv(["a"], [{"a": 2, "z": 9}]) == "a\n2\n"

    def test_write_and_read(self):
        """Files are created with their parent directories."""
        with tempfile.TemporaryDirectory() as tmpdir:
            path = write_csv(Path(tmpdir) / "out" / "rows.csv", ["n", "p"], [{"n": 100, "p": 0.25}])
            rows = read_csv(path)
        assert rows == [{"n": "100", "p": "0.25"}]


class TestDecisionLog:
    """Test DecisionLog."""

    def test_rows(self):
        with tempfile.TemporaryDirectory() as tmpdir:
            path = Path(tmpdir) / "decisions.csv"
            with DecisionLog(path) as log:
                log.record(1.5, 7, "new", "admit_femto", 0.0, 0)
                log.record(2.25, 8, "macro_to_macro", "admit_macro", 64.0, 2)
                assert log.rows == 2
            rows = read_csv(path)
        assert list(rows[0]) == DecisionLog.HEADER
        assert rows[1]["granted"] == "64"
        assert rows[1]["degraded_count"] == "2"
        assert rows[0]["time"] == "1.500000"

    def test_close_twice(self):
        with tempfile.TemporaryDirectory() as tmpdir:
            log = DecisionLog(Path(tmpdir) / "d.csv")
            log.close()
            log.close()


class TestTopologySnapshot:
    """Test topology save/load."""

    def topology(self) -> Topology:
        faps = (
            FapDescriptor(fap_id=0, position=(1.0, 2.0), frequency_channel=1),
            FapDescriptor(fap_id=1, position=(30.0, -4.0)),
        )
        walls = (Wall((10.0, 0.0), (10.0, 5.0), 12.0),)
        return Topology(macro_bs=MacroCell(), faps=faps, walls=walls)

    def test_round_trip(self):
        with tempfile.TemporaryDirectory() as tmpdir:
            path = save_topology(self.topology(), Path(tmpdir) / "topo.json")
            assert load_topology(path) == self.topology()

    def test_missing_file(self):
        with pytest.raises(ConfigurationError):
            load_topology("/nonexistent/topo.json")

    def test_not_json(self):
        with tempfile.TemporaryDirectory() as tmpdir:
            path = Path(tmpdir) / "topo.json"
            path.write_text("{not json", encoding="utf-8")
            with pytest.raises(ConfigurationError):
                load_topology(path)
