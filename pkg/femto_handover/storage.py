"""CSV result files, admission decision logs and topology snapshots."""

import csv
import io
import json
from pathlib import Path
from typing import Any, Dict, Iterable, List, Mapping, Optional, Sequence, Union

from femto_handover.errors import ConfigurationError
from femto_handover.topology import Topology

PathLike = Union[str, Path]


def format_csv(header: Sequence[str], rows: Iterable[Mapping[str, Any]]) -> str:
    """
    Render rows as CSV text with a header row.

    Missing keys are written as empty cells; floats keep full precision.
    """
    buffer = io.StringIO()
    writer = csv.DictWriter(buffer, fieldnames=list(header), extrasaction="ignore", lineterminator="\n")
    writer.writeheader()
    for row in rows:
        writer.writerow({key: _cell(row.get(key)) for key in header})
    return buffer.getvalue()


def write_csv(path: PathLike, header: Sequence[str], rows: Iterable[Mapping[str, Any]]) -> Path:
    """Write rows to path (parent directories created)."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(format_csv(header, rows), encoding="utf-8")
    return path


def read_csv(path: PathLike) -> List[Dict[str, str]]:
    with open(path, "r", encoding="utf-8", newline="") as f:
        return list(csv.DictReader(f))


def _cell(value: Any) -> Any:
    if value is None:
        return ""
    if isinstance(value, bool):
        return int(value)
    if isinstance(value, float):
        return repr(value)
    return value


class DecisionLog:
    """Append-only CSV of admission decisions."""

    HEADER = ["time", "session", "event_kind", "outcome", "granted", "degraded_count"]

    def __init__(self, path: PathLike):
        """
        Initialize decision log.

        Args:
            path: CSV file; truncated on open
        """
        self.path = Path(path)
        self.path.parent.mkdir(parents=True, exist_ok=True)
        self._file = open(self.path, "w", encoding="utf-8", newline="")
        self._writer = csv.writer(self._file, lineterminator="\n")
        self._writer.writerow(self.HEADER)
        self.rows = 0

    def __enter__(self):
        return self

    def __exit__(self, exc_type, exc_val, exc_tb):
        self.close()

    def record(self, time: float, session: int, event_kind: str, outcome: str, granted: float, degraded_count: int):
        self._writer.writerow([f"{time:.6f}", session, event_kind, outcome, f"{granted:g}", degraded_count])
        self.rows += 1

    def close(self):
        if not self._file.closed:
            self._file.close()


def save_topology(topology: Topology, path: PathLike) -> Path:
    """Write a topology snapshot as JSON for later replay."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as f:
        json.dump(topology.to_dict(), f, indent=1)
    return path


def load_topology(path: PathLike) -> Topology:
    """
    Read a topology snapshot.

    Raises:
        ConfigurationError: unreadable or malformed file
    """
    try:
        with open(path, "r", encoding="utf-8") as f:
            data = json.load(f)
    except (OSError, json.JSONDecodeError) as e:
        raise ConfigurationError([f"cannot load topology {path}: {e}"]) from e
    try:
        return Topology.from_dict(data)
    except (KeyError, TypeError, ValueError) as e:
        raise ConfigurationError([f"malformed topology {path}: {e}"]) from e
