"""Progress bar for sweeps and Monte-Carlo benches."""

from typing import Optional

from rich.progress import (
    BarColumn,
    Progress,
    SpinnerColumn,
    TextColumn,
    TimeElapsedColumn,
    TimeRemainingColumn,
)

from femto_handover.output import error_console


class ProgressTracker:
    """Single-line progress tracker with ETA on stderr."""

    def __init__(self, total: int, description: str = "Running", enabled: bool = True):
        """
        Initialize progress tracker.

        Args:
            total: Total number of work items
            description: Description text
            enabled: False turns every call into a no-op (--quiet)
        """
        self.total = total
        self.description = description
        self.enabled = enabled
        self.progress = Progress(
            SpinnerColumn(),
            TextColumn("[progress.description]{task.description}"),
            BarColumn(),
            TextColumn("[progress.percentage]{task.percentage:>3.0f}%"),
            TextColumn("({task.completed}/{task.total})"),
            TimeElapsedColumn(),
            TimeRemainingColumn(),
            console=error_console,
            transient=True,
            refresh_per_second=2,
            disable=not enabled,
        )
        self.task_id: Optional[int] = None

    def __enter__(self):
        self.progress.__enter__()
        self.task_id = self.progress.add_task(self.description, total=self.total)
        return self

    def __exit__(self, exc_type, exc_val, exc_tb):
        self.progress.__exit__(exc_type, exc_val, exc_tb)

    def update(self, advance: int = 1):
        if self.task_id is not None:
            self.progress.update(self.task_id, advance=advance)
