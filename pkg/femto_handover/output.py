"""Output filtering and logging utilities."""

import logging

import click
from rich.console import Console
from rich.logging import RichHandler

# Global console instances: results on stdout, diagnostics on stderr.
# No explicit file, so the streams are resolved at write time.
console = Console()
error_console = Console(stderr=True)


def configure_logging(verbose: bool = False) -> None:
    """
    Route library logging through a rich handler on stderr.

    Args:
        verbose: Emit DEBUG records instead of WARNING and above
    """
    root = logging.getLogger("femto_handover")
    for handler in list(root.handlers):
        root.removeHandler(handler)
    handler = RichHandler(console=error_console, show_path=False, markup=False)
    handler.setFormatter(logging.Formatter("%(message)s"))
    root.addHandler(handler)
    root.setLevel(logging.DEBUG if verbose else logging.WARNING)
    root.propagate = False


class OutputFilter:
    """Filtered output manager."""

    def __init__(self, verbose: bool = False, quiet: bool = False):
        """
        Initialize output filter.

        Args:
            verbose: Enable verbose output
            quiet: Suppress info and success messages (errors still shown)
        """
        self.verbose = verbose
        self.quiet = quiet
        self.console = console
        self.error_console = error_console

    def info(self, message: str, verbose_only: bool = False):
        """Print info message."""
        if self.quiet or (verbose_only and not self.verbose):
            return
        self.error_console.print(f"[blue]ℹ[/blue] {message}")

    def success(self, message: str):
        """Print success message."""
        if self.quiet:
            return
        self.error_console.print(f"[green]✓[/green] {message}")

    def warning(self, message: str, verbose_only: bool = False):
        """Print warning message."""
        if verbose_only and not self.verbose:
            return
        self.error_console.print(f"[yellow]⚠[/yellow] {message}")

    def error(self, message: str):
        """Print error message."""
        self.error_console.print(f"[red]✗[/red] {message}")

    def debug(self, message: str):
        """Print debug message."""
        if self.verbose:
            self.error_console.print(f"[dim]DEBUG:[/dim] {message}")

    def emit(self, text: str):
        """Write plain result text to stdout, untouched by rich markup."""
        click.echo(text, nl=not text.endswith("\n"))
