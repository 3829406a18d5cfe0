"""Exception hierarchy shared by every module."""

from typing import Iterable, List, Optional


class FemtoHandoverError(Exception):
    """Base class for all domain errors (CLI exit code 1)."""


class ConfigurationError(FemtoHandoverError):
    """Invalid scenario configuration; carries every violation found."""

    def __init__(self, errors: Iterable[str]):
        self.errors: List[str] = list(errors) or ["invalid configuration"]
        super().__init__("; ".join(self.errors))


class UnknownCellError(FemtoHandoverError, KeyError):
    """Lookup of an FAP, cell or session id that does not exist."""

    def __str__(self) -> str:
        return str(self.args[0]) if self.args else "unknown cell"


class DomainError(FemtoHandoverError, ValueError):
    """Model parameters outside the domain of the analytic formulas."""


class NumericError(FemtoHandoverError, ArithmeticError):
    """Non-finite value produced during an iterative computation."""

    def __init__(self, message: str, iteration: int, diagnostics: Optional[dict] = None):
        self.iteration = iteration
        self.diagnostics = dict(diagnostics or {})
        super().__init__(f"{message} (iteration {iteration}: {self.diagnostics})")


class ContractViolation(FemtoHandoverError):
    """A caller broke an operation's precondition."""
