"""Exception hierarchy and the exit codes the CLI maps them to."""

from typing import Any, Dict, List, Optional

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_VALIDATION = 2
EXIT_UNCONVERGED = 3
EXIT_NUMERICAL = 4


class ChromateControlError(Exception):
    """Base class for all errors raised by this package."""

    exit_code = EXIT_FAILURE


class ConfigError(ChromateControlError, ValueError):
    """Invalid configuration or a parameter set the model cannot represent.

    Args:
        errors: Itemized problems, each prefixed with its field path
            (e.g. ``"process.q_min_lph: must be positive"``)
    """

    exit_code = EXIT_VALIDATION

    def __init__(self, errors: List[str]):
        self.errors = list(errors)
        super().__init__("; ".join(self.errors))


class NumericalAbort(ChromateControlError, RuntimeError):
    """A sweep or quadrature left the region where the moments are defined."""

    exit_code = EXIT_NUMERICAL

    def __init__(self, message: str, diagnostics: Optional[Dict[str, Any]] = None):
        self.diagnostics = dict(diagnostics or {})
        super().__init__(message)


class InfeasibleObjective(ChromateControlError, ValueError):
    """Objective time t_m + w*sigma fell below zero."""
