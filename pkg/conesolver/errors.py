from __future__ import annotations

from typing import Any, List, Optional


class SolverError(RuntimeError):
    """Base class for every failure raised by conesolver."""

    exit_code = 3

    def to_dict(self) -> dict:
        return {"error": type(self).__name__, "message": str(self)}


class ConfigError(SolverError, ValueError):
    exit_code = 2

    def __init__(self, problems: List[str] | str):
        if isinstance(problems, str):
            problems = [problems]
        self.problems = list(problems)
        super().__init__("; ".join(self.problems))

    def to_dict(self) -> dict:
        d = super().to_dict()
        d["problems"] = self.problems
        return d


class GridMismatchError(SolverError):
    pass


class BoundaryError(SolverError):
    pass


class ConvergenceError(SolverError):
    def __init__(self, message: str, residual: float = float("nan"), iterations: int = 0):
        super().__init__(f"{message} (residual={residual:.3e}, iterations={iterations})")
        self.residual = residual
        self.iterations = iterations

    def to_dict(self) -> dict:
        d = super().to_dict()
        d["residual"] = self.residual
        d["iterations"] = self.iterations
        return d


class ConeViolationError(SolverError):
    def __init__(self, message: str, report: Any = None):
        super().__init__(message)
        self.report = report

    def to_dict(self) -> dict:
        d = super().to_dict()
        if self.report is not None:
            d["cone"] = self.report.to_dict()
        return d


class FlowError(SolverError):
    def __init__(self, message: str, trace: Optional[Any] = None):
        super().__init__(message)
        self.trace = trace

    def to_dict(self) -> dict:
        d = super().to_dict()
        if self.trace is not None:
            d["trace_prefix"] = [list(s) for s in self.trace.samples[-10:]]
        return d
