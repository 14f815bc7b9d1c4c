# repeater_budget/utils/errors.py
"""
Exception hierarchy shared by every feature.
All errors carry an optional field path and serialize to the error JSON the CLI prints on stderr.
"""
import json
from typing import Any, Dict, Optional


class BudgetError(Exception):
    def __init__(self, message: str, field: Optional[str] = None):
        super().__init__(message)
        self.message = message
        self.field = field

    def to_json(self) -> Dict[str, Any]:
        return {"error": type(self).__name__, "message": self.message, "field": self.field}

    def dumps(self) -> str:
        return json.dumps(self.to_json(), sort_keys=True)


class ValidationError(BudgetError, ValueError):
    """invariant violated or document malformed"""


class ConfigError(BudgetError):
    """file missing or not valid JSON"""


class InfeasibleTargetError(BudgetError, ValueError):
    pass


class DomainError(BudgetError, ArithmeticError):
    pass


class EmptyFeasibleSetError(BudgetError):
    pass


class NotPositiveDefiniteError(BudgetError, ArithmeticError):
    pass


class FitError(BudgetError, ValueError):
    pass


class ConvergenceError(BudgetError):
    pass


class DegenerateDataError(BudgetError, ValueError):
    pass


class AllInvalidError(BudgetError):
    pass


def error_json(exc: BaseException) -> str:
    if isinstance(exc, BudgetError):
        return exc.dumps()
    return json.dumps({"error": type(exc).__name__, "message": str(exc), "field": None}, sort_keys=True)
