"""Exception types shared across the toolkit.

Every error carries a short machine-readable ``code`` so CLI/service
reports can expose failures without parsing messages.
"""

from __future__ import annotations


class ToolkitError(Exception):
    code = "toolkit-error"

    def payload(self) -> dict:
        return {"code": self.code, "message": str(self)}


class ParseError(ToolkitError):
    """Syntax/identifier/arity problem in an expression source string."""

    code = "parse-error"

    def __init__(self, message: str, line: int, column: int):
        super().__init__(f"{message} (line {line}, column {column})")
        self.line = line
        self.column = column


class DomainError(ToolkitError):
    """Evaluation outside the expression's domain (log 0, division by 0)."""

    code = "domain-error"


class LayoutError(ToolkitError):
    """Inconsistent variable layout (duplicate group, bad size, mismatch)."""

    code = "layout-error"


class ConvergenceError(ToolkitError):
    """Newton iteration or quadrature refinement did not converge."""

    code = "convergence-error"


class RankError(ToolkitError):
    """Rank collapsed at an iterate, or rank inconsistent across samples."""

    code = "rank-error"


class HomotopyError(ToolkitError):
    """Determinant homotopy left GL (near-singular matrix on the path)."""

    code = "homotopy-error"


class BudgetError(ToolkitError):
    """Quadrature budget exceeded before node-doubling stability."""

    code = "budget-error"


class FiberError(ToolkitError):
    """Excess fiber missing, noncompact, or amplitude support escaping it."""

    code = "fiber-error"


class ConfigError(ToolkitError):
    """Malformed problem configuration (usage error, CLI exit code 1)."""

    code = "config-error"
