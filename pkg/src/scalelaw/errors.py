"""Exception hierarchy shared by every module, with the CLI exit code each maps to."""


class ScaleLawError(Exception):
    """Base class; ``code`` is the machine-readable prefix printed by the CLI."""

    code = "error"
    exit_code = 1


class DomainError(ScaleLawError, ValueError):
    """An input lies outside the domain of a functional form or data type."""

    code = "domain"
    exit_code = 2


class ParseError(ScaleLawError, ValueError):
    """Malformed measurement file; carries the 1-based row and column name."""

    code = "parse"
    exit_code = 2

    def __init__(self, message: str, row: int | None = None, column: str | None = None):
        where = []
        if row is not None:
            where.append(f"row {row}")
        if column is not None:
            where.append(f"column {column!r}")
        super().__init__(f"{', '.join(where)}: {message}" if where else message)
        self.row = row
        self.column = column


class IllPosedError(ScaleLawError):
    """Too few points, or too little spread, to identify the free parameters."""

    code = "ill-posed"
    exit_code = 3


class InfeasibleError(ScaleLawError):
    """A design query has no solution (target outside the attainable range)."""

    code = "infeasible"
    exit_code = 4
