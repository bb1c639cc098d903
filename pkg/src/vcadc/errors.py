"""Exception types shared across the compiler."""


class VcadError(Exception):
    """Base class for all vcadc errors."""


class DesignError(VcadError):
    """Invalid node construction (bad arity, non-invertible transform, ...)."""


class UnboundedDesignError(VcadError):
    """Raised when bounds() is requested for a design with no finite extent."""


class ExprSyntaxError(VcadError):
    """Expression failed to parse. Carries the 0-based source position."""

    def __init__(self, message: str, position: int):
        super().__init__(f"{message} (position {position})")
        self.position = position


class EvalError(VcadError):
    """Expression evaluation failed (e.g. unbound variable).

    ``node_path`` is filled in as the error propagates up a design tree.
    """

    def __init__(self, message: str, node_path: str = ""):
        self.message = message
        self.node_path = node_path
        super().__init__(self._format())

    def _format(self) -> str:
        if self.node_path:
            return f"{self.node_path}: {self.message}"
        return self.message

    def with_path(self, segment: str) -> "EvalError":
        path = segment if not self.node_path else f"{segment}/{self.node_path}"
        return EvalError(self.message, path)


class DesignJsonError(VcadError):
    """Malformed design document. Carries the JSON path of the offender."""

    def __init__(self, message: str, json_path: str = "$"):
        super().__init__(f"{message} (at {json_path})")
        self.json_path = json_path


class InpError(VcadError):
    """Malformed or unsupported .inp content."""


class ResultsCsvError(VcadError):
    """Malformed nodal-results CSV."""
