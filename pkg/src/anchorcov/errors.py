"""Exception hierarchy.

Every error raised by the library derives from :class:`CoverageError`. The
CLI maps :class:`GeometryError` subclasses to exit code 3.
"""


class CoverageError(Exception):
    """Base class for all library errors."""


class GeometryError(CoverageError, ValueError):
    """Invalid or degenerate geometric input."""


class TooFewPoints(GeometryError):
    pass


class AllCollinear(GeometryError):
    pass


class DegenerateTriangle(GeometryError):
    pass


class WeightsNotNormalized(GeometryError):
    pass


class ZeroResolution(GeometryError):
    pass


class OutsideTriangle(GeometryError):
    pass


class InvalidConfig(GeometryError):
    """Agent configuration violates its invariants (duplicates, too few agents...)."""


class NoInteriorAgent(GeometryError):
    pass


class DegenerateChild(GeometryError):
    pass


class UnassignableAgent(GeometryError):
    pass


class GoalOutsideTriangle(GeometryError):
    pass


class NonPositiveParams(CoverageError, ValueError):
    pass


class InvalidNoise(CoverageError, ValueError):
    pass


class InvalidEta(CoverageError, ValueError):
    pass


class NonConvergence(CoverageError, RuntimeError):
    pass


class WindowExceedsRun(CoverageError, ValueError):
    pass


class StepError(CoverageError):
    """Wraps an error raised while stepping the simulation at a given step."""

    def __init__(self, step, agent, cause):
        self.step = step
        self.agent = agent
        self.cause = cause
        super().__init__(f"step {step}, agent {agent}: {cause}")


class ScenarioError(CoverageError, ValueError):
    """Malformed scenario or trajectory file; carries line/column when known."""

    def __init__(self, message, line=None, column=None):
        self.line = line
        self.column = column
        where = f" (line {line}, column {column})" if line is not None else ""
        super().__init__(message + where)
