"""Exception hierarchy for the engine.

Every error raised on a documented failure path derives from EngineError so
callers (and the CLI) can distinguish engine failures from programming bugs.
"""


class EngineError(Exception):
    """Base class for all engine errors."""


class DimensionError(EngineError):
    """Shapes disagree; the message names the offending axis or nodes."""


class DegenerateShapeError(EngineError):
    """An operation would produce an empty output or an all-padding window."""


class CapabilityError(EngineError):
    """Requested an operation the engine does not support (e.g. unknown vjp)."""


class GraphError(EngineError):
    """Structural graph problem: cycle, dangling reference, unreachable node."""


class ResolutionError(EngineError):
    """A weight name did not resolve against the weight store."""


class BuildError(EngineError):
    """A block or backbone builder received inconsistent arguments."""


class SpecParseError(EngineError):
    """Architecture spec text is malformed; message carries the line number."""


class DataError(EngineError):
    """Invalid runtime data: bad label value, malformed image file, etc."""


class ComparisonError(EngineError):
    """Two reports cannot be compared (conventions differ)."""
