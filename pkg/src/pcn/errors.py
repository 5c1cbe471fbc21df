"""Error taxonomy shared by the library and the CLI.

Every precondition failure raises a subclass of :class:`PcnError` carrying a
stable ``code`` string.  The CLI maps these to exit status 2 and prints the
code plus message as a single JSON line on stderr; anything else is an
internal error (exit status 3).
"""

from __future__ import annotations


class PcnError(Exception):
    """Base class for all precondition and validation failures."""

    code = "PCN_ERROR"

    def __init__(self, message: str):
        super().__init__(message)
        self.message = message


class ParseError(PcnError):
    """Malformed input file (grid text, JSON artifact, manifest)."""

    code = "PARSE_ERROR"


class ShapeError(PcnError):
    """Ragged rows or otherwise inconsistent array shape."""

    code = "SHAPE_ERROR"


class MarginError(PcnError):
    """Padding or buffer margin too large/small for the grid."""

    code = "MARGIN_ERROR"


class OutOfBoundsError(PcnError):
    """Site index outside the grid, or not a valid center."""

    code = "OUT_OF_BOUNDS"


class ModeError(PcnError):
    """Mixing count-class and position keys, or unknown mode name."""

    code = "MODE_ERROR"


class CountOverflowError(PcnError):
    """Counter overflow.  Unreachable with Python integers; kept so the
    code is part of the stable public taxonomy."""

    code = "COUNT_OVERFLOW"


class EmptySampleError(PcnError):
    """No valid center sites (grid too small or fully masked)."""

    code = "EMPTY_SAMPLE"


class MergeError(PcnError):
    """Attempt to merge count trees with different alphabet/mode/depth."""

    code = "MERGE_ERROR"


class CandidateError(PcnError):
    """Candidate leaf set is not a partition of the observed contexts."""

    code = "CANDIDATE_ERROR"


class TooLargeError(PcnError):
    """Exhaustive enumeration would exceed the configured bound."""

    code = "TOO_LARGE"


class DeltaError(PcnError):
    """Bootstrap margin does not exceed the model depth."""

    code = "DELTA_ERROR"


class InsufficientTraceError(PcnError):
    """Convergence trace has fewer than two rows."""

    code = "INSUFFICIENT_TRACE"


class EmptyInputError(PcnError):
    """Empty file or empty collection where content is required."""

    code = "EMPTY_INPUT"
