"""Exception types shared across the package."""


class SuperstabError(Exception):
    """Base class for all library-specific failures."""


class DomainMismatchError(SuperstabError):
    """Elements from incompatible semigroups were mixed (variant or arity)."""


class CoverageError(SuperstabError):
    """A table-backed function was evaluated outside its stored domain."""

    def __init__(self, message: str, missing_key: str | None = None):
        super().__init__(message)
        self.missing_key = missing_key


class OrbitRangeError(SuperstabError):
    """An orbit point or function value left the representable range.

    Raised instead of silently overflowing; callers should reduce the
    iteration depth.
    """


class AnchorError(SuperstabError):
    """An element with |g(a)| <= 1 was used where a contraction anchor is required."""


class SeriesDivergenceError(SuperstabError):
    """A series was requested at an argument where its terms do not decay."""


class PipelineStageError(SuperstabError):
    """A recovery stage failed with an underlying error; names the stage."""

    def __init__(self, stage: str, cause: BaseException):
        super().__init__(f"stage {stage!r} failed: {cause}")
        self.stage = stage

