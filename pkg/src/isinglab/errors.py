"""Exception types shared across the package."""


class IsinglabError(Exception):
    """Base class for all package-specific errors."""


class GenerationExhausted(IsinglabError):
    """Graph generation ran out of rejection-sampling attempts (infeasible spec)."""


class TooLarge(IsinglabError):
    """Model exceeds the enumeration bound for brute-force inference."""


class DimensionMismatch(IsinglabError):
    """Array shapes are inconsistent with the declared layer dimensions."""


class UnsupportedPrimitive(IsinglabError):
    """Requested activation / operation is not part of the supported set."""


class FormatVersionMismatch(IsinglabError):
    """Weight file carries an unknown format version tag."""


class CorruptFile(IsinglabError):
    """File is truncated or structurally invalid."""


class DegenerateComponent(IsinglabError):
    """A mixture component collapsed below the variance floor during EM."""


class ZeroVariance(IsinglabError):
    """Samples have zero spread; the 3-sigma domain is undefined."""


class NonPositiveEntropy(IsinglabError):
    """A Monte-Carlo entropy estimate was <= 0; normalized MI is undefined."""


class LengthMismatch(IsinglabError):
    """Two per-node structures disagree on the node count."""


class ConstantTruth(IsinglabError):
    """R^2 is undefined when the ground-truth values are all equal."""


class DataFormatError(IsinglabError):
    """Input data file violates the documented schema."""
