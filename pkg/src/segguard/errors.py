"""Exception hierarchy shared by all segguard modules.

The CLI maps these onto exit codes: ValidationError -> 2,
NumericalFailure -> 3, IoFailure (and plain OSError) -> 1.
"""


class SegguardError(Exception):
    pass


class ValidationError(SegguardError):
    """Bad input: violated precondition, malformed file, shape mismatch."""


class IoFailure(SegguardError):
    """Read/write failed at the OS level."""


class NumericalFailure(SegguardError):
    """A numerical routine (e.g. SVD) did not converge."""


# tensor_core
class MalformedFile(ValidationError):
    pass


class UnsupportedDtype(ValidationError):
    pass


class TruncatedPayload(ValidationError):
    pass


class DegenerateImage(ValidationError):
    pass


# spectral_ood
class DegenerateSpectrum(ValidationError):
    pass


class LengthMismatch(ValidationError):
    pass


class InsufficientData(ValidationError):
    pass


class InconsistentChannels(ValidationError):
    pass


# shared by uncertainty / calibration / seg_metrics
class ShapeMismatch(ValidationError):
    pass


class EmptyInput(ValidationError):
    pass


class EmptyMask(ValidationError):
    pass


class EmptySurface(ValidationError):
    pass


# detect_eval
class DegenerateLabels(ValidationError):
    pass


# sampling_tiling
class EmptyCatalog(ValidationError):
    pass


class BlockTooLarge(ValidationError):
    pass


class InvalidOverlap(ValidationError):
    pass


class PlanMismatch(ValidationError):
    pass


# synth_bench
class ShapeTooSmall(ValidationError):
    pass
