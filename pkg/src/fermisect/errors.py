"""Exception types shared across the package."""


class FermisectError(Exception):
    """Base class for all package-specific errors."""


class NumericError(FermisectError):
    """A numerical solve (Newton, bisection) failed to converge."""


class AmbiguousProjection(FermisectError):
    """Nearest-point projection requested outside the uniqueness tube."""


class OrderError(FermisectError):
    """Requested derivative order exceeds the smoothness budget."""


class IndeterminateCertificate(FermisectError):
    """Symmetry certification came out mixed: some grid points show a jet
    difference, others do not up to the probed order.

    Carries ``worst_theta``, the grid angle with no detectable difference.
    """

    def __init__(self, msg, worst_theta=None):
        super().__init__(msg)
        self.worst_theta = worst_theta


class TooCoarse(FermisectError):
    """Requested sector length is too large for the curve."""


class TooFine(FermisectError):
    """Requested sector count exceeds the configured cap."""


class CurveMismatch(FermisectError):
    """Operation combined sectorizations of different curves."""


class MalformedQuery(FermisectError):
    """A compatibility/counting query violates its structural preconditions."""


class MaskRequired(FermisectError):
    """Norm comparison is only valid for momentum-conservation masked kernels."""


class SymmetryError(FermisectError):
    """Operation requires a strongly asymmetric curve."""


class TangencyWarning(FermisectError):
    """Secant counting hit the measure-zero exceptional set (tangential or
    continuum solutions).  Carries bracketing counts ``(count_low, count_high)``:
    the number of clean transversal solutions and the count including the
    degenerate ones.
    """

    def __init__(self, msg, count_low=0, count_high=0):
        super().__init__(msg)
        self.count_low = count_low
        self.count_high = count_high


class InsufficientData(FermisectError):
    """Not enough usable rows to fit an exponent."""
