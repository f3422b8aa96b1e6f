"""Exception hierarchy shared across the package."""


class CarimaError(Exception):
    """Base class for all package-specific errors."""


class SeriesTooShort(CarimaError):
    """A series is too short for the requested differencing or fit."""


class BadPolynomial(CarimaError):
    """A lag polynomial violates a structural requirement (e.g. a0 != 1)."""


class NonStationary(CarimaError):
    """AR polynomial has a root on or inside the unit circle."""


class NonInvertible(CarimaError):
    """MA polynomial has a root on or inside the unit circle."""


class DimensionMismatch(CarimaError):
    """Array shapes are inconsistent (regressors vs. series, forecasts vs. horizons)."""


class TooFewObservations(CarimaError):
    """Effective sample size is too small for the number of free parameters."""


class OptimizerDiverged(CarimaError):
    """Likelihood optimization failed to produce a usable point."""


class AllFitsFailed(CarimaError):
    """Every candidate order in a model search failed to fit."""


class DegenerateVariance(CarimaError):
    """A test statistic has non-finite or non-positive variance."""


class TooFewResiduals(CarimaError):
    """Not enough residuals to bootstrap from."""


class EmptyPostPeriod(CarimaError):
    """The post-intervention period contains no observations."""


class BadIndex(CarimaError):
    """An index (e.g. intervention time) falls outside the valid range."""


class ParseError(CarimaError):
    """A CSV or config file could not be parsed; message carries row/column context."""


class NonMonotoneDates(ParseError):
    """Dates in an input file are not strictly increasing."""


class UnknownColumn(ParseError):
    """A requested column is absent from the input file."""


class IoError(CarimaError):
    """Filesystem failure while emitting or reading artifacts."""
