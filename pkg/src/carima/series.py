"""Time-series container, lag-polynomial algebra and differencing transforms.

The differencing operator used throughout is (1 - L^s)^D (1 - L)^d.  Its
expansion into lag coefficients ``a_0..a_A`` (A = s*D + d) and the truncated
inverse coefficients ``b_0..b_{K-1}`` are what map effects measured on the
differenced scale back to the original scale.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .errors import BadPolynomial, DimensionMismatch, SeriesTooShort


@dataclass(frozen=True)
class TimeSeries:
    """An indexed numeric sequence with first-class missing values.

    Missing entries are tracked by an explicit boolean mask; the ``values``
    array holds NaN at masked slots purely so that accidental use is loud.

    Parameters
    ----------
    values : sequence of float
        Observations; entries at missing positions are ignored.
    missing : sequence of bool, optional
        True marks a missing slot.  NaNs in ``values`` are absorbed into the
        mask automatically.
    start_index : int
        Time origin of the first element.
    dates : tuple of datetime.date, optional
        Calendar labels, one per element.
    """

    values: np.ndarray
    missing: np.ndarray
    start_index: int = 0
    dates: Optional[tuple] = None

    def __init__(self, values, missing=None, start_index=0, dates=None):
        vals = np.asarray(values, dtype=float).copy()
        if vals.ndim != 1:
            raise DimensionMismatch(f"TimeSeries expects 1-d data, got shape {vals.shape}")
        if vals.size < 1:
            raise SeriesTooShort("TimeSeries needs at least one element")
        if missing is None:
            mask = np.isnan(vals)
        else:
            mask = np.asarray(missing, dtype=bool).copy()
            if mask.shape != vals.shape:
                raise DimensionMismatch("missing mask length differs from values")
            mask = mask | np.isnan(vals)
        vals[mask] = np.nan
        if dates is not None:
            dates = tuple(dates)
            if len(dates) != vals.size:
                raise DimensionMismatch("dates length differs from values")
        vals.setflags(write=False)
        mask.setflags(write=False)
        object.__setattr__(self, "values", vals)
        object.__setattr__(self, "missing", mask)
        object.__setattr__(self, "start_index", int(start_index))
        object.__setattr__(self, "dates", dates)

    def __len__(self) -> int:
        return self.values.size

    @property
    def n_observed(self) -> int:
        return int((~self.missing).sum())

    def is_missing(self, i: int) -> bool:
        return bool(self.missing[i])

    def slice(self, start: int, stop: int) -> "TimeSeries":
        """Positional slice; raises instead of silently truncating."""
        if not (0 <= start <= stop <= len(self)):
            raise IndexError(f"slice [{start}:{stop}) outside series of length {len(self)}")
        if start == stop:
            raise SeriesTooShort("empty slice requested")
        return TimeSeries(
            self.values[start:stop],
            self.missing[start:stop],
            start_index=self.start_index + start,
            dates=self.dates[start:stop] if self.dates is not None else None,
        )

    def filled(self) -> np.ndarray:
        """Values with NaN at missing slots (copy)."""
        return self.values.copy()


@dataclass(frozen=True)
class LagPolynomial:
    """Dense coefficient sequence in the lag operator, indexed from lag 0."""

    coeffs: np.ndarray
    degree: int = field(init=False)

    def __init__(self, coeffs: Sequence[float]):
        c = np.asarray(coeffs, dtype=float).copy()
        if c.ndim != 1 or c.size == 0:
            raise BadPolynomial("coefficients must be a nonempty 1-d sequence")
        nz = np.nonzero(c)[0]
        c.setflags(write=False)
        object.__setattr__(self, "coeffs", c)
        object.__setattr__(self, "degree", int(nz[-1]) if nz.size else 0)

    def __len__(self) -> int:
        return self.coeffs.size

    def trimmed(self) -> "LagPolynomial":
        return LagPolynomial(self.coeffs[: self.degree + 1])


@dataclass(frozen=True)
class DiffSpec:
    """Orders of the differencing operator (1 - L^s)^D (1 - L)^d."""

    d: int = 0
    D: int = 0
    s: int = 1

    def __post_init__(self):
        if self.d < 0 or self.D < 0 or self.s < 1:
            raise BadPolynomial(f"invalid differencing spec d={self.d}, D={self.D}, s={self.s}")
        if self.D > 0 and self.s < 2:
            raise BadPolynomial("seasonal differencing (D > 0) requires period s >= 2")

    @property
    def total_lags(self) -> int:
        """Number of observations consumed: d + s*D."""
        return self.d + self.s * self.D

    @property
    def is_identity(self) -> bool:
        return self.d == 0 and self.D == 0


@dataclass(frozen=True)
class InversionCoeffs:
    """Truncated inverse of a differencing polynomial.

    ``b`` satisfies (a * b)_0 = 1 and (a * b)_j = 0 for 1 <= j < K, where *
    is coefficient convolution.
    """

    b: np.ndarray
    a: np.ndarray

    def __init__(self, b, a):
        b = np.asarray(b, dtype=float).copy()
        a = np.asarray(a, dtype=float).copy()
        b.setflags(write=False)
        a.setflags(write=False)
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "a", a)


def poly_multiply(p: LagPolynomial, q: LagPolynomial) -> LagPolynomial:
    """Convolve two lag polynomials; degree adds."""
    return LagPolynomial(np.convolve(p.coeffs, q.coeffs))


def expand_diff_polynomial(spec: DiffSpec) -> LagPolynomial:
    """Expand (1 - L^s)^D (1 - L)^d into lag coefficients a_0..a_A.

    ``a_0`` is always 1 and A = s*D + d.  Coefficients are exact small
    integers represented in floating point.
    """
    coeffs = np.array([1.0])
    for _ in range(spec.d):
        coeffs = np.convolve(coeffs, [1.0, -1.0])
    seasonal = np.zeros(spec.s + 1)
    seasonal[0], seasonal[-1] = 1.0, -1.0
    for _ in range(spec.D):
        coeffs = np.convolve(coeffs, seasonal)
    return LagPolynomial(coeffs)


def invert_diff_polynomial(a: LagPolynomial, K: int) -> InversionCoeffs:
    """Coefficients b_0..b_{K-1} of the truncated inverse of ``a``.

    Computed by the recursion b_0 = 1, b_j = -sum_{i=1}^{min(A,j)} a_i b_{j-i}.
    """
    if K < 1:
        raise BadPolynomial("K must be >= 1")
    ac = a.coeffs
    if ac[0] != 1.0:
        raise BadPolynomial(f"inverse requires a_0 = 1, got {ac[0]}")
    A = a.degree
    b = np.zeros(K)
    b[0] = 1.0
    for j in range(1, K):
        m = min(A, j)
        b[j] = -np.dot(ac[1 : m + 1], b[j - m : j][::-1])
    return InversionCoeffs(b=b, a=ac[: A + 1])


def _diff_once(values: np.ndarray, missing: np.ndarray, lag: int):
    """Single-lag difference; a window touching a missing input is missing."""
    out = values[lag:] - values[:-lag]
    miss = missing[lag:] | missing[:-lag]
    out = out.copy()
    out[miss] = np.nan
    return out, miss


def difference(series: TimeSeries, spec: DiffSpec) -> TimeSeries:
    """Apply (1 - L^s)^D (1 - L)^d to a series.

    The result is shorter by d + s*D; missing inputs propagate to every
    output window that touches them.
    """
    if len(series) <= spec.total_lags:
        raise SeriesTooShort(
            f"series of length {len(series)} cannot be differenced with d={spec.d}, "
            f"D={spec.D}, s={spec.s} (needs > {spec.total_lags} points)"
        )
    vals, miss = series.values, series.missing
    for _ in range(spec.D):
        vals, miss = _diff_once(vals, miss, spec.s)
    for _ in range(spec.d):
        vals, miss = _diff_once(vals, miss, 1)
    dates = series.dates[spec.total_lags :] if series.dates is not None else None
    return TimeSeries(vals, miss, start_index=series.start_index + spec.total_lags, dates=dates)


def difference_matrix(X: np.ndarray, spec: DiffSpec) -> np.ndarray:
    """Apply the differencing operator to each column of a matrix.

    NaN entries propagate like missing series values.
    """
    X = np.asarray(X, dtype=float)
    if spec.is_identity:
        return X.copy()
    a = expand_diff_polynomial(spec).coeffs
    n = X.shape[0] - spec.total_lags
    if n < 1:
        raise SeriesTooShort("matrix too short for differencing spec")
    out = np.zeros((n, X.shape[1]))
    for j, aj in enumerate(a):
        if aj != 0.0:
            out += aj * X[spec.total_lags - j : spec.total_lags - j + n]
    return out


def undifference(diffed: np.ndarray, initial: np.ndarray, spec: DiffSpec) -> np.ndarray:
    """Reconstruct a level series from its differenced form.

    ``initial`` supplies the d + s*D leading level values.  Inverts the
    recursion y_t = w_t - sum_{j>=1} a_j y_{t-j} exactly on complete data.
    """
    a = expand_diff_polynomial(spec).coeffs
    A = spec.total_lags
    initial = np.asarray(initial, dtype=float)
    if initial.size != A:
        raise DimensionMismatch(f"need {A} initial values, got {initial.size}")
    diffed = np.asarray(diffed, dtype=float)
    y = np.concatenate([initial, np.zeros(diffed.size)])
    for t in range(diffed.size):
        acc = diffed[t]
        for j in range(1, A + 1):
            acc -= a[j] * y[A + t - j]
        y[A + t] = acc
    return y
