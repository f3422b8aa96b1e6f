"""Differencing, lag-polynomial algebra and inversion coefficients."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from carima.errors import BadPolynomial, SeriesTooShort
from carima.series import (
    DiffSpec,
    LagPolynomial,
    TimeSeries,
    difference,
    expand_diff_polynomial,
    invert_diff_polynomial,
    poly_multiply,
    undifference,
)


class TestDifference:
    def test_first_difference(self):
        out = difference(TimeSeries([1, 2, 4, 7]), DiffSpec(d=1))
        np.testing.assert_array_equal(out.values, [1, 2, 3])

    def test_identity(self):
        y = TimeSeries([3.0, 1.0, 4.0, 1.5])
        out = difference(y, DiffSpec())
        np.testing.assert_array_equal(out.values, y.values)

    def test_seasonal_difference_of_ramp(self):
        out = difference(TimeSeries(np.arange(1.0, 15.0)), DiffSpec(D=1, s=7))
        np.testing.assert_array_equal(out.values, np.full(7, 7.0))

    def test_too_short(self):
        with pytest.raises(SeriesTooShort):
            difference(TimeSeries([1.0, 2.0]), DiffSpec(d=1, D=1, s=7))

    def test_missing_propagates_through_windows(self):
        y = TimeSeries([1.0, np.nan, 3.0, 6.0, 10.0])
        out = difference(y, DiffSpec(d=1))
        assert list(out.missing) == [True, True, False, False]

    def test_start_index_advances(self):
        y = TimeSeries(np.arange(10.0), start_index=5)
        assert difference(y, DiffSpec(d=2)).start_index == 7


class TestExpandInvert:
    def test_expand_first(self):
        np.testing.assert_array_equal(expand_diff_polynomial(DiffSpec(d=1)).coeffs, [1, -1])

    def test_expand_second(self):
        np.testing.assert_array_equal(expand_diff_polynomial(DiffSpec(d=2)).coeffs, [1, -2, 1])

    def test_expand_mixed_weekly(self):
        got = expand_diff_polynomial(DiffSpec(d=1, D=1, s=7)).coeffs
        np.testing.assert_array_equal(got, [1, -1, 0, 0, 0, 0, 0, -1, 1])

    def test_degree_is_total_lags(self):
        for spec in (DiffSpec(2, 1, 4), DiffSpec(0, 2, 12), DiffSpec(1, 0, 1)):
            assert expand_diff_polynomial(spec).degree == spec.total_lags

    def test_invert_cumsum(self):
        inv = invert_diff_polynomial(LagPolynomial([1, -1]), 5)
        np.testing.assert_array_equal(inv.b, np.ones(5))

    def test_invert_double_integration(self):
        inv = invert_diff_polynomial(LagPolynomial([1, -2, 1]), 5)
        np.testing.assert_array_equal(inv.b, [1, 2, 3, 4, 5])

    def test_invert_requires_unit_leading(self):
        with pytest.raises(BadPolynomial):
            invert_diff_polynomial(LagPolynomial([2.0, 1.0]), 4)

    def test_invert_matches_long_division(self):
        # polynomial long division of 1 by a(L), term by term
        a = expand_diff_polynomial(DiffSpec(d=1, D=1, s=7))
        K = 10
        got = invert_diff_polynomial(a, K).b
        rem = [0] * (K + a.degree)
        rem[0] = 1
        quot = []
        coeffs = [int(c) for c in a.coeffs]
        for j in range(K):
            quot.append(rem[j])
            for i, ci in enumerate(coeffs):
                rem[j + i] -= quot[-1] * ci if i else 0
        np.testing.assert_array_equal(got, quot)


class TestPolyMultiply:
    def test_identity(self):
        out = poly_multiply(LagPolynomial([1, -0.7]), LagPolynomial([1]))
        np.testing.assert_allclose(out.coeffs, [1, -0.7])

    def test_conjugate_pair(self):
        out = poly_multiply(LagPolynomial([1, -1]), LagPolynomial([1, 1]))
        np.testing.assert_allclose(out.coeffs, [1, 0, -1])

    def test_seasonal_distributivity(self):
        seasonal = LagPolynomial([1, 0, 0, 0, 0, 0, 0, 0.5])
        out = poly_multiply(LagPolynomial([1, 0.6]), seasonal)
        np.testing.assert_allclose(out.coeffs, [1, 0.6, 0, 0, 0, 0, 0, 0.5, 0.3])

    def test_degree_adds(self):
        p, q = LagPolynomial([1, 2, 3]), LagPolynomial([1, 0, 0, 4])
        assert poly_multiply(p, q).degree == p.degree + q.degree


SPEC_STRATEGY = st.tuples(
    st.integers(0, 2), st.integers(0, 2), st.sampled_from([1, 4, 7, 12])
).filter(lambda t: not (t[1] > 0 and t[2] == 1))


class TestProperties:
    @settings(max_examples=50, deadline=None)
    @given(SPEC_STRATEGY, st.integers(1, 64))
    def test_truncated_convolution_is_unit_impulse(self, sdd, K):
        d, D, s = sdd
        a = expand_diff_polynomial(DiffSpec(d, D, s))
        b = invert_diff_polynomial(a, K).b
        conv = np.convolve(a.coeffs, b)[:K]
        expect = np.zeros(K)
        expect[0] = 1.0
        np.testing.assert_array_equal(conv, expect)

    @settings(max_examples=40, deadline=None)
    @given(SPEC_STRATEGY, st.integers(0, 2**31 - 1))
    def test_difference_roundtrip(self, sdd, seed):
        d, D, s = sdd
        spec = DiffSpec(d, D, s)
        rng = np.random.default_rng(seed)
        n = spec.total_lags + int(rng.integers(5, 40))
        y = rng.normal(3.0, 2.0, n).cumsum()
        dy = difference(TimeSeries(y), spec)
        rebuilt = undifference(dy.values, y[: spec.total_lags], spec)
        np.testing.assert_allclose(rebuilt, y, rtol=1e-10, atol=1e-10)

    def test_roundtrip_via_b_weights(self):
        # independent route: partial sums of b-convolved differences plus
        # the contribution of the initial values
        spec = DiffSpec(d=1, D=1, s=4)
        rng = np.random.default_rng(7)
        y = rng.normal(size=30).cumsum() + 10
        dy = difference(TimeSeries(y), spec).values
        a = expand_diff_polynomial(spec)
        K = dy.size
        b = invert_diff_polynomial(a, K).b
        # y_{A+t} = sum_{j<=t} b_j dy_{t-j} + (initial-condition response)
        part = np.convolve(b, dy)[:K]
        # initial response: run the inverse recursion on a zero input
        tail = np.zeros(K)
        init = y[: spec.total_lags]
        zeros = undifference(np.zeros(K), init, spec)[spec.total_lags :]
        np.testing.assert_allclose(part + zeros, y[spec.total_lags :], rtol=1e-10)

    @settings(max_examples=30, deadline=None)
    @given(SPEC_STRATEGY, st.integers(0, 2**31 - 1))
    def test_difference_is_linear(self, sdd, seed):
        d, D, s = sdd
        spec = DiffSpec(d, D, s)
        rng = np.random.default_rng(seed)
        n = spec.total_lags + 12
        x, y = rng.normal(size=(2, n))
        a, b = 1.7, -0.4
        dx = difference(TimeSeries(x), spec).values
        dy = difference(TimeSeries(y), spec).values
        dz = difference(TimeSeries(a * x + b * y), spec).values
        np.testing.assert_allclose(dz, a * dx + b * dy, rtol=1e-9, atol=1e-9)


class TestTimeSeries:
    def test_mask_and_nan_are_unified(self):
        ts = TimeSeries([1.0, np.nan, 3.0], missing=[False, False, True])
        assert list(ts.missing) == [False, True, True]
        assert ts.n_observed == 1

    def test_slice_out_of_range(self):
        with pytest.raises(IndexError):
            TimeSeries([1.0, 2.0]).slice(0, 3)

    def test_immutable(self):
        ts = TimeSeries([1.0, 2.0])
        with pytest.raises(ValueError):
            ts.values[0] = 9.0
