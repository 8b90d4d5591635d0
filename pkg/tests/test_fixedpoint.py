import math
from fractions import Fraction

import mpmath
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qaclab._validation import ValidationError
from qaclab.fixedpoint import (FixedPointNumber, OpCounter, continued_fraction_depth,
                               exp_truncation_order, fx_arcsin_sqrt, fx_erfc, fx_exp_neg_sq,
                               fx_sqrt)

mpmath.mp.dps = 40

# 30-digit values from mpmath
EXP_MINUS_1 = 0.367879441171442321595523770161
EXP_MINUS_9 = 1.2340980408667954949763669073e-4
ERFC_1 = 0.157299207050285130658779364917
ERFC_HALF = 0.479500122186953462317253346108
SQRT_HALF = 0.707106781186547524400844362105


def fx(x, bits=60, mag=4):
    return FixedPointNumber.from_value(Fraction(x), bits, mag)


def test_number_roundtrip_and_range():
    x = fx(Fraction(3, 8))
    assert x.to_fraction() == Fraction(3, 8)
    assert float(x) == 0.375
    with pytest.raises(ValidationError):
        FixedPointNumber(1 << 12, 10, 1)
    with pytest.raises(ValidationError):
        FixedPointNumber(0, -1)


def test_sqrt_is_floor_root():
    res = fx_sqrt(fx(Fraction(1, 2)), 50)
    assert 0 <= SQRT_HALF - res.to_float() < 2.0 ** -50
    with pytest.raises(ValidationError):
        fx_sqrt(fx(-Fraction(1, 4)), 20)


def test_frozen_values():
    d = 2.0 ** -40
    assert abs(fx_exp_neg_sq(fx(1), d)[0].to_float() - EXP_MINUS_1) <= d
    assert abs(fx_exp_neg_sq(fx(-3), d)[0].to_float() - EXP_MINUS_9) <= d
    assert abs(fx_erfc(fx(1), d)[0].to_float() - ERFC_1) <= d
    assert abs(fx_erfc(fx(Fraction(1, 2)), d)[0].to_float() - ERFC_HALF) <= d
    assert abs(fx_erfc(fx(-1), d)[0].to_float() - (2 - ERFC_1)) <= d
    assert abs(fx_arcsin_sqrt(fx(Fraction(1, 2)), d)[0].to_float() - math.pi / 4) <= d


@pytest.mark.parametrize("bits", [10, 24, 40])
def test_kernels_against_mpmath(bits):
    delta = 2.0 ** -bits
    for i in range(41):
        y = Fraction(i, 40)
        ref = mpmath.asin(mpmath.sqrt(mpmath.mpf(y.numerator) / y.denominator))
        assert abs(fx_arcsin_sqrt(fx(y), delta)[0].to_fraction() - Fraction(str(ref))) <= delta
        x = Fraction(-4) + Fraction(8 * i, 40)
        xm = mpmath.mpf(x.numerator) / x.denominator
        got = fx_exp_neg_sq(fx(x), delta)[0].to_fraction()
        assert abs(got - Fraction(str(mpmath.exp(-xm * xm)))) <= delta
        x = Fraction(-5) + Fraction(10 * i, 40)
        xm = mpmath.mpf(x.numerator) / x.denominator
        got = fx_erfc(fx(x), delta)[0].to_fraction()
        assert abs(got - Fraction(str(mpmath.erfc(xm)))) <= delta


@settings(max_examples=60, deadline=None)
@given(st.fractions(min_value=-6, max_value=6), st.integers(min_value=4, max_value=44))
def test_erfc_accuracy_property(x, bits):
    delta = 2.0 ** -bits
    x = fx(x)
    xm = mpmath.mpf(x.mantissa) / 2 ** x.fractional_bits
    got = fx_erfc(x, delta)[0].to_fraction()
    assert abs(got - Fraction(str(mpmath.erfc(xm)))) <= delta


def test_range_and_delta_checks():
    with pytest.raises(ValidationError):
        fx_exp_neg_sq(fx(9), 1e-3)
    with pytest.raises(ValidationError):
        fx_erfc(fx(1), 0.0)
    with pytest.raises(ValidationError):
        fx_arcsin_sqrt(fx(Fraction(3, 2)), 1e-3)


def test_op_counts_grow_with_precision():
    costs = [fx_erfc(fx(Fraction(7, 5)), 2.0 ** -b, ops=OpCounter())[1].bit_cost
             for b in (10, 20, 30, 40)]
    assert costs == sorted(costs)
    ops = OpCounter()
    fx_exp_neg_sq(fx(2), 1e-6, ops=ops)
    assert ops.total == ops.adds + ops.mults + ops.divs + ops.sqrt_iters > 0


def test_truncation_orders():
    for d in (1e-3, 1e-9, 1e-15):
        l = exp_truncation_order(d)
        assert Fraction(1, math.factorial(l + 1)) <= Fraction(d) / 2
        assert Fraction(1, math.factorial(l)) > Fraction(d) / 2
    assert continued_fraction_depth(1e-12) > continued_fraction_depth(1e-3)
