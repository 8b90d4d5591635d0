"""Fixed-point special-function kernels with operation accounting.

Values are integer mantissas over ``2**f``. Every multiply and divide
truncates toward zero, and every kernel carries an explicit error budget
that splits ``delta`` between series truncation and rounding. ``OpCounter``
records additions, multiplications, divisions and Newton steps, together
with a bit-cost total that charges ``b**2`` for a ``b``-bit multiply or
divide and ``b`` for an addition.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache

from scipy.special import lambertw

from ._validation import ValidationError


@dataclass
class OpCounter:
    adds: int = 0
    mults: int = 0
    divs: int = 0
    sqrt_iters: int = 0
    bit_cost: int = 0

    def add(self, bits: int, n: int = 1):
        self.adds += n
        self.bit_cost += n * bits

    def mult(self, bits: int, n: int = 1):
        self.mults += n
        self.bit_cost += n * bits * bits

    def div(self, bits: int, n: int = 1):
        self.divs += n
        self.bit_cost += n * bits * bits

    def short_div(self, bits: int, divisor: int):
        # division by a small integer costs one pass per divisor bit
        self.divs += 1
        self.bit_cost += bits * max(1, int(divisor).bit_length())

    @property
    def total(self) -> int:
        return self.adds + self.mults + self.divs + self.sqrt_iters

    def merge(self, other: "OpCounter"):
        self.adds += other.adds
        self.mults += other.mults
        self.divs += other.divs
        self.sqrt_iters += other.sqrt_iters
        self.bit_cost += other.bit_cost


@dataclass(frozen=True)
class FixedPointNumber:
    """The value ``mantissa / 2**fractional_bits``."""

    mantissa: int
    fractional_bits: int
    magnitude_bits: int = 1

    def __post_init__(self):
        if self.fractional_bits < 0 or self.magnitude_bits < 0:
            raise ValidationError("bit counts must be nonnegative")
        if abs(self.mantissa) >= 1 << (self.fractional_bits + self.magnitude_bits):
            raise ValidationError(
                f"value {self.to_float()} does not fit in {self.magnitude_bits} magnitude bits")

    @classmethod
    def from_value(cls, x, fractional_bits: int, magnitude_bits: int = 1) -> "FixedPointNumber":
        """Round ``x`` (float, int or Fraction) to the nearest representable value."""
        m = round(Fraction(x) * (1 << fractional_bits))
        return cls(int(m), fractional_bits, magnitude_bits)

    def to_fraction(self) -> Fraction:
        return Fraction(self.mantissa, 1 << self.fractional_bits)

    def to_float(self) -> float:
        return self.mantissa / 2.0 ** self.fractional_bits

    def __float__(self):
        return self.to_float()


# -- integer helpers at a fixed number of fractional bits ------------------


def _trunc_shift(v: int, k: int) -> int:
    # v / 2**k rounded toward zero (k may be negative)
    if k <= 0:
        return v << -k
    return (abs(v) >> k) * (1 if v >= 0 else -1)


def _trunc_div(a: int, b: int) -> int:
    q = abs(a) // abs(b)
    return q if (a >= 0) == (b > 0) else -q


def _mul(a: int, b: int, f: int, ops: OpCounter) -> int:
    ops.mult(f)
    return _trunc_shift(a * b, f)


def _div(a: int, b: int, f: int, ops: OpCounter) -> int:
    ops.div(f)
    return _trunc_div(a << f, b)


def _to_precision(x: FixedPointNumber, f: int) -> int:
    return _trunc_shift(x.mantissa, x.fractional_bits - f)


def _isqrt_newton(n: int, ops: OpCounter, bits: int) -> int:
    # floor(sqrt(n)) by integer Newton from an overestimate; the iterates
    # decrease strictly until they reach the floor root, which certifies it
    if n == 0:
        return 0
    x = 1 << ((n.bit_length() + 1) // 2)
    while True:
        ops.sqrt_iters += 1
        ops.div(bits)
        ops.add(bits)
        y = (x + n // x) >> 1
        if y >= x:
            return x
        x = y


@lru_cache(maxsize=64)
def _pi_mantissa(f: int) -> int:
    # Machin: pi = 16 atan(1/5) - 4 atan(1/239), with 10 guard bits
    g = f + 10
    one = 1 << g

    def atan_inv(k):
        total, term, n, sign = 0, one // k, 1, 1
        while term:
            total += sign * (term // n)
            term //= k * k
            n += 2
            sign = -sign
        return total

    return (16 * atan_inv(5) - 4 * atan_inv(239)) >> 10


@lru_cache(maxsize=64)
def _inv_sqrt_pi_mantissa(f: int) -> int:
    # floor(2**f / sqrt(pi)) from a high-precision pi
    p = _pi_mantissa(2 * f + 8)
    return math.isqrt((1 << (4 * f + 8)) // p)


# -- sqrt -----------------------------------------------------------------


def fx_sqrt(y: FixedPointNumber, f: int, ops: OpCounter | None = None) -> FixedPointNumber:
    """``floor(sqrt(y) 2**f) / 2**f``, so the error is below ``2**-f``."""
    ops = OpCounter() if ops is None else ops
    if y.mantissa < 0:
        raise ValidationError("square root of a negative value")
    if y.to_fraction() > 1:
        raise ValidationError("fx_sqrt expects y in [0, 1]")
    # floor(y 2**(2f)) is exact for the floor root
    n = _trunc_shift(y.mantissa, y.fractional_bits - 2 * f)
    return FixedPointNumber(_isqrt_newton(n, ops, f), f)


# -- arcsin(sqrt(y)) -------------------------------------------------------


def _arcsin_plan(delta: float):
    # coefficients decrease and y <= 1/2, so the tail after l terms is at most
    # sqrt(2) a_l 2**-l; Horner damps earlier roundings by y, which keeps the
    # total rounding error under 8 ulps
    l = 1
    while math.sqrt(2) * float(_arcsin_coeff(l)) * 2.0 ** -l > delta / 2:
        l += 1
    f = math.ceil(math.log2(16 / delta))
    return l, f


def _arcsin_coeff(m: int) -> Fraction:
    return Fraction(math.comb(2 * m, m), 4 ** m * (2 * m + 1))


def _arcsin_sqrt_small(y: FixedPointNumber, l: int, f: int, ops: OpCounter) -> int:
    # sqrt(y) * sum_{m<l} a_m y**m by Horner for y <= 1/2; the series only
    # needs y to f bits, while the root is taken from 2f bits so that it is
    # the exact floor of sqrt(y) 2**f
    root = fx_sqrt(y, f, ops).mantissa
    y = _to_precision(y, f)
    acc = 0
    for m in range(l - 1, -1, -1):
        a = _arcsin_coeff(m)
        acc = (a.numerator << f) // a.denominator + _mul(acc, y, f, ops)
        ops.add(f)
    return _mul(root, acc, f, ops)


def fx_arcsin_sqrt(y: FixedPointNumber, delta: float, ops: OpCounter | None = None):
    """``arcsin(sqrt(y))`` for ``y`` in [0, 1] to absolute accuracy ``delta``.

    Returns ``(result, ops)``. Above ``y = 1/2`` the complement identity
    ``pi/2 - arcsin(sqrt(1 - y))`` keeps the series argument at most 1/2.
    """
    ops = OpCounter() if ops is None else ops
    if not delta > 0:
        raise ValidationError("delta must be positive")
    yf = y.to_fraction()
    if yf < 0 or yf > 1:
        raise ValidationError("fx_arcsin_sqrt expects y in [0, 1]")
    l, f = _arcsin_plan(delta)
    half = Fraction(1, 2)
    if yf <= half:
        out = _arcsin_sqrt_small(y, l, f, ops)
    else:
        # 1 - y is exact at the input precision, then truncated like y
        comp = FixedPointNumber((1 << y.fractional_bits) - y.mantissa, y.fractional_bits)
        ops.add(y.fractional_bits)
        out = (_pi_mantissa(f) >> 1) - _arcsin_sqrt_small(comp, l, f, ops)
        ops.add(f)
    return FixedPointNumber(out, f), ops


# -- exp(-x^2) ---------------------------------------------------------------


def exp_truncation_order(delta: float) -> int:
    """Taylor order with ``1/(l+1)! <= delta/2``, starting from the Lambert-W estimate."""
    z = math.log(2 / delta)
    l = max(1, math.ceil(z / lambertw(z / math.e).real) - 1)
    while Fraction(1, math.factorial(l + 1)) > Fraction(delta) / 2:
        l += 1
    while l > 1 and Fraction(1, math.factorial(l)) <= Fraction(delta) / 2:
        l -= 1
    return l


def _exp_neg_unit(u: int, l: int, f: int, ops: OpCounter) -> int:
    # exp(-u) for 0 <= u <= 1 by Horner: 1 - u/1 (1 - u/2 (1 - ...))
    one = 1 << f
    acc = one
    for k in range(l, 0, -1):
        t = _trunc_div(_mul(u, acc, f, ops), k)
        ops.short_div(f, k)
        acc = one - t
        ops.add(f)
    return acc


def fx_exp_neg_sq(x: FixedPointNumber, delta: float, r: float = 8.0,
                  ops: OpCounter | None = None):
    """``exp(-x**2)`` to absolute accuracy ``delta`` for ``|x| <= r``.

    For ``|x| > 1`` the exponent splits as ``floor(x**2) + frac``; ``e**-1``
    is raised to the integer part by repeated squaring and multiplied by the
    Taylor value at the fractional part. Returns ``(result, ops)``.
    """
    ops = OpCounter() if ops is None else ops
    if not delta > 0:
        raise ValidationError("delta must be positive")
    xf = x.to_fraction()
    if abs(xf) > r:
        raise ValidationError(f"|x| = {float(abs(xf))} exceeds the range bound {r}")
    n = int(xf * xf)
    if n == 0:
        # Horner errors are damped by u/k <= 1/k: under 8 ulps in total
        l = exp_truncation_order(delta)
        f = math.ceil(math.log2(16 / delta))
        u = _square(x, f, r, ops)
        return FixedPointNumber(_exp_neg_unit(u, l, f, ops), f), ops
    squarings = n.bit_length()
    l = exp_truncation_order(delta / 4)
    f = math.ceil(math.log2(2 * (2 * squarings + 20) / delta))
    u = _square(x, f, r, ops)
    frac = u - (n << f)
    if frac < 0:
        # truncation of x**2 crossed an integer
        frac = 0
    inv_e = _exp_neg_unit(1 << f, l, f, ops)
    # inv_e ** n, most significant bit first
    power = 1 << f
    for bit in bin(n)[2:]:
        power = _mul(power, power, f, ops)
        if bit == "1":
            power = _mul(power, inv_e, f, ops)
    out = _mul(power, _exp_neg_unit(frac, l, f, ops), f, ops)
    return FixedPointNumber(out, f), ops


def _square(x: FixedPointNumber, f: int, r: float, ops: OpCounter) -> int:
    # x**2 at f bits from x truncated to f + log2(2r) + 1 bits: error <= 2 ulps
    g = f + max(0, math.ceil(math.log2(2 * r))) + 1
    if x.fractional_bits <= g:
        ops.mult(g)
        return _trunc_shift(x.mantissa * x.mantissa, 2 * x.fractional_bits - f)
    xm = _to_precision(x, g)
    ops.mult(g)
    return _trunc_shift(xm * xm, 2 * g - f)


# -- erfc --------------------------------------------------------------------

ERFC_SPLIT = 2


def _erf_series_plan(x2: Fraction, delta: float):
    # smallest l past the turning point with x**(2l+1) / (l! (2l+1)) <= delta/4
    x2f = float(x2)
    l = max(1, math.ceil(x2f))
    while True:
        term = math.exp((2 * l + 1) * 0.5 * math.log(max(x2f, 1e-300)) - math.lgamma(l + 1)) / (2 * l + 1)
        if term * 1.1283791671 <= delta / 4:
            break
        l += 1
    # recurrence errors grow at most like e**(x**2)
    guard = math.ceil(x2f * math.log2(math.e))
    f = math.ceil(math.log2(16 * (l + 2) / delta)) + guard
    return l, f


def _erf_series(x: FixedPointNumber, delta: float, ops: OpCounter) -> tuple[int, int]:
    x2 = x.to_fraction() ** 2
    l, f = _erf_series_plan(x2, delta)
    xm = _to_precision(x, f)
    u = _mul(xm, xm, f, ops)
    term = xm
    total = xm
    for k in range(1, l + 1):
        term = -_trunc_div(_mul(term, u, f, ops), k)
        ops.short_div(f, k)
        total += _trunc_div(term, 2 * k + 1)
        ops.short_div(f, 2 * k + 1)
        ops.add(f)
    return _mul(total, 2 * _inv_sqrt_pi_mantissa(f), f, ops), f


@lru_cache(maxsize=256)
def continued_fraction_depth(rho: float) -> int:
    """Depth of the Laplace continued fraction that brackets the value within ``rho`` at x = 2.

    Convergents alternate around the limit, so the gap between consecutive
    ones bounds the error; convergence only speeds up for larger ``x``.
    """
    x = Fraction(ERFC_SPLIT)
    A2, B2, A1, B1 = Fraction(1), Fraction(0), Fraction(0), Fraction(1)
    prev = None
    n = 0
    while True:
        n += 1
        a = Fraction(1) if n == 1 else Fraction(n - 1, 2)
        A2, B2, A1, B1 = A1, B1, x * A1 + a * A2, x * B1 + a * B2
        cur = A1 / B1
        if prev is not None and abs(cur - prev) <= Fraction(rho):
            return n
        prev = cur


def _erfc_tail(x: FixedPointNumber, delta: float, ops: OpCounter) -> tuple[int, int]:
    # erfc(x) = exp(-x**2)/sqrt(pi) * 1/(x + (1/2)/(x + 1/(x + (3/2)/(x + ...))))
    xf = x.to_fraction()
    n = continued_fraction_depth(delta)
    f = math.ceil(math.log2(16 * (n + 4) / delta))
    xm = _to_precision(x, f)
    t = 0
    for k in range(n, 0, -1):
        num = (1 << f) if k == 1 else ((k - 1) << f) >> 1
        t = _div(num, xm + t, f, ops)
        ops.add(f)
    e, _ = fx_exp_neg_sq(x, delta / 4, r=float(abs(xf)) + 1, ops=ops)
    em = _to_precision(e, f)
    out = _mul(_mul(em, t, f, ops), _inv_sqrt_pi_mantissa(f), f, ops)
    return out, f


def fx_erfc(x: FixedPointNumber, delta: float, r: float = 8.0, ops: OpCounter | None = None):
    """``erfc(x)`` to absolute accuracy ``delta`` for ``|x| <= r``.

    ``|x| <= 2`` uses ``1 - erf`` from the Taylor series with guard bits for
    the alternating terms; ``x > 2`` uses the Laplace continued fraction times
    ``exp(-x**2)``, or zero once ``exp(-x**2)/(x sqrt(pi))`` is below ``delta/2``.
    Negative arguments reflect through ``erfc(-x) = 2 - erfc(x)``.
    Returns ``(result, ops)``.
    """
    ops = OpCounter() if ops is None else ops
    if not delta > 0:
        raise ValidationError("delta must be positive")
    xf = x.to_fraction()
    if abs(xf) > r:
        raise ValidationError(f"|x| = {float(abs(xf))} exceeds the range bound {r}")
    if xf < 0:
        pos = FixedPointNumber(-x.mantissa, x.fractional_bits, x.magnitude_bits)
        res, ops = fx_erfc(pos, delta, r, ops)
        ops.add(res.fractional_bits)
        f = res.fractional_bits
        return FixedPointNumber((2 << f) - res.mantissa, f, 2), ops
    if xf <= ERFC_SPLIT:
        erf, f = _erf_series(x, delta, ops)
        ops.add(f)
        return FixedPointNumber((1 << f) - erf, f, 2), ops
    xv = float(xf)
    if -xv * xv - math.log(xv * math.sqrt(math.pi)) <= math.log(delta / 2):
        f = max(1, math.ceil(math.log2(2 / delta)))
        return FixedPointNumber(0, f, 2), ops
    out, f = _erfc_tail(x, delta, ops)
    return FixedPointNumber(out, f, 2), ops
