import math

import numpy as np
import pytest
from scipy.integrate import quad
from scipy.linalg import expm
from scipy.special import erfc

from qaclab._validation import ValidationError
from qaclab.family import PAULI_X, PAULI_Y, PAULI_Z, InterpolationFamily, spectrum
from qaclab.linalg import opnorm
from qaclab.models import random_gapped_family
from qaclab.qac import (InfeasibleParameters, QacKernel, QacParams, bin_masses,
                        choose_parameters, composite_bound, discretization_residual,
                        discretized_qac, exact_qac, filter_W, normalization,
                        tracking_residual, weight_integral)

# 30-digit values from mpmath
HALF_ERFC_AT_1_OVER_SQRT2 = 0.158655253931457051414767454368
HALF_ERFC_INTEGRAL_0_1 = 0.315626809813746379556883321367
INV_SQRT_2PI = 0.398942280401432677939946059934
ZX_GENERATOR_OFFDIAG = 0.432332358381693654053000252514
DELTA_FOR_UNIT_CASE = 0.119869168333390692893801647473


def test_filter_values():
    assert filter_W(1e-300, 2.0) == pytest.approx(0.5)
    assert filter_W(1.0, 1.0) == pytest.approx(HALF_ERFC_AT_1_OVER_SQRT2, rel=1e-14)
    assert filter_W(-0.7, 1.3) == -filter_W(0.7, 1.3)


def test_weight_integral_closed_form():
    assert weight_integral(0.4, 0.4, 1.0) == 0.0
    assert weight_integral(0.0, np.inf, 1.0) == pytest.approx(INV_SQRT_2PI, rel=1e-14)
    assert weight_integral(0.0, 1.0, 1.0) == pytest.approx(HALF_ERFC_INTEGRAL_0_1, abs=1e-14)


@pytest.mark.parametrize("delta", [0.1, 0.7, 2.5])
@pytest.mark.parametrize("t1,t2", [(0.0, 0.3), (0.2, 1.9), (1.0, 7.0)])
def test_weight_integral_matches_quadrature(delta, t1, t2):
    ref = quad(lambda t: 0.5 * erfc(delta * t / math.sqrt(2)), t1, t2, epsabs=1e-14)[0]
    assert weight_integral(t1, t2, delta) == pytest.approx(ref, abs=1e-12)


def test_weight_integral_rejects_reversed():
    with pytest.raises(ValidationError):
        weight_integral(1.0, 0.5, 1.0)


def test_normalization_bounded():
    for T in [0.5, 3.0, 50.0]:
        assert normalization(0.8, T) <= 1 / (math.sqrt(2 * math.pi) * 0.8) + 1e-15


def test_bin_masses_sum_to_normalization():
    m = bin_masses(0.3, 9.0, 1000, np.arange(1, 1001))
    assert m.sum() == pytest.approx(normalization(0.3, 9.0), rel=1e-12)
    assert np.all(np.diff(m) < 0)


def test_generator_vanishes_without_derivative():
    H = np.diag([0.0, 1.0])
    assert np.allclose(exact_qac(InterpolationFamily(H, H), 0.3, 1.0), 0)
    diag = InterpolationFamily(np.diag([0.0, 1.0, -1.0]), np.diag([0.5, -0.2, 2.0]))
    assert np.allclose(exact_qac(diag, 0.4, 1.0), 0, atol=1e-15)


def test_zx_generator_against_time_quadrature(zx_family):
    D = exact_qac(zx_family, 0.0, 1.0)
    V = spectrum(zx_family, 0.0).eigenvectors
    Deig = V.conj().T @ D @ V
    assert abs(Deig[0, 1]) == pytest.approx(ZX_GENERATOR_OFFDIAG, rel=1e-13)
    assert np.allclose(np.diag(Deig), 0)
    # proportional to Pauli Y in that basis
    assert np.allclose(Deig, Deig[1, 0].imag * PAULI_Y, atol=1e-14)


def _signed_sum(fam, s, delta, T, N):
    # direct sum over n = +-1..+-N with bin masses from quadrature
    H = (1 - s) * fam.H0 + s * fam.H1
    out = np.zeros_like(H, dtype=complex)
    h = T / N
    for n in range(1, N + 1):
        c = quad(lambda t: 0.5 * erfc(delta * t / math.sqrt(2)), (n - 1) * h, n * h,
                 epsabs=1e-15)[0]
        for sign in (1, -1):
            U = expm(1j * H * sign * n * h)
            out += sign * c * U @ fam.h_prime @ U.conj().T
    return out


@pytest.mark.parametrize("N,T", [(1, 1e-3), (1, 0.5), (5, 3.0)])
def test_discretized_against_direct_sum(zx_family, N, T):
    D = discretized_qac(zx_family, 0.3, QacParams(1.0, T, N))
    assert np.allclose(D, _signed_sum(zx_family, 0.3, 1.0, T, N), atol=1e-13)


def test_discretized_close_to_exact(zx_family):
    params = QacParams(1.0, 8.0, 512)
    lhs, rhs = discretization_residual(zx_family, 0.0, params)
    assert lhs <= rhs


def test_discretization_improves_with_bins(zx_family):
    coarse = discretization_residual(zx_family, 0.2, QacParams(1.0, 6.0, 64))
    fine = discretization_residual(zx_family, 0.2, QacParams(1.0, 6.0, 512))
    assert fine[0] < coarse[0]
    assert coarse[0] <= coarse[1] and fine[0] <= fine[1]
    longer = discretization_residual(zx_family, 0.2, QacParams(1.0, 12.0, 512))
    first_term = 2 * math.sqrt(2 * math.pi) * math.sqrt(2) * math.exp(-0.5 * 144)
    assert first_term < 1e-7 and longer[0] <= longer[1]


def test_kernel_interpolant_matches_direct_sum():
    k = QacKernel(0.2, 20.0, 200_000)
    w = np.linspace(0, 3, 257)
    direct = k.exact(w)
    k.build_interpolant(3.0)
    assert np.max(np.abs(k(w) - direct)) < 1e-11


def test_tracking_residual_cases(zx_family):
    H = np.diag([0.0, 1.0])
    assert tracking_residual(InterpolationFamily(H, H), 0.5, 0, 1.0) == (0.0, 0.0)
    diag = InterpolationFamily(np.diag([0.0, 1.0]), np.diag([0.3, 2.0]))
    lhs, rhs = tracking_residual(diag, 0.5, 0, 0.5)
    assert lhs == 0.0 <= rhs
    fam = random_gapped_family(4, 0.2, 5)
    lhs, rhs = tracking_residual(fam, 0.37, 0, 0.1)
    assert lhs <= rhs + 1e-12


def test_choose_parameters_closed_form():
    p = choose_parameters(1.0, 1.0, 0.5, 1e-3)
    assert p.delta == pytest.approx(DELTA_FOR_UNIT_CASE, rel=1e-14)
    finer = choose_parameters(1.0, 1.0, 0.5, 1e-4)
    assert finer.N >= 10 * p.N
    half_gap = choose_parameters(1.0, 1.0, 0.25, 1e-3)
    assert half_gap.N >= 4 * p.N / 2  # up to log factors
    assert sum(composite_bound(p)) <= p.epsilon * (1 + 1e-12)


def test_choose_parameters_rejects_large_epsilon():
    with pytest.raises(InfeasibleParameters):
        choose_parameters(1.0, 1.0, 0.5, 1.5)
