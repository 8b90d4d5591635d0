import numpy as np
import pytest

from qaclab._validation import ValidationError
from qaclab.family import (PAULI_X, PAULI_Z, InterpolationFamily, block_encode_difference,
                           block_encode_interpolant, derivative, evaluate, gap, gaps_on_grid,
                           interpolation_angle, quantize_angle, reflection_witness, rotation,
                           scan_gap, spectrum)
from qaclab.linalg import opnorm
from qaclab.models import grover_family

from conftest import random_hermitian


def test_endpoints(zx_family):
    assert np.allclose(evaluate(zx_family, 0.0), PAULI_Z)
    assert np.allclose(evaluate(zx_family, 1.0), PAULI_X)


def test_midpoint_spectrum(zx_family):
    assert np.allclose(evaluate(zx_family, 0.5), (PAULI_Z + PAULI_X) / 2)
    assert np.allclose(spectrum(zx_family, 0.5).eigenvalues, [-2 ** -0.5, 2 ** -0.5])


def test_out_of_range_s(zx_family):
    with pytest.raises(ValidationError):
        evaluate(zx_family, 1.5)


def test_derivative(zx_family):
    same = InterpolationFamily(PAULI_Z, PAULI_Z)
    assert np.allclose(derivative(same), 0)
    assert np.allclose(np.linalg.eigvalsh(derivative(zx_family)), [-np.sqrt(2), np.sqrt(2)])
    double = InterpolationFamily(2 * PAULI_Z, 2 * PAULI_X)
    assert np.allclose(derivative(double), 2 * derivative(zx_family))


def test_norm_bounds(zx_family):
    assert zx_family.alpha == pytest.approx(1.0)
    assert zx_family.beta == pytest.approx(np.sqrt(2))


def test_difference_encoding(zx_family):
    be = block_encode_difference(zx_family)
    top = be.unitary[:2, :2]
    assert np.allclose(top, (PAULI_X - PAULI_Z) / 2, atol=1e-12)
    assert np.allclose(be.unitary.conj().T @ be.unitary, np.eye(len(be.unitary)), atol=1e-12)
    assert opnorm(top) <= 1 + 1e-12
    zero = block_encode_difference(InterpolationFamily(PAULI_Z, PAULI_Z))
    assert np.allclose(zero.unitary[:2, :2], 0)


def test_reflection_witness_block(rng):
    H = random_hermitian(rng, 3, 0.8)
    be = reflection_witness(H, 1.0)
    assert np.allclose(be.unitary[:3, :3], H, atol=1e-12)


def test_interpolant_encoding(zx_family):
    assert interpolation_angle(0.0) == 0.0
    assert interpolation_angle(0.5) == pytest.approx(1 / 8)
    be = block_encode_interpolant(zx_family, 0.0)
    assert np.allclose(be.unitary[:2, :2], PAULI_Z, atol=1e-12)
    be = block_encode_interpolant(zx_family, 0.5)
    assert np.allclose(be.unitary[:2, :2], (PAULI_Z + PAULI_X) / 2, atol=1e-12)


def test_quantized_interpolant_bound(zx_family):
    be = block_encode_interpolant(zx_family, 1 / 3, angle_bits=8)
    measured = opnorm(be.unitary[:2, :2] * be.normalization - evaluate(zx_family, 1 / 3))
    bound = 4 * np.pi * zx_family.alpha * 2.0 ** -9
    assert be.angle_error_bound <= bound + 1e-15
    assert measured <= be.angle_error_bound + 1e-12


def test_rotation_and_quantization():
    assert np.allclose(rotation(0.25), [[0, -1], [1, 0]], atol=1e-15)
    assert quantize_angle(0.3, 4) == pytest.approx(5 / 16)
    assert abs(quantize_angle(0.123456, 10) - 0.123456) <= 2.0 ** -11


def test_gap_values():
    fam = InterpolationFamily(np.diag([0.0, 1.0, 3.0]), np.diag([0.0, 1.0, 3.0]))
    assert gap(fam, 0.3, 1) == pytest.approx(1.0)
    assert gap(grover_family(4), 0.5, 0) == pytest.approx(0.5)
    degenerate = InterpolationFamily(np.eye(2), np.eye(2))
    assert gap(degenerate, 0.5, 0) < 1e-8


def test_scan_gap_refines_minimum():
    fam = grover_family(64)
    g, at = scan_gap(fam, 0)
    assert g == pytest.approx(1 / 8, abs=1e-9)
    assert at == pytest.approx(0.5, abs=1e-4)
    assert np.all(gaps_on_grid(fam, np.linspace(0, 1, 11), 0) >= g - 1e-12)
