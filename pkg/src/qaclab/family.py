"""Linear Hamiltonian interpolation and its block-encoding witnesses."""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Optional

import numpy as np

from ._validation import (ValidationError, check_hermitian, check_index,
                          check_unit_interval)
from .linalg import SpectralDecomposition, eig_hermitian, opnorm

_NORM_SLACK = 1e-9

HADAMARD = np.array([[1, 1], [1, -1]], dtype=complex) / np.sqrt(2)
PAULI_X = np.array([[0, 1], [1, 0]], dtype=complex)
PAULI_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
PAULI_Z = np.array([[1, 0], [0, -1]], dtype=complex)


@dataclass(frozen=True, eq=False)
class InterpolationFamily:
    """The path ``H(s) = (1 - s) H0 + s H1`` for ``s`` in [0, 1].

    Parameters
    ----------
    H0, H1 : array_like
        Hermitian endpoints of equal dimension.
    alpha : float, optional
        Upper bound on ``max(||H0||, ||H1||)``. Defaults to that maximum.
    beta : float, optional
        Upper bound on ``||H1 - H0||``. Defaults to that norm.
    """

    H0: np.ndarray
    H1: np.ndarray
    alpha: Optional[float] = None
    beta: Optional[float] = None

    def __post_init__(self):
        H0 = check_hermitian(self.H0, "H0")
        H1 = check_hermitian(self.H1, "H1")
        if H0.shape != H1.shape:
            raise ValidationError(f"H0 and H1 differ in shape: {H0.shape} vs {H1.shape}")
        H0 = (H0 + H0.conj().T) / 2
        H1 = (H1 + H1.conj().T) / 2
        max_norm = max(opnorm(H0), opnorm(H1))
        diff_norm = opnorm(H1 - H0)
        alpha = max_norm if self.alpha is None else float(self.alpha)
        beta = diff_norm if self.beta is None else float(self.beta)
        if alpha < max_norm - _NORM_SLACK:
            raise ValidationError(f"alpha={alpha} below max endpoint norm {max_norm}")
        if beta < diff_norm - _NORM_SLACK:
            raise ValidationError(f"beta={beta} below ||H1 - H0|| = {diff_norm}")
        if alpha <= 0:
            # a zero Hamiltonian still needs a positive normalization
            alpha = 1.0
        object.__setattr__(self, "H0", H0)
        object.__setattr__(self, "H1", H1)
        object.__setattr__(self, "alpha", alpha)
        object.__setattr__(self, "beta", beta)

    @property
    def dim(self) -> int:
        return self.H0.shape[0]

    @cached_property
    def h_prime(self) -> np.ndarray:
        return self.H1 - self.H0

    def scaled(self, factor: float) -> "InterpolationFamily":
        return InterpolationFamily(factor * self.H0, factor * self.H1)


def evaluate(fam: InterpolationFamily, s: float) -> np.ndarray:
    s = check_unit_interval(s)
    return (1 - s) * fam.H0 + s * fam.H1


def evaluate_many(fam: InterpolationFamily, s) -> np.ndarray:
    """Stack of ``H(s)`` for an array of s values, shape (len(s), d, d)."""
    s = np.asarray(s, dtype=float).reshape(-1, 1, 1)
    if np.any(s < 0) or np.any(s > 1):
        raise ValidationError("s values must lie in [0, 1]")
    return (1 - s) * fam.H0 + s * fam.H1


def derivative(fam: InterpolationFamily) -> np.ndarray:
    return fam.h_prime.copy()


def spectrum(fam: InterpolationFamily, s: float) -> SpectralDecomposition:
    return eig_hermitian(evaluate(fam, s))


def _gap_from_eigenvalues(E, k):
    gaps = []
    if k > 0:
        gaps.append(E[..., k] - E[..., k - 1])
    if k < E.shape[-1] - 1:
        gaps.append(E[..., k + 1] - E[..., k])
    if not gaps:
        return np.full(E.shape[:-1], np.inf)
    return np.min(gaps, axis=0)


def gap(fam: InterpolationFamily, s: float, k: int) -> float:
    """Distance from ``E_k(s)`` to the nearest other eigenvalue."""
    k = check_index(k, fam.dim)
    E = np.linalg.eigvalsh(evaluate(fam, s))
    return float(_gap_from_eigenvalues(E, k))


def gaps_on_grid(fam: InterpolationFamily, s_grid, k: int) -> np.ndarray:
    k = check_index(k, fam.dim)
    E = np.linalg.eigvalsh(evaluate_many(fam, s_grid))
    return _gap_from_eigenvalues(E, k)


# -- block encodings -------------------------------------------------------


@dataclass(frozen=True, eq=False)
class BlockEncodingDescriptor:
    """A Hermitian operator together with a unitary that block-encodes it.

    The ancilla register is the most significant tensor factor, so the
    top-left ``dim x dim`` block of ``unitary`` equals ``encoded / normalization``.
    """

    encoded: np.ndarray
    normalization: float
    ancilla_qubits: int
    unitary: np.ndarray = field(repr=False)
    angle_error_bound: Optional[float] = None

    @property
    def dim(self) -> int:
        return self.encoded.shape[0]

    @property
    def unitary_dim(self) -> int:
        return (2 ** self.ancilla_qubits) * self.dim

    def top_left_block(self) -> np.ndarray:
        d = self.dim
        return self.unitary[:d, :d]

    def check(self, atol: float = 1e-10) -> float:
        """Largest violation among unitarity and the block identity."""
        U = self.unitary
        unit = opnorm(U.conj().T @ U - np.eye(U.shape[0]))
        block = opnorm(self.top_left_block() - self.encoded / self.normalization)
        worst = max(unit, block)
        if worst > atol:
            raise ValidationError(f"block encoding witness off by {worst:.3e}")
        if opnorm(self.encoded) > self.normalization + _NORM_SLACK:
            raise ValidationError("encoded operator exceeds its normalization")
        return worst


def reflection_witness(H, alpha: float) -> BlockEncodingDescriptor:
    """One-ancilla unitary dilation ``[[A, S], [S, -A]]`` with ``A = H/alpha``.

    ``S = sqrt(I - A^2)`` commutes with ``A``, so the dilation is a Hermitian
    unitary.
    """
    H = check_hermitian(H)
    if opnorm(H) > alpha + _NORM_SLACK:
        raise ValidationError("||H|| exceeds alpha")
    dec = eig_hermitian(H / alpha)
    A = dec.reconstruct()
    S = dec.function(lambda e: np.sqrt(np.clip(1 - e * e, 0.0, None)))
    U = np.block([[A, S], [S, -A]])
    return BlockEncodingDescriptor(H, float(alpha), 1, U)


def _endpoint_witnesses(fam, witnesses):
    if witnesses is None:
        return reflection_witness(fam.H0, fam.alpha), reflection_witness(fam.H1, fam.alpha)
    w0, w1 = witnesses
    if w0 is None or w1 is None:
        raise ValidationError("both endpoint block encodings are required")
    if w0.ancilla_qubits != w1.ancilla_qubits or w0.dim != w1.dim:
        raise ValidationError("endpoint witnesses must share ancilla count and dimension")
    if not (np.isclose(w0.normalization, fam.alpha) and np.isclose(w1.normalization, fam.alpha)):
        raise ValidationError("endpoint witnesses must be normalized by alpha")
    return w0, w1


def _select(U0, U1):
    z = np.zeros_like(U0)
    return np.block([[U0, z], [z, U1]])


def block_encode_difference(fam: InterpolationFamily, witnesses=None) -> BlockEncodingDescriptor:
    """Block-encode ``H1 - H0`` with normalization ``2 alpha`` and one extra ancilla.

    The witness is ``(Had x I) select(O_H0, O_H1) ((X Z Had) x I)``.
    """
    w0, w1 = _endpoint_witnesses(fam, witnesses)
    inner = w0.unitary.shape[0]
    eye = np.eye(inner)
    prep = PAULI_X @ PAULI_Z @ HADAMARD
    U = np.kron(HADAMARD, eye) @ _select(w0.unitary, w1.unitary) @ np.kron(prep, eye)
    desc = BlockEncodingDescriptor(fam.h_prime.copy(), 2 * fam.alpha, w0.ancilla_qubits + 1, U)
    desc.check()
    return desc


def rotation(theta: float) -> np.ndarray:
    """``exp(-i 2 pi theta Y)``, with ``theta`` measured in turns."""
    c, s = np.cos(2 * np.pi * theta), np.sin(2 * np.pi * theta)
    return np.array([[c, -s], [s, c]])


def interpolation_angle(s: float) -> float:
    return float(np.arcsin(np.sqrt(s)) / (2 * np.pi))


def quantize_angle(theta: float, bits: int) -> float:
    """Nearest multiple of ``2^-bits`` (ties to even)."""
    return float(np.round(theta * 2.0 ** bits)) / 2.0 ** bits


def block_encode_interpolant(fam: InterpolationFamily, s: float, angle_bits: Optional[int] = None,
                             witnesses=None) -> BlockEncodingDescriptor:
    """Block-encode ``H(s)`` by conjugating the select oracle with a Y rotation.

    With ``angle_bits`` the rotation angle is rounded to that many bits and the
    encoded operator is the perturbed ``H~(s)``; ``angle_error_bound`` then holds
    ``4 pi alpha |theta - theta~|``, an upper bound on ``||H(s) - H~(s)||``.
    """
    s = check_unit_interval(s)
    w0, w1 = _endpoint_witnesses(fam, witnesses)
    theta = interpolation_angle(s)
    bound = None
    if angle_bits is not None:
        if int(angle_bits) != angle_bits or angle_bits < 0:
            raise ValidationError("angle_bits must be a nonnegative integer")
        used = quantize_angle(theta, int(angle_bits))
        bound = 4 * np.pi * fam.alpha * abs(theta - used)
    else:
        used = theta
    R = np.kron(rotation(used), np.eye(w0.unitary.shape[0]))
    U = R.conj().T @ _select(w0.unitary, w1.unitary) @ R
    c2 = np.cos(2 * np.pi * used) ** 2
    encoded = c2 * fam.H0 + (1 - c2) * fam.H1
    desc = BlockEncodingDescriptor(encoded, fam.alpha, w0.ancilla_qubits + 1, U, bound)
    desc.check()
    return desc


def scan_gap(fam: InterpolationFamily, k: int, points: int = 201):
    """Minimum gap at level k along the path and where it occurs.

    A uniform scan locates the smallest sample; golden-section search then
    refines it inside the neighbouring grid cells.
    """
    from scipy.optimize import minimize_scalar

    grid = np.linspace(0.0, 1.0, points)
    g = gaps_on_grid(fam, grid, k)
    i = int(np.argmin(g))
    best_s, best = float(grid[i]), float(g[i])
    if 0 < i < points - 1 and g[i] < g[i - 1] and g[i] < g[i + 1]:
        res = minimize_scalar(lambda s: gap(fam, float(np.clip(s, 0, 1)), k), method="golden",
                              bracket=(grid[i - 1], grid[i], grid[i + 1]),
                              options={"xtol": 1e-10})
        if res.fun < best:
            best_s, best = float(np.clip(res.x, 0, 1)), float(res.fun)
    return best, best_s
