"""Dense Hermitian spectral tools: eigendecomposition, exponentials, ordered products."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from ._validation import ValidationError, check_hermitian

DEGENERACY_TOL = 1e-10


class ConvergenceError(RuntimeError):
    """Step refinement did not reach the requested tolerance."""

    def __init__(self, message, distance, steps):
        super().__init__(message)
        self.distance = distance
        self.steps = steps


@dataclass(frozen=True)
class SpectralDecomposition:
    """Sorted eigenvalues with a phase-fixed orthonormal eigenbasis.

    Column ``j`` of ``eigenvectors`` pairs with ``eigenvalues[j]``.
    """

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray

    def reconstruct(self) -> np.ndarray:
        V = self.eigenvectors
        return (V * self.eigenvalues) @ V.conj().T

    def function(self, f) -> np.ndarray:
        """Apply a scalar function through the spectrum, ``V f(E) V^dag``."""
        V = self.eigenvectors
        return (V * f(self.eigenvalues)) @ V.conj().T


def _fix_phases(V):
    # make the largest-magnitude component of each column real and positive;
    # ties go to the smallest row index
    mags = np.abs(V)
    cols = np.arange(V.shape[1])
    top = mags.max(axis=0)
    rows = np.argmax(mags >= top - 1e-12 * np.maximum(top, 1.0), axis=0)
    pivot = V[rows, cols]
    return V * (np.abs(pivot) / pivot)


def _canonical_cluster_basis(Vc):
    # basis of span(Vc) that depends only on the subspace: Gram-Schmidt of the
    # projected standard basis vectors, taken in index order
    d, m = Vc.shape
    P = Vc @ Vc.conj().T
    basis = []
    for j in range(d):
        v = P[:, j].copy()
        for b in basis:
            v -= b * (b.conj() @ v)
        nrm = np.linalg.norm(v)
        if nrm > 1e-6:
            # re-orthogonalize once for stability
            for b in basis:
                v -= b * (b.conj() @ v)
            basis.append(v / np.linalg.norm(v))
            if len(basis) == m:
                break
    return np.column_stack(basis)


def eig_hermitian(H) -> SpectralDecomposition:
    """Eigendecomposition with a reproducible eigenvector convention.

    Eigenvalues ascend. Each eigenvector has its largest-magnitude component
    real and positive. Eigenvalues within ``1e-10`` are treated as one
    degenerate cluster whose basis is chosen from the cluster projector alone,
    so it does not depend on the LAPACK driver.
    """
    A = check_hermitian(H)
    E, V = np.linalg.eigh(A)
    d = len(E)
    start = 0
    while start < d:
        stop = start + 1
        while stop < d and E[stop] - E[stop - 1] <= DEGENERACY_TOL * max(1.0, abs(E[stop])):
            stop += 1
        if stop - start > 1:
            V[:, start:stop] = _canonical_cluster_basis(V[:, start:stop])
            E[start:stop] = E[start:stop].mean()
        start = stop
    return SpectralDecomposition(E, _fix_phases(V))


def expm_i(H, t: float) -> np.ndarray:
    """Return ``exp(-i H t)`` by spectral synthesis."""
    dec = eig_hermitian(H)
    return dec.function(lambda e: np.exp(-1j * e * t))


def batched_expm_i(Hs: np.ndarray, t) -> np.ndarray:
    """``exp(-i H t)`` for a stack of Hermitian matrices of shape (B, d, d)."""
    E, V = np.linalg.eigh(Hs)
    phase = np.exp(-1j * E * np.asarray(t, dtype=float).reshape(-1, 1))
    return (V * phase[:, None, :]) @ np.conj(np.swapaxes(V, -1, -2))


def opnorm(A) -> float:
    """Spectral norm (largest singular value)."""
    A = np.asarray(A)
    if A.size == 0:
        return 0.0
    return float(np.linalg.norm(A, 2))


def phase_aligned_distance(psi, phi) -> float:
    """min over global phases of ``||psi - e^{i theta} phi||``."""
    psi = np.asarray(psi).reshape(-1)
    phi = np.asarray(phi).reshape(-1)
    a = np.vdot(psi, psi).real + np.vdot(phi, phi).real - 2 * abs(np.vdot(psi, phi))
    return float(np.sqrt(max(a, 0.0)))


def _midpoint_product(D, s0, s1, steps, batch=512, vectorized=False):
    h = (s1 - s0) / steps
    mids = s0 + (np.arange(steps) + 0.5) * h
    U = None
    for lo in range(0, steps, batch):
        chunk = mids[lo:lo + batch]
        if vectorized:
            gens = np.asarray(D(chunk), dtype=complex)
        else:
            gens = np.stack([np.asarray(D(s), dtype=complex) for s in chunk])
        # exp(i D h) = expm_i(D, -h)
        factors = batched_expm_i(gens, -h)
        for F in factors:
            U = F if U is None else F @ U
    return U


def ordered_exponential(D: Callable[[float], np.ndarray], s0: float, s1: float,
                        steps: int, vectorized: bool = False) -> np.ndarray:
    """Midpoint-rule solution of ``dU/ds = i D(s) U`` from ``s0`` to ``s1``.

    Later factors multiply on the left, so the product runs in increasing s.
    With ``vectorized`` the generator is called once per batch with an array
    of s values and must return the stack of matrices.
    """
    if int(steps) != steps or steps < 1:
        raise ValidationError("steps must be a positive integer")
    return _midpoint_product(D, float(s0), float(s1), int(steps), vectorized=vectorized)


@dataclass(frozen=True)
class RefinedProduct:
    unitary: np.ndarray
    steps: int
    achieved_tol: float


def ordered_exponential_refined(D, s0, s1, tol, steps=16, max_steps=1 << 18,
                                vectorized=False) -> RefinedProduct:
    """Double the step count until successive products agree to ``tol``.

    The midpoint rule is second order, so the reported distance between the
    last two iterates overestimates the error of the finer one by about 4x.
    """
    prev = ordered_exponential(D, s0, s1, steps, vectorized)
    while True:
        steps *= 2
        cur = ordered_exponential(D, s0, s1, steps, vectorized)
        dist = opnorm(cur - prev)
        if dist < tol:
            return RefinedProduct(cur, steps, dist)
        if steps >= max_steps:
            raise ConvergenceError(
                f"ordered exponential not converged at {steps} steps (distance {dist:.3e})",
                dist, steps)
        prev = cur
