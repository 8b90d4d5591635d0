"""Input checks shared across the package, in the spirit of sklearn's check_array."""

from __future__ import annotations

import numbers

import numpy as np

HERMITIAN_ATOL = 1e-12


class ValidationError(ValueError):
    """Raised when an input violates a documented precondition."""


class GapError(ValidationError):
    """Raised when a spectral gap is too small for a gap-dependent routine."""

    def __init__(self, message, s=None, gap=None):
        super().__init__(message)
        self.s = s
        self.gap = gap


def check_hermitian(H, name="H", atol=HERMITIAN_ATOL):
    """Return ``H`` as a square complex array, raising if it is not Hermitian."""
    A = np.asarray(H)
    if A.ndim == 0:
        A = A.reshape(1, 1)
    if A.ndim != 2 or A.shape[0] != A.shape[1] or A.shape[0] < 1:
        raise ValidationError(f"{name} must be a nonempty square matrix, got shape {A.shape}")
    if not np.all(np.isfinite(A)):
        raise ValidationError(f"{name} contains non-finite entries")
    A = A.astype(complex)
    scale = max(1.0, float(np.max(np.abs(A))))
    err = float(np.max(np.abs(A - A.conj().T)))
    if err > atol * scale:
        raise ValidationError(f"{name} is not Hermitian (max |H - H^dag| = {err:.3e})")
    return A


def check_state(psi, dim=None, name="state", subnormalized=False, atol=1e-12):
    v = np.asarray(psi, dtype=complex).reshape(-1)
    if dim is not None and v.shape[0] != dim:
        raise ValidationError(f"{name} has dimension {v.shape[0]}, expected {dim}")
    nrm = float(np.linalg.norm(v))
    if subnormalized:
        if nrm > 1 + atol:
            raise ValidationError(f"{name} norm {nrm} exceeds 1")
    elif abs(nrm - 1.0) > atol:
        raise ValidationError(f"{name} must be normalized (norm {nrm})")
    return v


def check_unit_interval(s, name="s"):
    s = float(s)
    if not 0.0 <= s <= 1.0:
        raise ValidationError(f"{name}={s} outside [0, 1]")
    return s


def check_positive(x, name):
    if not isinstance(x, numbers.Real) or not np.isfinite(x) or x <= 0:
        raise ValidationError(f"{name} must be a positive finite number, got {x!r}")
    return float(x)


def check_fraction(x, name):
    x = check_positive(x, name)
    if x >= 1:
        raise ValidationError(f"{name} must lie in (0, 1), got {x}")
    return x


def check_index(k, dim, name="k"):
    if not isinstance(k, numbers.Integral) or not 0 <= k < dim:
        raise ValidationError(f"{name}={k!r} out of range for dimension {dim}")
    return int(k)
