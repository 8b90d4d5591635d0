"""Built-in Hamiltonian pairs used by the tests and the command-line harness."""

from __future__ import annotations

import re
from functools import reduce

import numpy as np
from scipy.stats import unitary_group

from ._validation import ValidationError
from .family import PAULI_X, PAULI_Z, InterpolationFamily, gaps_on_grid

MAX_DIM = 1024


def grover_family(search_size: int) -> InterpolationFamily:
    """Projector pair ``I - |phi><phi|`` and ``I - |m><m|`` on span{|m>, |phi>}.

    Basis order is (|m>, |m_perp>) with ``|phi>`` the uniform superposition.
    """
    if search_size < 2:
        raise ValidationError("search size must be at least 2")
    a = 1 / np.sqrt(search_size)
    phi = np.array([a, np.sqrt(1 - a * a)])
    m = np.array([1.0, 0.0])
    eye = np.eye(2)
    return InterpolationFamily(eye - np.outer(phi, phi), eye - np.outer(m, m))


def _kron_all(ops):
    return reduce(np.kron, ops)


def ising_family(sites: int, field: float) -> InterpolationFamily:
    """Open transverse-field chain: field term alone, then the full chain."""
    if not 1 <= sites <= 10:
        raise ValidationError("ising chains are limited to 1..10 sites")
    eye = np.eye(2)
    dim = 2 ** sites

    def site_op(op, i):
        return _kron_all([op if j == i else eye for j in range(sites)])

    Hx = -field * sum(site_op(PAULI_X, i) for i in range(sites))
    Hzz = np.zeros((dim, dim), dtype=complex)
    for i in range(sites - 1):
        Hzz -= site_op(PAULI_Z, i) @ site_op(PAULI_Z, i + 1)
    return InterpolationFamily(Hx, Hzz + Hx)


def _planted_spectrum(rng, dim, level, sep):
    lo = -1 + (sep if level > 0 else 0.0)
    hi = 1 - (sep if level < dim - 1 else 0.0)
    if lo >= hi:
        raise ValidationError("gap floor too large for the [-1, 1] spectral window")
    ek = rng.uniform(lo, hi)
    below = rng.uniform(-1, ek - sep, level) if level else np.zeros(0)
    above = rng.uniform(ek + sep, 1, dim - level - 1) if level < dim - 1 else np.zeros(0)
    return np.sort(np.concatenate([below, [ek], above]))


def random_gapped_family(dim: int, gap_floor: float, seed: int, level: int = 0,
                         max_tries: int = 10_000) -> InterpolationFamily:
    """Random Hermitian pair whose level-``level`` gap stays above ``gap_floor``.

    Endpoint spectra are drawn in [-1, 1] with level ``level`` separated by
    ``2 gap_floor`` and rotated by Haar-random unitaries; draws whose path gap
    dips below the floor on a 201-point scan are rejected.
    """
    if not 1 <= dim <= MAX_DIM:
        raise ValidationError(f"dimension must lie in 1..{MAX_DIM}")
    if not 0 <= level < dim:
        raise ValidationError("level out of range")
    rng = np.random.default_rng(seed)
    grid = np.linspace(0, 1, 201)
    for _ in range(max_tries):
        mats = []
        for _ in range(2):
            E = _planted_spectrum(rng, dim, level, 2 * gap_floor)
            U = unitary_group.rvs(dim, random_state=rng) if dim > 1 else np.eye(1)
            mats.append((U * E) @ U.conj().T)
        fam = InterpolationFamily(*mats)
        if dim == 1 or gaps_on_grid(fam, grid, level).min() >= gap_floor:
            return fam
    raise ValidationError(
        f"no family with gap >= {gap_floor} after {max_tries} draws; try a smaller gap_floor")


def explicit_family(path: str) -> InterpolationFamily:
    with np.load(path) as data:
        if "H0" not in data or "H1" not in data:
            raise ValidationError(f"{path} must contain arrays H0 and H1")
        return InterpolationFamily(data["H0"], data["H1"])


_MODEL_RE = re.compile(r"^\s*(\w+)\s*\((.*)\)\s*$")


def parse_model(spec: str):
    """Split ``"name(a, b, c)"`` into the name and a list of argument strings."""
    m = _MODEL_RE.match(str(spec))
    if not m:
        raise ValidationError(f"model must look like name(args), got {spec!r}")
    args = [a.strip() for a in m.group(2).split(",")] if m.group(2).strip() else []
    return m.group(1), args


def generate_model(spec: str, level: int = 0) -> InterpolationFamily:
    name, args = parse_model(spec)
    try:
        if name == "grover" and len(args) == 1:
            return grover_family(int(args[0]))
        if name == "random_gapped" and len(args) == 3:
            return random_gapped_family(int(args[0]), float(args[1]), int(args[2]), level=level)
        if name == "ising" and len(args) == 2:
            return ising_family(int(args[0]), float(args[1]))
        if name == "explicit" and len(args) == 1:
            return explicit_family(args[0].strip("'\""))
    except ValueError as exc:
        if isinstance(exc, ValidationError):
            raise
        raise ValidationError(f"bad arguments in model {spec!r}: {exc}") from exc
    raise ValidationError(f"unknown model {spec!r}")
