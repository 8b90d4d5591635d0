"""Amplitude encoding of the filter weights by a cascade of conditional rotations.

Level ``i`` of the cascade splits each of its ``2**i`` dyadic regions of the
time axis in half and rotates the amplitude between the halves by the angle
``arcsin(sqrt(right mass / region mass))``. Angles are kept in turns, so a
rotation by ``eta`` is ``R(eta) = exp(-i 2 pi eta Y)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
from scipy.integrate import quad

from ._validation import ValidationError
from .family import quantize_angle, rotation
from .qac import QacParams, bin_masses

MAX_BINS = 1 << 20


@dataclass(frozen=True)
class WeightTable:
    weights: np.ndarray
    params: QacParams

    @property
    def total(self) -> float:
        return float(self.weights.sum())


@dataclass(frozen=True)
class AngleTable:
    """Angles per level; level ``i`` holds ``2**i`` values in [0, 1/4]."""

    levels: tuple

    @property
    def depth(self) -> int:
        return len(self.levels)

    def quantized(self, bits: int) -> "AngleTable":
        return AngleTable(tuple(np.array([quantize_angle(t, bits) for t in lvl])
                                for lvl in self.levels))


def qubit_count(N: int) -> int:
    return max(0, math.ceil(math.log2(N))) if N > 1 else 0


def _check_size(params: QacParams):
    if params.N > MAX_BINS:
        raise ValidationError(f"N = {params.N} exceeds the supported {MAX_BINS} bins")


def weights(params: QacParams) -> WeightTable:
    """Normalized bin masses ``W_n``, n = 1..N, summing to one."""
    _check_size(params)
    m = bin_masses(params.delta, params.T, params.N, np.arange(1, params.N + 1))
    return WeightTable(m / m.sum(), params)


def _leaf_masses(params: QacParams, weight_fn: Optional[Callable]):
    L = qubit_count(params.N)
    leaves = 1 << L
    if weight_fn is None:
        out = np.zeros(leaves)
        out[:params.N] = bin_masses(params.delta, params.T, params.N, np.arange(1, params.N + 1))
        return out
    h = params.step
    out = np.empty(leaves)
    probe = np.linspace(0, 1, 9)
    for j in range(leaves):
        a, b = j * h, (j + 1) * h
        vals = np.asarray(weight_fn(a + (b - a) * probe), dtype=float)
        if np.any(vals < 0):
            raise ValidationError(f"weight function is negative on [{a}, {b}]")
        out[j] = quad(weight_fn, a, b, epsabs=1e-14, epsrel=1e-13)[0]
    if np.any(out < 0):
        raise ValidationError("weight function has negative mass")
    return out


def angles_from_masses(leaves: np.ndarray) -> AngleTable:
    """Cascade angles for the given leaf masses (length a power of two)."""
    leaves = np.asarray(leaves, dtype=float)
    L = int(round(math.log2(len(leaves))))
    if 1 << L != len(leaves):
        raise ValidationError("leaf count must be a power of two")
    if np.any(leaves < 0):
        raise ValidationError("weights must be nonnegative")
    # tree[i] holds the 2**i region masses at level i
    tree = [leaves]
    for _ in range(L):
        tree.append(tree[-1].reshape(-1, 2).sum(axis=1))
    tree.reverse()
    levels = []
    for i in range(L):
        region = tree[i]
        right = tree[i + 1][1::2]
        with np.errstate(invalid="ignore", divide="ignore"):
            ratio = np.where(region > 0, right / region, 0.0)
        levels.append(np.arcsin(np.sqrt(np.clip(ratio, 0.0, 1.0))) / (2 * np.pi))
    return AngleTable(tuple(levels))


def angles(params: QacParams, weight_fn: Optional[Callable] = None) -> AngleTable:
    """Cascade angles for ``weight_fn`` on ``[0, 2**L T/N]``.

    The default weight is the filter ``W`` restricted to ``[0, T]`` and
    extended by zero beyond it.
    """
    _check_size(params)
    return angles_from_masses(_leaf_masses(params, weight_fn))


def run_cascade(table: AngleTable) -> np.ndarray:
    """Apply the conditional rotations level by level to the all-zero register."""
    amp = np.ones(1)
    for lvl in table.levels:
        c, s = np.cos(2 * np.pi * lvl), np.sin(2 * np.pi * lvl)
        nxt = np.empty(2 * len(amp))
        # rotation applied to |0> on the new qubit, conditioned on the prefix
        nxt[0::2] = amp * c
        nxt[1::2] = amp * s
        amp = nxt
    return amp


def build_state_exact(params: QacParams, weight_fn: Optional[Callable] = None) -> np.ndarray:
    """Amplitudes ``sqrt(W_n)`` padded with zeros to ``2**ceil(log2 N)`` slots."""
    return run_cascade(angles(params, weight_fn))


def build_state_quantized(params: QacParams, bits: int, weight_fn: Optional[Callable] = None):
    """Cascade with every angle rounded to ``bits`` bits of a turn.

    Returns ``(state, bound)`` with ``bound = L 2 pi 2**-(bits+1)``, the sum
    over the ``L`` levels of the per-rotation error.
    """
    if int(bits) != bits or bits < 1:
        raise ValidationError("bits must be a positive integer")
    table = angles(params, weight_fn)
    state = run_cascade(table.quantized(int(bits)))
    return state, table.depth * 2 * np.pi * 2.0 ** -(bits + 1)


def rotation_bit_decomposition(x: int, bits: int) -> np.ndarray:
    """``R(x / 2**bits)`` as the product of one rotation per set bit of ``x``."""
    if int(bits) != bits or bits < 1:
        raise ValidationError("bits must be a positive integer")
    if int(x) != x or not 0 <= x < 1 << bits:
        raise ValidationError(f"x must be an integer in [0, 2**{bits})")
    x, bits = int(x), int(bits)
    out = np.eye(2)
    for k in range(bits):
        if (x >> k) & 1:
            out = rotation(2.0 ** (k - bits)) @ out
    direct = rotation(x / 2.0 ** bits)
    err = float(np.abs(out - direct).max())
    if err > 1e-14:
        raise AssertionError(f"bit decomposition off by {err:.2e}")
    return out
