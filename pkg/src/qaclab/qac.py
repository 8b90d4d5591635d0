"""Quasi-adiabatic continuation generators, their discretization and error bounds.

The filter is the odd function ``W(t) = sgn(t) erfc(delta |t| / sqrt 2) / 2``.
Its continuous generator is evaluated from a spectral closed form; the
discretized generator reduces, in the instantaneous eigenbasis, to the scalar
sine sum ``S(w) = sum_n c_n sin(w n T/N)`` handled by :class:`QacKernel`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.special import erfc, erfcx

from ._validation import (GapError, ValidationError, check_index, check_positive)
from .family import InterpolationFamily, evaluate, evaluate_many, spectrum
from .linalg import opnorm

SQRT2 = math.sqrt(2.0)
SQRT2PI = math.sqrt(2.0 * math.pi)
GAP_FLOOR = 1e-8


class InfeasibleParameters(ValidationError):
    pass


def filter_w(t, delta):
    """Gaussian density ``delta / sqrt(2 pi) exp(-delta^2 t^2 / 2)``."""
    t = np.asarray(t, dtype=float)
    return delta / SQRT2PI * np.exp(-0.5 * (delta * t) ** 2)


def filter_W(t, delta):
    """Odd filter ``sgn(t) erfc(delta |t| / sqrt 2) / 2``; equals 1/2 at t = 0."""
    t = np.asarray(t, dtype=float)
    val = 0.5 * erfc(delta * np.abs(t) / SQRT2)
    out = np.where(t < 0, -val, val)
    return float(out) if out.ndim == 0 else out


def _antiderivative(t, delta):
    # F(t) = [t erfc(x) - sqrt(2/pi)/delta exp(-x^2)] / 2 with x = delta t / sqrt 2,
    # written with erfcx so the tail neither underflows nor overflows
    t = np.asarray(t, dtype=float)
    x = delta * t / SQRT2
    with np.errstate(invalid="ignore", over="ignore"):
        core = 0.5 * np.exp(-x * x) * (t * erfcx(x) - math.sqrt(2 / math.pi) / delta)
    return np.where(np.isinf(t), 0.0, core)


def weight_integral(t1, t2, delta):
    """Closed-form ``integral_{t1}^{t2} W(t) dt`` for ``0 <= t1 <= t2`` (inf allowed)."""
    delta = check_positive(delta, "delta")
    t1a = np.asarray(t1, dtype=float)
    t2a = np.asarray(t2, dtype=float)
    if np.any(t1a < 0) or np.any(t2a < t1a):
        raise ValidationError("weight_integral needs 0 <= t1 <= t2")
    out = np.maximum(_antiderivative(t2a, delta) - _antiderivative(t1a, delta), 0.0)
    out = np.where(t1a == t2a, 0.0, out)
    return float(out) if out.ndim == 0 else out


def normalization(delta, T):
    """Total filter mass on ``[0, T]``; at most ``1 / (sqrt(2 pi) delta)``."""
    return weight_integral(0.0, T, delta)


_GL_X, _GL_W = np.polynomial.legendre.leggauss(4)


def bin_masses(delta, T, N, n):
    """Filter mass of bins ``[(n-1)T/N, nT/N]`` for an integer array ``n``.

    Narrow bins use 4-point Gauss-Legendre, which avoids the cancellation that
    the closed form suffers when the bin is much narrower than ``1/delta``.
    """
    n = np.asarray(n, dtype=np.int64)
    h = T / N
    lo = (n - 1) * h
    if delta * h <= 0.05:
        mid = lo + 0.5 * h
        acc = np.zeros(n.shape)
        for x, w in zip(_GL_X, _GL_W):
            acc += w * erfc(delta * (mid + 0.5 * h * x) / SQRT2)
        return 0.25 * h * acc
    return weight_integral(lo, lo + h, delta)


@dataclass(frozen=True)
class QacParams:
    """Filter width, truncation time and bin count, with the bounds they came from."""

    delta: float
    T: float
    N: int
    epsilon: float = float("nan")
    alpha: float = float("nan")
    beta: float = float("nan")
    h_prime_avg: float = float("nan")
    gamma: float = float("nan")

    def __post_init__(self):
        check_positive(self.delta, "delta")
        check_positive(self.T, "T")
        if int(self.N) != self.N or self.N < 1:
            raise ValidationError("N must be a positive integer")
        object.__setattr__(self, "N", int(self.N))

    @property
    def normalization(self) -> float:
        return normalization(self.delta, self.T)

    @property
    def step(self) -> float:
        return self.T / self.N


def choose_parameters(alpha, h_prime_avg, gamma, epsilon, beta=None) -> QacParams:
    """Filter width, cutoff time and bin count that make each error term at most epsilon/3."""
    for name, v in (("alpha", alpha), ("h_prime_avg", h_prime_avg), ("gamma", gamma),
                    ("epsilon", epsilon)):
        check_positive(v, name)
    if epsilon >= 1:
        raise InfeasibleParameters("epsilon must be below 1")
    a1 = math.log(3 * h_prime_avg / (gamma * epsilon))
    if a1 <= 0:
        raise InfeasibleParameters("3 <||H'||> / (gamma epsilon) must exceed 1")
    delta = gamma / math.sqrt(2 * a1)
    # smallest T with 2 sqrt(2 pi) <||H'||> exp(-(delta T)^2 / 2) / delta <= epsilon/3
    a2 = math.log(6 * SQRT2PI * h_prime_avg / (delta * epsilon))
    if a2 <= 0:
        raise InfeasibleParameters("cutoff-time logarithm is not positive")
    T = math.sqrt(2 * a2) / delta
    N = math.ceil(6 * math.sqrt(2 / math.pi) * alpha * h_prime_avg * T / (delta * epsilon))
    return QacParams(delta, T, N, float(epsilon), float(alpha),
                     float(h_prime_avg if beta is None else beta), float(h_prime_avg), float(gamma))


def composite_bound(params: QacParams, gamma=None, h_prime=None, h_norm=None):
    """Integrand bound on the tracking error of the discretized flow.

    Returns the three terms (gap filter leakage, time cutoff, binning) whose sum
    bounds ``||psi_k(1) - U psi_k(0)||`` for a linear path of unit length.
    """
    g = params.gamma if gamma is None else gamma
    hp = params.h_prime_avg if h_prime is None else h_prime
    hn = params.alpha if h_norm is None else h_norm
    d, T, N = params.delta, params.T, params.N
    return (hp * math.exp(-g * g / (2 * d * d)) / g,
            hp * 2 * SQRT2PI * math.exp(-0.5 * (d * T) ** 2) / d,
            hp * 2 * math.sqrt(2 / math.pi) * hn * T / (d * N))


# -- the discretized sine sum ---------------------------------------------

_BLOCK = 2048
_CHUNK_BLOCKS = 128
_DIRECT_WORK = 4_000_000


class QacKernel:
    """The odd function ``S(w) = sum_{n=1}^{N} c_n sin(w n T/N)``.

    ``c_n`` is the filter mass of the n-th bin. ``exact`` evaluates the sum
    directly with blocked matrix products. ``__call__`` does the same for small
    jobs and otherwise uses a Chebyshev interpolant on ``[0, omega_max]``
    built from exact node values, with degree grown until the trailing
    coefficients reach the rounding floor of the node values.
    """

    def __init__(self, delta: float, T: float, N: int, omega_max: Optional[float] = None):
        self.delta = float(delta)
        self.T = float(T)
        self.N = int(N)
        self.h = self.T / self.N
        self._cheb = None
        self._omega_max = None
        self._mass_cache = None
        if omega_max is not None:
            self.build_interpolant(omega_max)

    @classmethod
    def from_params(cls, params: QacParams, omega_max=None):
        return cls(params.delta, params.T, params.N, omega_max)

    def masses(self, n):
        if self._mass_cache is None:
            self._mass_cache = bin_masses(self.delta, self.T, self.N, np.arange(1, self.N + 1))
        return self._mass_cache[np.asarray(n) - 1]

    def exact(self, omega) -> np.ndarray:
        shape = np.shape(omega)
        w = np.asarray(omega, dtype=float).reshape(-1)
        out = np.concatenate([self._exact_flat(w[i:i + 4096]) for i in range(0, len(w), 4096)]
                             or [np.zeros(0)])
        return out.reshape(shape) if shape else float(out[0])

    def _exact_flat(self, w):
        block = min(_BLOCK, self.N)
        acc = np.zeros(w.shape, dtype=complex)
        inner = np.exp(1j * np.outer(np.arange(block) * self.h, w))
        cos_in, sin_in = inner.real.copy(), inner.imag.copy()
        step = block * _CHUNK_BLOCKS
        for n0 in range(1, self.N + 1, step):
            c = self.masses(np.arange(n0, min(n0 + step, self.N + 1)))
            pad = (-len(c)) % block
            C = np.concatenate([c, np.zeros(pad)]).reshape(-1, block)
            P = (C @ cos_in) + 1j * (C @ sin_in)
            base = (n0 + np.arange(C.shape[0]) * block) * self.h
            acc += np.sum(P * np.exp(1j * np.outer(base, w)), axis=0)
        return acc.imag

    def build_interpolant(self, omega_max: float):
        a = float(omega_max)
        if a <= 0:
            self._cheb, self._omega_max = None, None
            return self
        band = 0.5 * a * self.T
        deg = int(band + 12 * band ** (1 / 3) + 40)
        while True:
            cheb = np.polynomial.Chebyshev.interpolate(self.exact, deg, domain=[0.0, a])
            coef = np.abs(cheb.coef)
            scale = max(coef.max(), 1e-300)
            if coef[-8:].max() <= 3e-14 * scale or deg > 20000:
                break
            deg = int(deg * 1.5)
        self._cheb, self._omega_max = cheb, a
        return self

    def __call__(self, omega) -> np.ndarray:
        w = np.asarray(omega, dtype=float)
        aw = np.abs(w)
        if self._cheb is None or w.size * self.N <= _DIRECT_WORK:
            return np.sign(w) * self.exact(aw)
        if aw.max() > self._omega_max * (1 + 1e-12):
            raise ValidationError("frequency outside the interpolation range")
        return np.sign(w) * self._cheb(np.minimum(aw, self._omega_max))


def _in_eigenbasis(fam, s):
    dec = spectrum(fam, s)
    V = dec.eigenvectors
    return dec, V, V.conj().T @ fam.h_prime @ V


def exact_qac(fam: InterpolationFamily, s: float, delta: float) -> np.ndarray:
    """Continuous generator ``D_delta(s)``.

    In the eigenbasis of ``H(s)`` the (j, l) entry is
    ``i H'_jl (1 - exp(-w^2 / (2 delta^2))) / w`` with ``w = E_j - E_l``,
    and zero when ``w = 0``.
    """
    delta = check_positive(delta, "delta")
    dec, V, Hp = _in_eigenbasis(fam, s)
    E = dec.eigenvalues
    w = E[:, None] - E[None, :]
    with np.errstate(divide="ignore", invalid="ignore"):
        f = np.where(w == 0, 0.0, -np.expm1(-w * w / (2 * delta * delta)) / w)
    Deig = 1j * Hp * f
    D = V @ Deig @ V.conj().T
    return (D + D.conj().T) / 2


def _kernel_for(params, kernel):
    if kernel is not None:
        return kernel
    return QacKernel.from_params(params)


def discretized_qac(fam: InterpolationFamily, s: float, params: QacParams,
                    kernel: Optional[QacKernel] = None) -> np.ndarray:
    """Discretized generator ``D_{delta,T,N}(s)``.

    Equal to ``sum_{n=+-1..+-N} c_n exp(iH nT/N) H' exp(-iH nT/N)`` with signed
    bin masses; in the eigenbasis this is ``2 i H'_jl S(E_j - E_l)``.
    """
    dec, V, Hp = _in_eigenbasis(fam, s)
    E = dec.eigenvalues
    S = _kernel_for(params, kernel)(E[:, None] - E[None, :])
    D = V @ (2j * Hp * S) @ V.conj().T
    return (D + D.conj().T) / 2


def discretized_qac_batch(fam: InterpolationFamily, s, kernel: QacKernel) -> np.ndarray:
    """``D_{delta,T,N}`` at many points at once, shape (len(s), d, d)."""
    H = evaluate_many(fam, s)
    E, V = np.linalg.eigh(H)
    Vh = np.conj(np.swapaxes(V, -1, -2))
    Hp = Vh @ fam.h_prime @ V
    d = fam.dim
    iu = np.triu_indices(d, 1)
    w = E[:, iu[0]] - E[:, iu[1]]
    S = np.zeros((len(E), d, d))
    if d > 1:
        vals = kernel(w.reshape(-1)).reshape(w.shape)
        S[:, iu[0], iu[1]] = vals
        S[:, iu[1], iu[0]] = -vals
    D = V @ (2j * Hp * S) @ Vh
    return 0.5 * (D + np.conj(np.swapaxes(D, -1, -2)))


def tracking_residual(fam: InterpolationFamily, s: float, k: int, delta: float):
    """Residual of the continuous generator against the true eigenvector velocity.

    ``lhs = || d/ds psi_k - i D_delta psi_k ||`` with the velocity from
    first-order perturbation theory; ``rhs = exp(-g^2 / (2 delta^2)) ||H'|| / g``
    with ``g`` the gap at level k.
    """
    k = check_index(k, fam.dim)
    delta = check_positive(delta, "delta")
    dec, V, Hp = _in_eigenbasis(fam, s)
    E = dec.eigenvalues
    others = np.arange(fam.dim) != k
    g = np.min(np.abs(E[others] - E[k])) if others.any() else np.inf
    if g <= GAP_FLOOR:
        raise GapError(f"gap {g:.3e} at s={s} too small for level {k}", s=s, gap=g)
    coef = np.zeros(fam.dim, dtype=complex)
    coef[others] = Hp[others, k] / (E[k] - E[others])
    velocity = V @ coef
    D = exact_qac(fam, s, delta)
    lhs = float(np.linalg.norm(velocity - 1j * D @ V[:, k]))
    hp_norm = opnorm(fam.h_prime)
    rhs = 0.0 if not np.isfinite(g) else float(math.exp(-g * g / (2 * delta * delta)) * hp_norm / g)
    return lhs, rhs



def discretization_bound(fam: InterpolationFamily, s: float, params: QacParams):
    """Right-hand side of the continuous-vs-discretized generator bound."""
    hp = opnorm(fam.h_prime)
    hn = opnorm(evaluate(fam, s))
    d, T, N = params.delta, params.T, params.N
    return (2 * SQRT2PI * hp * math.exp(-0.5 * (d * T) ** 2) / d
            + 2 * math.sqrt(2 / math.pi) * hn * hp * T / (d * N))


def discretization_residual(fam: InterpolationFamily, s: float, params: QacParams, kernel=None):
    lhs = opnorm(exact_qac(fam, s, params.delta) - discretized_qac(fam, s, params, kernel))
    return lhs, discretization_bound(fam, s, params)
