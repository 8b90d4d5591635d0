"""Ground-state preparation: adiabatic evolution, energy bisection, spectral filtering.

The projection oracle is realized spectrally as the smoothed step
``p(E) = erfc((E - x) / sigma) / 2`` with ``sigma = h / erfcinv(eps')``, so
``p >= 1 - eps'/2`` below ``x - h`` and ``p <= eps'/2`` above ``x + h``.
Amplitude comparisons are exact; nothing is sampled.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple, Optional

import numpy as np
from scipy.integrate import simpson
from scipy.special import erfc, erfcinv

from ._validation import (GapError, ValidationError, check_fraction, check_hermitian,
                          check_positive)
from .family import (InterpolationFamily, evaluate_many, gaps_on_grid, scan_gap,
                     spectrum)
from .linalg import (eig_hermitian, opnorm, ordered_exponential_refined,
                     phase_aligned_distance)
from .propagation import choose_KM, dyson_truncated

GAP_MIN = 1e-6
DEFAULT_C_T = 4.0
DEFAULT_PRECISION = 0.25
RETRY_WIDENING = 1 / 64


class StageError(RuntimeError):
    """A named stage of the ground-state pipeline failed."""

    def __init__(self, stage: str, cause: Exception):
        super().__init__(f"{stage}: {cause}")
        self.stage = stage
        self.cause = cause


class AmbiguousThreshold(ValidationError):
    """A projected amplitude sits on the bisection threshold."""


class Propagation(NamedTuple):
    unitary: np.ndarray
    jansen_lhs: float
    jansen_rhs: float
    steps: int


def _ground_gap(fam):
    gamma, at = scan_gap(fam, 0)
    if gamma < GAP_MIN:
        raise GapError(f"ground-state gap falls to {gamma:.3e} near s={at:.6f}", s=at, gap=gamma)
    return gamma


def schrodinger_propagate(fam: InterpolationFamily, T: float, tol: float = 1e-6,
                          gamma: Optional[float] = None) -> Propagation:
    """Evolve under ``H(t/T)`` for time ``T`` and compare with the adiabatic bound.

    ``jansen_lhs`` is the phase-aligned distance between the evolved and the
    final ground state; ``jansen_rhs = beta / (T gamma^2)``.
    """
    T = check_positive(T, "T")
    gamma = _ground_gap(fam) if gamma is None else gamma
    if opnorm(fam.h_prime) == 0:
        U = spectrum(fam, 0.0).function(lambda e: np.exp(-1j * e * T))
        return Propagation(U, 0.0, fam.beta / (T * gamma ** 2), 1)
    # dU/ds = -i T H(s) U, i.e. the generator -T H(s)
    run = ordered_exponential_refined(lambda s: -T * evaluate_many(fam, s), 0.0, 1.0, tol,
                                      steps=max(16, 1 << max(0, math.ceil(math.log2(T * fam.alpha)))),
                                      vectorized=True)
    psi0 = spectrum(fam, 0.0).eigenvectors[:, 0]
    psi1 = spectrum(fam, 1.0).eigenvectors[:, 0]
    lhs = phase_aligned_distance(psi1, run.unitary @ psi0)
    return Propagation(run.unitary, lhs, fam.beta / (T * gamma ** 2), run.steps)


def adiabatic_error_bound(fam: InterpolationFamily, T: float, points: int = 401) -> float:
    """Adiabatic error bound with its constants, for a linear path.

    ``(||H'||/g(0)^2 + ||H'||/g(1)^2 + 7 int ||H'||^2/g^3 ds) / T`` with the
    ground gap ``g``; the integral uses Simpson's rule on ``points`` nodes.
    """
    T = check_positive(T, "T")
    b = opnorm(fam.h_prime)
    grid = np.linspace(0.0, 1.0, points)
    g = gaps_on_grid(fam, grid, 0)
    if g.min() < GAP_MIN:
        raise GapError(f"ground-state gap falls to {g.min():.3e}", gap=float(g.min()))
    integral = simpson(7 * b * b / g ** 3, x=grid)
    return float((b / g[0] ** 2 + b / g[-1] ** 2 + integral) / T)


@dataclass(frozen=True, eq=False)
class PreparedState:
    """Sub-normalized preparation ``sqrt(kappa) |state>`` and its ground overlap."""

    state: np.ndarray
    kappa: float
    overlap_eta: float
    T: float
    method: str = "schrodinger"


def _dyson_evolution(fam, T, epsilon=1e-3):
    # truncated Dyson sums for the generator -T H(s), segments with tau T alpha <= 1/2
    d_max = T * fam.alpha
    q = max(1, math.ceil(2 * d_max))
    tau = 1.0 / q
    cfg = choose_KM(tau, d_max, T * fam.beta, tau * epsilon, d_typ=d_max)
    U = np.eye(fam.dim, dtype=complex)
    grid = np.arange(cfg.M) / cfg.M
    for j in range(q):
        s = np.minimum((j + grid) * tau, 1.0)
        U = dyson_truncated(-T * evaluate_many(fam, s), cfg) @ U
    return U


def prepare_initial(fam: InterpolationFamily, c_T: float = DEFAULT_C_T,
                    method: str = "schrodinger", tol: float = 1e-6) -> PreparedState:
    """Adiabatic evolution of the ground state of ``H0`` for time ``c_T beta / gamma^2``.

    ``method="dyson"`` uses truncated Dyson sums instead of exact step
    products, which leaves a contraction and hence ``kappa < 1``.
    """
    c_T = check_positive(c_T, "c_T")
    gamma = _ground_gap(fam)
    T = c_T * max(fam.beta, 1e-300) / gamma ** 2
    psi0 = spectrum(fam, 0.0).eigenvectors[:, 0]
    psi1 = spectrum(fam, 1.0).eigenvectors[:, 0]
    if opnorm(fam.h_prime) == 0:
        out = psi0.astype(complex)
    elif method == "schrodinger":
        out = schrodinger_propagate(fam, T, tol=tol, gamma=gamma).unitary @ psi0
    elif method == "dyson":
        out = _dyson_evolution(fam, T) @ psi0
    else:
        raise ValidationError(f"unknown propagation method {method!r}")
    kappa = float(np.vdot(out, out).real)
    state = out / math.sqrt(kappa)
    eta = float(abs(np.vdot(psi1, state)))
    if eta < 0.5 and c_T <= DEFAULT_C_T:
        raise ValidationError(f"ground overlap {eta:.3f} below 0.5 at c_T={c_T}; "
                              "increase c_T")
    return PreparedState(state, min(kappa, 1.0), eta, T, method)


# -- projection oracle and energy bisection --------------------------------


def proj_filter(H1, x: float, h: float, eps_prime: float) -> np.ndarray:
    """Smoothed spectral step that keeps energies below ``x - h`` and removes those above ``x + h``."""
    h = check_positive(h, "h")
    check_fraction(eps_prime, "eps_prime")
    dec = eig_hermitian(check_hermitian(H1, "H1"))
    sigma = h / erfcinv(eps_prime)
    return dec.function(lambda E: 0.5 * erfc((E - x) / sigma))


@dataclass(frozen=True)
class ProjReport:
    x: float
    h: float
    eps_prime: float
    accepted_amplitude: float


def proj_amplitude(prepared: PreparedState, H1, x, h, eps_prime) -> ProjReport:
    F = proj_filter(H1, x, h, eps_prime)
    amp = math.sqrt(prepared.kappa) * float(np.linalg.norm(F @ prepared.state))
    return ProjReport(float(x), float(h), float(eps_prime), min(amp, 1.0))


@dataclass(frozen=True)
class EnergyEstimate:
    value: float
    interval: tuple
    iterations: int
    reports: tuple = field(default=(), repr=False)


def binary_search_energy(prepared: PreparedState, H1, gamma1: float,
                         c: float = DEFAULT_PRECISION, alpha: Optional[float] = None,
                         eta: Optional[float] = None,
                         interval: Optional[tuple] = None) -> EnergyEstimate:
    """Bisect ``[-alpha, alpha]`` (or ``interval``) for the ground energy of ``H1`` to within ``c gamma1``.

    Each round compares the projected amplitude at the midpoint with
    ``eta sqrt(kappa) / 2`` using ``eps' = eta/2`` and half-width
    ``h = c gamma1 / 2``; a large amplitude puts the energy below ``x + h``,
    a small one above ``x - h``.
    """
    H1 = check_hermitian(H1, "H1")
    gamma1 = check_positive(gamma1, "gamma1")
    check_fraction(c, "c")
    alpha = opnorm(H1) if alpha is None else float(alpha)
    alpha = max(alpha, 1e-300)
    eta = prepared.overlap_eta if eta is None else float(eta)
    eps_prime = eta / 2
    h = c * gamma1 / 2
    threshold = eta * math.sqrt(prepared.kappa) / 2
    lo, hi = (-alpha, alpha) if interval is None else map(float, interval)
    rounds = max(0, math.ceil(math.log2((hi - lo) / (c * gamma1))))
    reports = []
    for _ in range(rounds):
        x = 0.5 * (lo + hi)
        rep = proj_amplitude(prepared, H1, x, h, eps_prime)
        reports.append(rep)
        if abs(rep.accepted_amplitude - threshold) <= 1e-12:
            raise AmbiguousThreshold(f"amplitude {rep.accepted_amplitude} at x={x} is within 1e-12 "
                                  "of the threshold; use a larger eps' margin")
        if rep.accepted_amplitude >= threshold:
            hi = min(hi, x + h)
        else:
            lo = max(lo, x - h)
    return EnergyEstimate(0.5 * (lo + hi), (lo, hi), rounds, tuple(reports))


# -- eigenstate filtering ----------------------------------------------------


def _chebyshev_step(H1, alpha, theta, sigma, tol):
    # Chebyshev interpolant of the smoothed step on [-alpha, alpha]
    f = lambda u: 0.5 * erfc((alpha * u - theta) / sigma)
    deg = max(16, int(4 * alpha / sigma))
    while True:
        cheb = np.polynomial.Chebyshev.interpolate(f, deg)
        if np.abs(cheb.coef[-4:]).max() <= tol or deg > 1 << 16:
            return cheb
        deg *= 2


def apply_chebyshev(coef, A, v):
    """``sum_k coef_k T_k(A) v`` by the three-term recurrence."""
    prev, cur = v, A @ v
    out = coef[0] * prev + (coef[1] * cur if len(coef) > 1 else 0)
    for c in coef[2:]:
        prev, cur = cur, 2 * (A @ cur) - prev
        out = out + c * cur
    return out


def eigenstate_filter(state, H1, E_hat: float, gamma1: float, epsilon: float = 1e-3,
                      method: str = "exact", alpha: Optional[float] = None):
    """Project onto energies at most ``E_hat + gamma1/2`` and renormalize.

    ``method="chebyshev"`` replaces the projector by a polynomial in ``H1``
    approximating an erfc-smoothed step whose transition is a quarter gap wide.
    Returns ``(state, degree)``; the degree is 0 for the exact projector.
    """
    H1 = check_hermitian(H1, "H1")
    gamma1 = check_positive(gamma1, "gamma1")
    psi = np.asarray(state, dtype=complex)
    theta = E_hat + gamma1 / 2
    if method == "exact":
        dec = eig_hermitian(H1)
        keep = dec.eigenvalues <= theta
        if not keep.any():
            raise ValidationError(f"no eigenvalue at or below {theta}")
        V = dec.eigenvectors[:, keep]
        out = V @ (V.conj().T @ psi)
        degree = 0
    elif method == "chebyshev":
        check_fraction(epsilon, "epsilon")
        alpha = opnorm(H1) if alpha is None else float(alpha)
        alpha = max(alpha, abs(theta), 1e-300)
        sigma = (gamma1 / 4) / erfcinv(epsilon / 8)
        cheb = _chebyshev_step(H1, alpha, theta, sigma, epsilon / 64)
        out = apply_chebyshev(cheb.coef, H1 / alpha, psi)
        degree = cheb.degree()
    else:
        raise ValidationError(f"unknown filter method {method!r}")
    nrm = np.linalg.norm(out)
    if nrm < 1e-14:
        raise ValidationError("filtered state vanishes; no overlap with the retained subspace")
    return out / nrm, degree


# -- end to end -------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class GroundStateRun:
    prepared: PreparedState
    energy: EnergyEstimate
    gamma1: float
    filter_degree: int
    measured_error: float


def prepare_ground_state(fam: InterpolationFamily, gamma1: Optional[float] = None,
                         epsilon: float = 1e-2, c: float = DEFAULT_PRECISION,
                         c_T: float = DEFAULT_C_T, filter_method: str = "exact"):
    """Adiabatic preparation, energy bisection, then eigenstate filtering.

    Returns ``(state, measured_error, run)``; the error is the phase-aligned
    distance to the ground state of ``H1``.
    """
    check_fraction(epsilon, "epsilon")
    E1 = spectrum(fam, 1.0)
    if gamma1 is None:
        gamma1 = float(E1.eigenvalues[1] - E1.eigenvalues[0]) if fam.dim > 1 else 1.0
    try:
        prepared = prepare_initial(fam, c_T)
    except Exception as exc:
        raise StageError("initial preparation", exc) from exc
    try:
        try:
            energy = binary_search_energy(prepared, fam.H1, gamma1, c, alpha=fam.alpha)
        except AmbiguousThreshold:
            # a midpoint hit an eigenvalue exactly; widening one end moves every midpoint
            energy = binary_search_energy(prepared, fam.H1, gamma1, c, alpha=fam.alpha,
                                          interval=(-fam.alpha * (1 + RETRY_WIDENING), fam.alpha))
    except Exception as exc:
        raise StageError("energy estimation", exc) from exc
    try:
        out, degree = eigenstate_filter(prepared.state, fam.H1, energy.value, gamma1, epsilon,
                                        method=filter_method, alpha=fam.alpha)
    except Exception as exc:
        raise StageError("eigenstate filtering", exc) from exc
    err = phase_aligned_distance(E1.eigenvectors[:, 0], out)
    return out, err, GroundStateRun(prepared, energy, gamma1, degree, err)
