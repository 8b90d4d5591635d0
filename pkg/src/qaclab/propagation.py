"""Truncated Dyson propagators and the segmented eigenstate-tracking pipeline."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from itertools import combinations_with_replacement
from typing import Callable, Optional

import numpy as np

from ._validation import GapError, ValidationError, check_fraction, check_index
from .family import InterpolationFamily, evaluate, scan_gap, spectrum
from .linalg import batched_expm_i, opnorm, phase_aligned_distance
from .qac import QacKernel, QacParams, choose_parameters, discretized_qac_batch

log = logging.getLogger(__name__)

SCAN_GAP_FLOOR = 1e-6
_CHUNK_BYTES = 48 * 2 ** 20


@dataclass(frozen=True)
class DysonConfig:
    """Truncation order ``K``, grid size ``M`` and segment length ``tau``.

    ``d_max`` bounds ``||D(s)||`` on the segment. ``probe_residuals`` records
    the distances measured while ``M`` was being adapted, if any.
    """

    K: int
    M: int
    tau: float
    d_max: float
    probe_residuals: tuple = ()

    @property
    def meets_selection_rule(self) -> bool:
        return self.K * self.K <= self.M

    def __post_init__(self):
        if self.K < 0 or self.M < 1:
            raise ValidationError("need K >= 0 and M >= 1")
        # K^2 <= M is the selection rule in choose_KM; the sums themselves only need K <= M
        if self.K > self.M:
            raise ValidationError(f"K = {self.K} exceeds M = {self.M}")
        if not 0 < self.tau <= 1:
            raise ValidationError("tau must lie in (0, 1]")
        if self.d_max > 0 and self.tau * self.d_max > 0.5 + 1e-12:
            raise ValidationError("tau * d_max must not exceed 1/2")


class _DysonAccumulator:
    """Streams grid samples through ``F_k(m) = F_k(m-1) + A_m F_{k-1}(m)``.

    ``carry[k]`` holds ``F_k`` at the last sample seen, so samples can arrive
    in chunks of any size.
    """

    def __init__(self, K, d, scale):
        self.K = K
        self.scale = scale
        self.carry = [np.eye(d, dtype=complex)] + [np.zeros((d, d), complex) for _ in range(K)]

    def feed(self, D):
        if self.K == 0 or len(D) == 0:
            return
        A = self.scale * np.asarray(D, dtype=complex)
        prev = None  # F_{k-1}(m) across the chunk
        for k in range(1, self.K + 1):
            if prev is None:
                terms = A
            else:
                terms = A @ prev
            cur = np.cumsum(terms, axis=0)
            cur += self.carry[k]
            self.carry[k] = cur[-1].copy()
            prev = cur

    def result(self):
        return sum(self.carry)


def dyson_truncated(samples, config: DysonConfig) -> np.ndarray:
    """Order-K, M-point Dyson sum over non-decreasing index tuples.

    ``samples[m]`` is ``D(m tau / M)``. The result equals
    ``sum_k (i tau/M)^k sum_{m1 <= ... <= mk} D_mk ... D_m1``.
    """
    samples = np.asarray(samples)
    if samples.ndim != 3 or samples.shape[0] != config.M:
        raise ValidationError(f"expected {config.M} square samples, got shape {samples.shape}")
    acc = _DysonAccumulator(config.K, samples.shape[1], 1j * config.tau / config.M)
    step = max(1, _CHUNK_BYTES // (16 * samples.shape[1] ** 2))
    for lo in range(0, config.M, step):
        acc.feed(samples[lo:lo + step])
    return acc.result()


def dyson_bruteforce(samples, config: DysonConfig) -> np.ndarray:
    """Same sum by explicit enumeration of tuples; for small K and M only."""
    samples = np.asarray(samples, dtype=complex)
    d = samples.shape[1]
    out = np.eye(d, dtype=complex)
    h = 1j * config.tau / config.M
    for k in range(1, config.K + 1):
        for tup in combinations_with_replacement(range(config.M), k):
            P = np.eye(d, dtype=complex)
            for m in tup:  # ascending, so later indices end up on the left
                P = samples[m] @ P
            out += h ** k * P
    return out


def dyson_tail(K: int, M: int, x: float) -> float:
    """``sum_{k > K} C(M+k-1, k) (x/M)^k``, the worst-case truncation remainder
    for samples of norm at most ``x / tau``."""
    if x <= 0:
        return 0.0
    term = 1.0
    total_after = 0.0
    k = 0
    while True:
        k += 1
        term *= (M + k - 1) / k * (x / M)
        if k > K:
            total_after += term
            if term < 1e-18 * max(total_after, 1e-300) or term < 1e-300:
                break
    return total_after


def _dyson_factorial_tail(K: int, x: float) -> float:
    # M-independent bound from C(M+k-1, k) <= (2M)^k / k!
    t, k, tail = 1.0, 0, 0.0
    while True:
        k += 1
        t *= 2 * x / k
        if k > K:
            tail += t
            if t < 1e-18 * tail or t == 0:
                return tail


def choose_KM(tau: float, d_max: float, d_prime_avg: float, epsilon: float,
              probe: Optional[Callable[[np.ndarray], np.ndarray]] = None,
              d_typ: Optional[float] = None, cap: int = 1 << 21) -> DysonConfig:
    """Truncation order and grid size for a Dyson segment of length ``tau``.

    ``K`` is the smallest order whose factorial tail with ``2 tau d_max <= 1``
    is at most ``epsilon/2``. ``M`` starts at
    ``max(K^2, ceil(tau^2 (d_prime_avg + d_typ^2) / (epsilon/2)))``; the
    ``d_typ^2`` term covers the left-endpoint sampling error, which is present
    even for a constant generator. With a ``probe`` (a map from segment-local
    ``s`` values in [0, tau] to a stack of ``D`` samples), ``M`` is doubled until the Dyson sum is within
    ``epsilon`` of a midpoint ordered exponential on ``4M`` steps.
    """
    check_fraction(epsilon, "epsilon")
    if tau * d_max > 0.5 + 1e-12:
        raise ValidationError("tau must not exceed 1/(2 d_max)")
    x = tau * d_max
    K = 0
    while _dyson_factorial_tail(K, x) > epsilon / 2:
        K += 1
    d_typ = d_max if d_typ is None else d_typ
    M = max(K * K, 1, math.ceil(tau * tau * (d_prime_avg + d_typ * d_typ) / (epsilon / 2)))
    residuals = []
    if probe is not None:
        while True:
            dist = _probe_distance(probe, tau, K, M, d_max)
            residuals.append((M, dist))
            if dist <= epsilon:
                break
            if 2 * M > cap:
                raise ValidationError(f"Dyson grid cap {cap} exceeded; residuals {residuals}")
            M *= 2
    return DysonConfig(K, M, tau, d_max, tuple(residuals))


def _probe_distance(probe, tau, K, M, d_max):
    grid = np.arange(M) * (tau / M)
    samples = probe(grid)
    dys = dyson_truncated(samples, DysonConfig(K, M, tau, d_max))
    fine = 4 * M
    h = tau / fine
    mids = (np.arange(fine) + 0.5) * h
    U = np.eye(samples.shape[1], dtype=complex)
    for lo in range(0, fine, 2048):
        gens = probe(mids[lo:lo + 2048])
        for F in batched_expm_i(gens, -h):
            U = F @ U
    return opnorm(dys - U)


def dyson_perturbation_check(samples, perturbed_samples, config: DysonConfig, delta=None):
    """Sensitivity of the Dyson sum to sample errors.

    Returns ``(||Dys(D) - Dys(D~)||, 2 tau exp(2 d_max tau) delta)`` where
    ``delta`` defaults to the largest sample discrepancy in operator norm.
    """
    samples = np.asarray(samples)
    perturbed_samples = np.asarray(perturbed_samples)
    if config.K > config.M:
        raise ValidationError("need K <= M")
    if delta is None:
        delta = max(opnorm(a - b) for a, b in zip(samples, perturbed_samples))
    lhs = opnorm(dyson_truncated(samples, config) - dyson_truncated(perturbed_samples, config))
    rhs = 2 * config.tau * math.exp(2 * config.d_max * config.tau) * delta
    return lhs, rhs


# -- binary decomposition of evolution times -----------------------------


def _contraction_defect(d, eps_prime, rng):
    # (1 - e/2) exp(-i (e/2) G) with ||G|| = 1: within e of identity, norm <= 1
    if eps_prime == 0:
        return np.eye(d, dtype=complex)
    G = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    G = G + G.conj().T
    G /= opnorm(G)
    E, V = np.linalg.eigh(G)
    rot = (V * np.exp(-0.5j * eps_prime * E)) @ V.conj().T
    return (1 - 0.5 * eps_prime) * rot


def binary_time_error_budget(fam: InterpolationFamily, params: QacParams, eps0: float,
                             eps_prime: float, n: int, s: float = 0.5, seed: int = 0):
    """Error of building ``exp(-i H nT/N)`` from power-of-two time steps.

    Every factor ``exp(-i H~ 2^i T/N)`` uses a perturbed Hamiltonian with
    ``||H - H~|| = eps0`` and is then multiplied by a contraction within
    ``eps_prime`` of the identity. Negative ``n`` uses the adjoint product.
    Returns ``(measured, eps0 T + (ceil(log2 N) + 1) eps_prime)``.
    """
    N = params.N
    if n == 0 or abs(n) > N:
        raise ValidationError(f"time index {n} outside [-N, -1] U [1, N]")
    rng = np.random.default_rng(seed)
    H = evaluate(fam, s)
    d = fam.dim
    P = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    P = P + P.conj().T
    Ht = H + (eps0 * P / opnorm(P) if eps0 > 0 else 0)
    h = params.T / N
    nbits = max(0, math.ceil(math.log2(N))) if N > 1 else 0
    bits = abs(n) - 1

    def factor(t):
        E, V = np.linalg.eigh(Ht)
        return ((V * np.exp(-1j * E * t)) @ V.conj().T) @ _contraction_defect(d, eps_prime, rng)

    V_approx = factor(h)
    for i in range(nbits):
        if (bits >> i) & 1:
            V_approx = factor(h * 2 ** i) @ V_approx
    E, V = np.linalg.eigh(H)
    exact = (V * np.exp(-1j * E * abs(n) * h)) @ V.conj().T
    if n < 0:
        exact, V_approx = exact.conj().T, V_approx.conj().T
    measured = opnorm(exact - V_approx)
    return measured, eps0 * params.T + (nbits + 1) * eps_prime


# -- segmented pipeline ----------------------------------------------------


@dataclass(frozen=True)
class SegmentReport:
    index: int
    dyson_error_estimate: float
    unitarity_defect: float


@dataclass(frozen=True, eq=False)
class SegmentedRun:
    """Outcome of composing per-segment Dyson sums over ``[0, 1]``."""

    segment_count: int
    tau: float
    params: Optional[QacParams]
    config: Optional[DysonConfig]
    gamma: float
    reports: tuple = ()
    final_operator: Optional[np.ndarray] = field(default=None, repr=False)
    estimates: dict = field(default_factory=dict)

    @property
    def grid_work(self) -> int:
        return self.segment_count * (self.config.M if self.config else 0)


@dataclass(frozen=True, eq=False)
class EigenstatePlan:
    fam: InterpolationFamily
    k: int
    epsilon: float
    gamma: float
    gamma_at: float
    params: Optional[QacParams]
    kernel: Optional[QacKernel]
    config: Optional[DysonConfig]
    segment_count: int
    estimates: dict


def _generator_estimates(fam, kernel, q):
    # norm and derivative size of the discretized generator on a coarse grid
    pts = int(min(max(4 * q, 64), 1024)) + 1
    s = np.linspace(0.0, 1.0, pts)
    h = min(1e-4, 0.25 / pts)
    lo = np.clip(s - h, 0, 1)
    hi = np.clip(s + h, 0, 1)
    D = discretized_qac_batch(fam, np.concatenate([s, lo, hi]), kernel)
    Ds, Dlo, Dhi = D[:pts], D[pts:2 * pts], D[2 * pts:]
    norms = np.linalg.norm(Ds, 2, axis=(1, 2))
    deriv = np.linalg.norm(Dhi - Dlo, 2, axis=(1, 2)) / (hi - lo)
    return s, norms, deriv


def plan_eigenstate_run(fam: InterpolationFamily, k: int, epsilon: float,
                        probe: bool = True) -> EigenstatePlan:
    """Choose filter, discretization and Dyson parameters for a tracking run.

    The error target splits evenly between the discretized flow and the
    Dyson simulation; each of the ``q`` segments receives ``tau epsilon / 2``.
    """
    k = check_index(k, fam.dim)
    check_fraction(epsilon, "epsilon")
    gamma, gamma_at = scan_gap(fam, k)
    if gamma < SCAN_GAP_FLOOR:
        raise GapError(f"gap at level {k} falls to {gamma:.3e} near s={gamma_at:.6f}",
                       s=gamma_at, gap=gamma)
    if opnorm(fam.h_prime) == 0:
        return EigenstatePlan(fam, k, epsilon, gamma, gamma_at, None, None, None, 1, {})
    params = choose_parameters(fam.alpha, fam.beta, gamma, epsilon / 2)
    kernel = QacKernel.from_params(params, omega_max=2 * fam.alpha * (1 + 1e-9))
    d_max = 2 * params.normalization * fam.beta
    q = math.ceil(max(fam.beta / params.delta, 2 * d_max))
    tau = 1.0 / q
    s, norms, deriv = _generator_estimates(fam, kernel, q)
    d_typ = 1.1 * float(norms.max())
    d_prime = 1.25 * float(deriv.max())
    eps_seg = tau * epsilon / 2
    probe_fn = None
    if probe:
        j = min(int(s[int(np.argmax(deriv))] * q), q - 1)
        s0 = j * tau
        probe_fn = lambda u: discretized_qac_batch(fam, np.minimum(s0 + u, 1.0), kernel)
    config = choose_KM(tau, d_max, d_prime, eps_seg, probe=probe_fn, d_typ=d_typ)
    estimates = {"d_typ": d_typ, "d_prime": d_prime, "d_max_bound": d_max,
                 "d_prime_bound": 2 * fam.beta ** 2 * params.T / params.delta,
                 "segment_epsilon": eps_seg}
    log.debug("plan: q=%d K=%d M=%d N=%d", q, config.K, config.M, params.N)
    return EigenstatePlan(fam, k, epsilon, gamma, gamma_at, params, kernel, config, q, estimates)


def execute_plan(plan: EigenstatePlan):
    fam, q = plan.fam, plan.segment_count
    d = fam.dim
    if plan.config is None:
        U = np.eye(d, dtype=complex)
        run = SegmentedRun(1, 1.0, None, None, plan.gamma,
                           (SegmentReport(0, 0.0, 0.0),), U, plan.estimates)
        return U, run
    cfg = plan.config
    M, K = cfg.M, cfg.K
    step = max(1, _CHUNK_BYTES // (16 * d * d))
    x = cfg.tau * cfg.d_max
    est = dyson_tail(K, M, x) + cfg.tau ** 2 * (
        plan.estimates["d_prime"] + plan.estimates["d_typ"] ** 2) / (2 * M)
    U = np.eye(d, dtype=complex)
    reports = []
    for j in range(q):
        acc = _DysonAccumulator(K, d, 1j * cfg.tau / M)
        for lo in range(0, M, step):
            m = np.arange(lo, min(lo + step, M))
            s = np.minimum((j * M + m) / (q * M), 1.0)
            acc.feed(discretized_qac_batch(fam, s, plan.kernel))
        seg = acc.result()
        reports.append(SegmentReport(j, est, opnorm(seg.conj().T @ seg - np.eye(d))))
        U = seg @ U
    run = SegmentedRun(q, cfg.tau, plan.params, cfg, plan.gamma, tuple(reports), U, plan.estimates)
    return U, run


def prepare_eigenstate(fam: InterpolationFamily, k: int, epsilon: float, probe: bool = True):
    """Carry eigenstate ``k`` of ``H0`` to eigenstate ``k`` of ``H1`` along the path.

    Returns ``(state, measured_error, run)``; the error is the phase-aligned
    distance to the exact eigenvector of ``H1``.
    """
    plan = plan_eigenstate_run(fam, k, epsilon, probe=probe)
    U, run = execute_plan(plan)
    psi0 = spectrum(fam, 0.0).eigenvectors[:, plan.k]
    psi1 = spectrum(fam, 1.0).eigenvectors[:, plan.k]
    out = U @ psi0
    return out, phase_aligned_distance(psi1, out), run
