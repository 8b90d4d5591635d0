"""Closed-form cost figures for the eigenstate, ground-state and gap-adaptive algorithms.

Every big-O constant is a configurable multiplier (default 1). Logarithms are
natural and floored at one, ``lg(x) = max(ln x, 1)``, so that nested forms such
as ``lg(x)**2.5 / lg(lg(x))`` stay finite and monotone for small arguments.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ._validation import ValidationError
from .gaps import Schedule
from .qac import QacParams


@dataclass(frozen=True)
class CostConstants:
    queries: float = 1.0
    hprime_queries: float = 1.0
    g0_queries: float = 1.0
    gates: float = 1.0
    qubits: float = 1.0
    multiplication: str = "schoolbook"  # or "fast": b lg b lg lg b

    def __post_init__(self):
        for name in ("queries", "hprime_queries", "g0_queries", "gates", "qubits"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v > 0):
                raise ValidationError(f"constant {name} must be positive")
        if self.multiplication not in ("schoolbook", "fast"):
            raise ValidationError("multiplication must be 'schoolbook' or 'fast'")

    def items(self):
        return [("C_queries", self.queries), ("C_hprime", self.hprime_queries),
                ("C_G0", self.g0_queries), ("C_gates", self.gates),
                ("C_qubits", self.qubits), ("multiplication", self.multiplication),
                ("log", "max(ln x, 1)")]


DEFAULT_CONSTANTS = CostConstants()


@dataclass(frozen=True)
class CostReport:
    queries_H0H1: float
    queries_Hprime: float
    queries_G0: float
    gates: float
    qubits: float
    assumptions: tuple
    formulas: dict = field(default_factory=dict)
    reference: dict = field(default_factory=dict)

    def as_dict(self) -> dict:
        return {"queries_H0H1": self.queries_H0H1, "queries_Hprime": self.queries_Hprime,
                "queries_G0": self.queries_G0, "gates": self.gates, "qubits": self.qubits,
                "assumptions": [list(a) for a in self.assumptions],
                "formulas": dict(self.formulas), "reference": dict(self.reference)}


def lg(x: float) -> float:
    return max(math.log(x), 1.0) if x > 0 else 1.0


def _poly_lg(x: float, power: float) -> float:
    ell = lg(x)
    return ell ** power / lg(ell)


def mult_cost(bits: float, model: str = "schoolbook") -> float:
    if model == "schoolbook":
        return bits * bits
    return bits * lg(bits) * lg(lg(bits))


def _positive(**kw):
    for name, v in kw.items():
        if not (isinstance(v, (int, float)) and math.isfinite(v) and v > 0):
            raise ValidationError(f"{name} must be a positive finite number, got {v!r}")


def _sizes(**kw):
    for name, v in kw.items():
        if int(v) != v or v < 0:
            raise ValidationError(f"{name} must be a nonnegative integer")


def _check_eps(epsilon):
    _positive(epsilon=epsilon)
    if epsilon >= 1:
        raise ValidationError("epsilon must be below 1")


def estimate_eigenstate_cost(alpha, beta, gamma, epsilon, n_a, n_b, n_s,
                             constants: CostConstants = DEFAULT_CONSTANTS) -> CostReport:
    _positive(alpha=alpha, beta=beta, gamma=gamma)
    _check_eps(epsilon)
    _sizes(n_a=n_a, n_b=n_b, n_s=n_s)
    C = constants
    ratio = beta / gamma
    x = beta / (gamma * epsilon)
    bits = lg(alpha * beta / (gamma ** 2 * epsilon))
    outer = ratio * (alpha / gamma + lg(1 / epsilon)) * _poly_lg(x, 2.5)
    q01 = C.queries * outer
    qh = C.hprime_queries * ratio * _poly_lg(x, 1.5)
    gates = C.gates * outer * (n_a + n_b + bits * mult_cost(bits, C.multiplication))
    qubits = n_s + n_a + C.qubits * (n_b + bits ** 2)
    return CostReport(q01, qh, 0.0, gates, qubits, tuple(C.items()), {
        "queries_H0H1": "C (b/g)[a/g + lg(1/e)] lg(b/(g e))^2.5 / lg lg(b/(g e))",
        "queries_Hprime": "C (b/g) lg(b/(g e))^1.5 / lg lg(b/(g e))",
        "gates": "C (b/g)[a/g + lg(1/e)][n_a + n_b + l M(l)] lg(b/(g e))^2.5 / lg lg(b/(g e)),"
                 " l = lg(a b/(g^2 e))",
        "qubits": "n_s + n_a + C (n_b + lg(a b/(g^2 e))^2)",
    })


def estimate_ground_state_cost(alpha, beta, gamma, gamma1, epsilon, n_a, n_s,
                               constants: CostConstants = DEFAULT_CONSTANTS) -> CostReport:
    _positive(alpha=alpha, beta=beta, gamma=gamma, gamma1=gamma1)
    _check_eps(epsilon)
    _sizes(n_a=n_a, n_s=n_s)
    if gamma1 < gamma:
        raise ValidationError("gamma1 must be at least gamma")
    C = constants
    scale = alpha * beta / gamma ** 2
    rounds = lg(alpha / gamma1) * lg(lg(alpha / gamma1) / epsilon)
    per_round = scale * _poly_lg(scale, 1.0)
    bits = lg(scale)
    q01 = C.queries * per_round * rounds
    g0 = C.g0_queries * rounds
    gates = C.gates * per_round * rounds * (n_a + bits * mult_cost(bits, C.multiplication))
    qubits = n_s + C.qubits * (n_a + bits ** 2)
    return CostReport(q01, 0.0, g0, gates, qubits, tuple(C.items()), {
        "queries_H0H1": "C (a b/g^2) lg(a/g1) lg(lg(a/g1)/e) lg(a b/g^2) / lg lg(a b/g^2)",
        "queries_G0": "C lg(a/g1) lg(lg(a/g1)/e)",
        "gates": "C (a b/g^2)[n_a + l M(l)] lg(a/g1) lg(lg(a/g1)/e) l / lg l, l = lg(a b/g^2)",
        "qubits": "n_s + C (n_a + lg(a b/g^2)^2)",
    })


def estimate_gap_adaptive(schedule: Schedule, alpha, beta, epsilon, n_a, n_b, n_s,
                          constants: CostConstants = DEFAULT_CONSTANTS) -> CostReport:
    """Sum of per-segment eigenstate costs with ``beta -> length beta``, ``gamma -> gamma_i``
    and ``epsilon -> epsilon / q``.

    Qubits are reused between segments, so the total is the per-segment maximum.
    ``reference`` holds the closed-form ``(b/g) lg(a/g) lg(lg(a/g)/e)^2.5 / lg lg(...)``
    curve for comparison.
    """
    if schedule.q == 0:
        raise ValidationError("empty schedule")
    _positive(alpha=alpha, beta=beta)
    _check_eps(epsilon)
    q = schedule.q
    eps_seg = epsilon / q
    parts = [estimate_eigenstate_cost(alpha, float(length) * beta, float(g), eps_seg,
                                      n_a, n_b, n_s, constants)
             for length, g in zip(schedule.lengths, schedule.gammas)]
    gamma = float(min(schedule.gammas))
    ref = beta / gamma * lg(alpha / gamma) * _poly_lg(lg(alpha / gamma) / epsilon, 2.5)
    return CostReport(
        math.fsum(p.queries_H0H1 for p in parts),
        math.fsum(p.queries_Hprime for p in parts),
        0.0,
        math.fsum(p.gates for p in parts),
        max(p.qubits for p in parts),
        tuple(constants.items()) + (("segments", q),),
        {"total": "sum over segments of the eigenstate cost at (len_i b, g_i, e/q)",
         "qubits": "max over segments"},
        {"closed_form_queries": constants.queries * ref, "gamma_min": gamma},
    )


def estimate_generator_oracle(params: QacParams, delta_target, n_a,
                              constants: CostConstants = DEFAULT_CONSTANTS):
    """Queries, gate counts ``g_V`` and ``g_W``, and ancillas for one generator block-encoding.

    Needs ``params.alpha`` and ``params.beta``, as filled in by ``choose_parameters``.
    """
    _positive(delta_target=delta_target)
    _sizes(n_a=n_a)
    alpha, beta = params.alpha, params.beta
    if not (math.isfinite(alpha) and math.isfinite(beta)):
        raise ValidationError("params must carry alpha and beta")
    C = constants
    D, T, N = params.delta, params.T, params.N
    scale = D * delta_target
    lgN = lg(N)
    queries = C.queries * (alpha * T + lg(beta * lgN / scale) * lgN)
    bits_v = lg(alpha * beta * T / scale)
    bits_w = D ** 2 * T ** 2 + lg(beta * N / scale)
    g_v = C.gates * (n_a + bits_v * mult_cost(bits_v, C.multiplication)) * queries / C.queries
    g_w = C.gates * bits_w * mult_cost(bits_w, C.multiplication) * lgN
    ancillas = n_a + C.qubits * (bits_v ** 2 + bits_w ** 2)
    return float(queries), float(g_v), float(g_w), float(ancillas)


_FIGURES = ("queries_H0H1", "queries_Hprime", "queries_G0", "gates", "qubits")


def _draw(rng):
    alpha = rng.uniform(1, 10)
    gamma = alpha * 10 ** rng.uniform(-3, -0.05)
    return {"alpha": alpha, "beta": rng.uniform(0.1, 2 * alpha), "gamma": gamma,
            "gamma1": rng.uniform(gamma, alpha), "epsilon": 10 ** rng.uniform(-12, -0.5),
            "n_a": int(rng.integers(0, 20)), "n_b": int(rng.integers(0, 20)),
            "n_s": int(rng.integers(1, 30))}


def _eig(p):
    return estimate_eigenstate_cost(p["alpha"], p["beta"], p["gamma"], p["epsilon"],
                                    p["n_a"], p["n_b"], p["n_s"])


def _ground(p):
    return estimate_ground_state_cost(p["alpha"], p["beta"], p["gamma"], p["gamma1"],
                                      p["epsilon"], p["n_a"], p["n_s"])


def monotonicity_suite(samples: int = 1000, seed: int = 0, schedule: Schedule | None = None) -> dict:
    """Count monotonicity violations over random parameter draws.

    Each draw moves one parameter in the direction that should not lower any
    cost figure: alpha, beta and 1/epsilon up, gamma and gamma1 down (keeping
    gamma1 >= gamma). With a ``schedule`` the gap-adaptive sum is checked in
    beta and 1/epsilon as well. Returns ``{property: violations}``.
    """
    rng = np.random.default_rng(seed)
    moves = {
        "alpha up": lambda p, f: {**p, "alpha": p["alpha"] * f},
        "beta up": lambda p, f: {**p, "beta": p["beta"] * f},
        "1/epsilon up": lambda p, f: {**p, "epsilon": p["epsilon"] / f},
        "gamma down": lambda p, f: {**p, "gamma": p["gamma"] / f},
        "gamma1 down": lambda p, f: {**p, "gamma1": max(p["gamma"], p["gamma1"] / f)},
    }
    counts = {}
    for _ in range(samples):
        p = _draw(rng)
        f = float(rng.uniform(1.0 + 1e-6, 3.0))
        for name, move in moves.items():
            p2 = move(p, f)
            for label, est in (("eigenstate", _eig), ("ground state", _ground)):
                a, b = est(p), est(p2)
                bad = sum(getattr(b, k) < getattr(a, k) * (1 - 1e-12) for k in _FIGURES)
                key = f"{label}: {name}"
                counts[key] = counts.get(key, 0) + int(bad)
        if schedule is not None:
            for name in ("beta up", "1/epsilon up"):
                p2 = moves[name](p, f)
                a = estimate_gap_adaptive(schedule, p["alpha"], p["beta"], p["epsilon"],
                                          p["n_a"], p["n_b"], p["n_s"])
                b = estimate_gap_adaptive(schedule, p2["alpha"], p2["beta"], p2["epsilon"],
                                          p2["n_a"], p2["n_b"], p2["n_s"])
                bad = sum(getattr(b, k) < getattr(a, k) * (1 - 1e-12) for k in _FIGURES)
                key = f"gap adaptive: {name}"
                counts[key] = counts.get(key, 0) + int(bad)
    return counts
