import math
from dataclasses import replace

import numpy as np
import pytest

from qaclab._validation import ValidationError
from qaclab.gaps import GapProfile, Schedule, greedy_schedule, grover_gap
from qaclab.qac import choose_parameters
from qaclab.resources import (CostConstants, estimate_eigenstate_cost, estimate_gap_adaptive,
                              estimate_generator_oracle, estimate_ground_state_cost, lg,
                              monotonicity_suite)

# evaluated independently with mpmath at 30 digits (alpha=beta=1, gamma=gamma1=0.1, eps=1e-3,
# n_a=2, n_s=4, unit constants)
GROUND_QUERIES = 5375.42133396473804457177125943
GROUND_G0 = 17.826125006936509652316516293
GROUND_GATES = 535739.068881162749287588477982
GROUND_QUBITS = 27.2075924419135920422466655544


def queries(beta, gamma, eps):
    return estimate_eigenstate_cost(1.0, beta, gamma, eps, 2, 2, 4).queries_H0H1


def test_ground_state_figures():
    r = estimate_ground_state_cost(1, 1, 0.1, 0.1, 1e-3, 2, 4)
    assert r.queries_H0H1 == pytest.approx(GROUND_QUERIES, rel=1e-13)
    assert r.queries_G0 == pytest.approx(GROUND_G0, rel=1e-13)
    assert r.gates == pytest.approx(GROUND_GATES, rel=1e-13)
    assert r.qubits == pytest.approx(GROUND_QUBITS, rel=1e-13)
    assert r.queries_Hprime == 0.0
    again = estimate_ground_state_cost(1, 1, 0.1, 0.1, 1e-3, 2, 4)
    assert again.as_dict() == r.as_dict()


def test_reports_name_constants_and_formulas():
    r = estimate_eigenstate_cost(1, 1, 0.1, 1e-3, 2, 2, 4, CostConstants(queries=3.0))
    assert ("C_queries", 3.0) in r.assumptions
    assert set(r.formulas) >= {"queries_H0H1", "queries_Hprime", "gates", "qubits"}
    assert r.queries_H0H1 == pytest.approx(3 * queries(1, 0.1, 1e-3))


@pytest.mark.parametrize("x", [math.e ** 5, math.e ** 8, 1e6, 1e10])
def test_doubling_beta_roughly_doubles_queries(x):
    gamma = 0.5
    eps = 1 / (gamma * x)
    ratio = queries(2, gamma, eps) / queries(1, gamma, eps)
    assert 2 <= ratio <= 2.6


@pytest.mark.parametrize("eps", [1e-4, 1e-6, 1e-9, 1e-12])
@pytest.mark.parametrize("gamma", [0.1, 0.5])
def test_tenfold_precision_is_polylog(eps, gamma):
    assert queries(1, gamma, eps / 10) / queries(1, gamma, eps) < 2


def test_ground_state_lacks_high_log_power():
    a = estimate_ground_state_cost(1, 1, 0.1, 0.1, 1e-3, 2, 4).queries_H0H1
    b = estimate_ground_state_cost(1, 1, 0.1, 0.1, 1e-9, 2, 4).queries_H0H1
    assert b / a == pytest.approx(lg(lg(10) / 1e-9) / lg(lg(10) / 1e-3))


def test_single_segment_equals_eigenstate_cost():
    sched = Schedule(np.array([0.0, 1.0]), np.array([0.3]), 0.2, 1.0)
    ad = estimate_gap_adaptive(sched, 1.0, 1.5, 1e-4, 3, 2, 5)
    eig = estimate_eigenstate_cost(1.0, 1.5, 0.3, 1e-4, 3, 2, 5)
    for key in ("queries_H0H1", "queries_Hprime", "gates", "qubits"):
        assert getattr(ad, key) == getattr(eig, key)


def test_grover_square_root_scaling():
    sizes = np.array([2.0 ** k for k in range(10, 21)])
    q = np.array([estimate_gap_adaptive(greedy_schedule(grover_gap(int(K))), 1, 2, 1e-3, 2, 2,
                                        4).queries_H0H1 for K in sizes])
    # ln K and ln ln K are nearly collinear here, so the exponent comes from a plain log-log fit
    slope = np.polyfit(np.log(sizes), np.log(q), 1)[0]
    assert slope == pytest.approx(0.5, abs=0.05)
    A2 = np.c_[np.ones_like(sizes), np.log(np.log(sizes))]
    c2, *_ = np.linalg.lstsq(A2, np.log(q / np.sqrt(sizes)), rcond=None)
    assert np.abs(np.exp(np.log(q / np.sqrt(sizes)) - A2 @ c2) - 1).max() <= 0.2


def test_adaptive_beats_uniform_on_grover():
    K = 2 ** 16
    ad = estimate_gap_adaptive(greedy_schedule(grover_gap(K)), 1, 2, 1e-3, 2, 2, 4)
    uni = estimate_eigenstate_cost(1, 2, 1 / math.sqrt(K), 1e-3, 2, 2, 4)
    assert uni.queries_H0H1 > 20 * ad.queries_H0H1


@pytest.mark.parametrize("g", [0.05, 0.2, 0.5])
def test_constant_gap_close_to_uniform(g):
    prof = GapProfile(lambda s: np.full_like(np.asarray(s, dtype=float), g), 1.0,
                      exact_minimum=g)
    sched = greedy_schedule(prof)
    ad = estimate_gap_adaptive(sched, 1, 1, 1e-3, 2, 2, 4)
    uni = estimate_eigenstate_cost(1, 1, float(sched.gammas.min()), 1e-3, 2, 2, 4)
    assert ad.queries_H0H1 / uni.queries_H0H1 <= 2


def test_generator_oracle():
    params = choose_parameters(1, 1, 0.5, 1e-3)
    q1, gv1, gw1, anc1 = estimate_generator_oracle(params, 1e-3, 2)
    q2, *_ = estimate_generator_oracle(params, 1e-4, 2)
    q3, *_ = estimate_generator_oracle(params, 1e-5, 2)
    assert q2 - q1 == pytest.approx(q3 - q2, rel=1e-9)
    assert estimate_generator_oracle(params, 1e-3, 2) == (q1, gv1, gw1, anc1)
    _, _, gw_alpha, _ = estimate_generator_oracle(replace(params, alpha=7.0), 1e-3, 2)
    assert gw_alpha == gw1


def test_range_errors():
    with pytest.raises(ValidationError):
        estimate_eigenstate_cost(1, 1, 0.1, 1.0, 2, 2, 4)
    with pytest.raises(ValidationError):
        estimate_ground_state_cost(1, 1, 0.1, 0.05, 1e-3, 2, 4)
    with pytest.raises(ValidationError):
        estimate_eigenstate_cost(1, -1, 0.1, 1e-3, 2, 2, 4)
    with pytest.raises(ValidationError):
        CostConstants(multiplication="karatsuba")


def test_fast_multiplication_is_cheaper():
    slow = estimate_eigenstate_cost(1, 1, 1e-3, 1e-6, 2, 2, 4)
    fast = estimate_eigenstate_cost(1, 1, 1e-3, 1e-6, 2, 2, 4,
                                    CostConstants(multiplication="fast"))
    assert fast.gates < slow.gates and fast.queries_H0H1 == slow.queries_H0H1


def test_monotonicity_small_sweep():
    counts = monotonicity_suite(100, seed=5, schedule=greedy_schedule(grover_gap(16)))
    assert counts and all(v == 0 for v in counts.values())
