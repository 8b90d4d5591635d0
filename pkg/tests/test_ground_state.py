import numpy as np
import pytest

from qaclab._validation import GapError, ValidationError
from qaclab.family import InterpolationFamily, spectrum
from qaclab.ground_state import (AmbiguousThreshold, PreparedState, StageError,
                                 adiabatic_error_bound, binary_search_energy, eigenstate_filter,
                                 prepare_ground_state, prepare_initial, proj_filter,
                                 schrodinger_propagate)
from qaclab.linalg import phase_aligned_distance
from qaclab.models import grover_family, random_gapped_family


def test_proj_filter_separates_energies():
    H = np.diag([-1.0, -0.2, 0.2, 1.0])
    F = proj_filter(H, 0.0, 0.2, 0.1)
    d = np.diag(F).real
    assert d[0] >= 1 - 0.05 and d[1] >= 1 - 0.05 - 1e-12
    assert d[2] <= 0.05 + 1e-12 and d[3] <= 0.05


@pytest.mark.parametrize("seed", range(4))
def test_adiabatic_bound_holds(seed):
    fam = random_gapped_family(4, 0.2, seed)
    gamma = 0.2
    for T in (5.0, 20.0):
        prop = schrodinger_propagate(fam, T, gamma=gamma)
        assert prop.jansen_lhs <= prop.jansen_rhs + 1e-6


def test_bound_with_constants_dominates():
    fam = random_gapped_family(3, 0.15, 345)
    prop = schrodinger_propagate(fam, 10.0)
    full = adiabatic_error_bound(fam, 10.0)
    assert prop.jansen_lhs <= full
    assert full > prop.jansen_rhs
    assert adiabatic_error_bound(fam, 20.0) == pytest.approx(full / 2)


def test_constant_path_needs_no_evolution():
    H = np.diag([0.0, 1.0])
    prepared = prepare_initial(InterpolationFamily(H, H))
    assert prepared.overlap_eta == pytest.approx(1.0)


@pytest.mark.parametrize("seed", range(5))
def test_bisection_brackets_ground_energy(seed):
    rng = np.random.default_rng(seed)
    E = np.sort(rng.uniform(-1, 1, 6))
    E[1] = max(E[1], E[0] + 0.1)
    U = np.linalg.qr(rng.normal(size=(6, 6)) + 1j * rng.normal(size=(6, 6)))[0]
    H1 = (U * E) @ U.conj().T
    state = U[:, 0] * 0.8 + U[:, 3] * 0.6
    prepared = PreparedState(state, 1.0, 0.8, 1.0)
    gamma1 = E[1] - E[0]
    est = binary_search_energy(prepared, H1, gamma1, 0.25)
    assert abs(est.value - E[0]) <= 0.25 * gamma1


def test_midpoint_on_eigenvalue_is_ambiguous():
    H1 = np.diag([0.0, 1.0])
    prepared = PreparedState(np.array([1.0, 0.0]), 1.0, 1.0, 1.0)
    with pytest.raises(AmbiguousThreshold):
        binary_search_energy(prepared, H1, 1.0, 0.25, alpha=1.0)
    est = binary_search_energy(prepared, H1, 1.0, 0.25, alpha=1.0, interval=(-1.1, 1.0))
    assert abs(est.value) <= 0.25


@pytest.mark.parametrize("method", ["exact", "chebyshev"])
def test_filter_recovers_ground_state(method):
    fam = random_gapped_family(5, 0.15, 11)
    E1 = spectrum(fam, 1.0)
    psi = 0.7 * E1.eigenvectors[:, 0] + 0.714 * E1.eigenvectors[:, 2]
    gamma1 = E1.eigenvalues[1] - E1.eigenvalues[0]
    out, degree = eigenstate_filter(psi, fam.H1, E1.eigenvalues[0], gamma1, 1e-4, method)
    assert phase_aligned_distance(E1.eigenvectors[:, 0], out) <= 1e-4
    assert (degree > 0) == (method == "chebyshev")


@pytest.mark.parametrize("epsilon", [1e-1, 1e-2])
def test_end_to_end_grover(epsilon):
    _, err, run = prepare_ground_state(grover_family(16), epsilon=epsilon)
    assert err <= epsilon
    assert run.prepared.overlap_eta >= 0.5


def test_end_to_end_random_with_chebyshev():
    fam = random_gapped_family(8, 0.15, 2)
    _, err, run = prepare_ground_state(fam, epsilon=1e-2, filter_method="chebyshev")
    assert err <= 1e-2
    assert run.filter_degree > 0


def test_closed_gap_is_reported():
    fam = InterpolationFamily(np.diag([0.0, 1.0]), np.diag([1.0, 0.0]))
    with pytest.raises(StageError) as info:
        prepare_ground_state(fam)
    assert isinstance(info.value.cause, GapError)


def test_unknown_filter_method():
    with pytest.raises(StageError, match="eigenstate filtering"):
        prepare_ground_state(grover_family(4), filter_method="magic")
    with pytest.raises(ValidationError):
        prepare_initial(grover_family(4), method="magic")
