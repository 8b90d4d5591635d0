import math

import numpy as np
import pytest

from qaclab._validation import ValidationError
from qaclab.family import gaps_on_grid
from qaclab.gaps import (GapProfile, check_segment_bounds, greedy_schedule, grover_gap,
                         level_sets, profile_from_family, weyl_regularize)
from qaclab.models import grover_family, random_gapped_family


def test_grover_profile_matches_matrix_pair():
    fam = grover_family(64)
    grid = np.linspace(0, 1, 51)
    assert np.allclose(grover_gap(64)(grid), gaps_on_grid(fam, grid, 0), atol=1e-12)
    assert grover_gap(64).minimum() == pytest.approx(1 / 8)


def test_regularized_profile_is_lipschitz_and_below_raw():
    grid = np.linspace(0, 1, 401)
    raw = 0.05 + np.abs(np.sin(9 * grid))
    prof = weyl_regularize(raw, 0.5, grid)
    vals = prof(grid)
    assert np.all(vals <= raw + 1e-15)
    assert np.abs(np.diff(vals)).max() <= 4 * 0.5 * (grid[1] - grid[0]) + 1e-15


def test_regularize_rejects_bad_input():
    grid = np.linspace(0, 1, 5)
    with pytest.raises(ValidationError):
        weyl_regularize(np.array([1, 1, 0, 1, 1.0]), 1.0, grid)
    with pytest.raises(ValidationError):
        weyl_regularize(np.ones(5), 1.0, grid[::-1])


@pytest.mark.parametrize("c", [0.05, 0.2, 0.24])
def test_schedule_step_rule_and_floors(c):
    prof = grover_gap(256)
    sched = greedy_schedule(prof, c)
    assert sched.points[0] == 0.0 and sched.points[-1] == 1.0
    assert sched.step_violation() <= 1e-12
    # every recorded floor lies below the true gap on its segment
    for a, b, g in zip(sched.points[:-1], sched.points[1:], sched.gammas):
        assert prof(np.linspace(a, b, 25)).min() >= g * (1 - 1e-12)


def test_schedule_rejects_c_out_of_range():
    with pytest.raises(ValidationError):
        greedy_schedule(grover_gap(4), 0.25)


def test_vanishing_gap_is_reported():
    prof = GapProfile(lambda s: np.abs(s - 0.5) + 0.0, 1.0, exact_minimum=0.0)
    with pytest.raises(ValidationError, match="underflows"):
        greedy_schedule(prof)


@pytest.mark.parametrize("size", [2 ** 10, 2 ** 14, 2 ** 20])
def test_grover_level_sets_and_segment_bounds(size):
    prof = grover_gap(size)
    ls = level_sets(prof)
    assert ls.L == pytest.approx(1.0, rel=0.15)
    assert ls.R == 2
    sched = greedy_schedule(prof)
    rep = check_segment_bounds(sched, prof, 1.0, 2.0)
    assert rep.passed
    assert rep.q <= rep.q_bound and rep.inverse_gap_sum <= rep.inverse_gap_bound


def test_inverse_gap_sum_follows_square_root_law():
    ratios = []
    for size in (2 ** 10, 2 ** 14, 2 ** 20):
        sched = greedy_schedule(grover_gap(size))
        ratios.append(np.sum(1 / sched.gammas) / math.sqrt(size))
    assert max(ratios) / min(ratios) <= 2


def test_profile_from_random_family():
    fam = random_gapped_family(6, 0.2, seed=3)
    prof = profile_from_family(fam, 0, 301)
    assert prof.minimum() >= 0.2 - 1e-9
    rep = check_segment_bounds(greedy_schedule(prof), prof, *_LR(prof))
    assert rep.passed


def _LR(prof):
    ls = level_sets(prof)
    return ls.L, ls.R
