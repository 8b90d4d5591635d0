"""Gap-adaptive segmentation of the interpolation path."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from ._validation import ValidationError, check_positive
from .family import InterpolationFamily, gaps_on_grid
from .models import grover_family

DEFAULT_C = 0.2
MIN_STEP = 1e-12


@dataclass(frozen=True, eq=False)
class GapProfile:
    """A lower bound ``s -> gamma(s)`` on the gap, with the norm bound ``alpha``.

    ``evaluator`` must accept numpy arrays. ``grid_resolution`` is the number
    of cells used by level-set scans.
    """

    evaluator: Callable[[np.ndarray], np.ndarray]
    alpha: float
    grid_resolution: int = 20_000
    exact_minimum: float | None = None

    def __call__(self, s):
        out = np.asarray(self.evaluator(np.asarray(s, dtype=float)), dtype=float)
        return float(out) if out.ndim == 0 else out

    def minimum(self) -> float:
        if self.exact_minimum is not None:
            return float(self.exact_minimum)
        return float(np.min(self(np.linspace(0, 1, self.grid_resolution + 1))))


@dataclass(frozen=True, eq=False)
class Schedule:
    """Breakpoints ``0 = s_0 < ... < s_q = 1`` and per-segment gap floors."""

    points: np.ndarray
    gammas: np.ndarray
    c: float
    alpha: float

    @property
    def q(self) -> int:
        return len(self.gammas)

    @property
    def lengths(self) -> np.ndarray:
        return np.diff(self.points)

    def step_violation(self) -> float:
        """Largest relative breach of ``c0 g/alpha <= length <= c g/alpha``.

        The final segment is clipped at 1 and only checked against the upper end.
        """
        c0 = self.c / (1 + 4 * self.c)
        lo = c0 * self.gammas / self.alpha
        hi = self.c * self.gammas / self.alpha
        d = self.lengths
        over = np.maximum(d - hi, 0) / hi
        under = np.maximum(lo[:-1] - d[:-1], 0) / lo[:-1]
        return float(max(over.max(initial=0.0), under.max(initial=0.0)))


def _cone_envelope(values, grid, slope):
    # largest function below values with |g(s) - g(t)| <= slope |s - t|
    g = np.array(values, dtype=float)
    dx = np.diff(grid)
    for i in range(1, len(g)):
        g[i] = min(g[i], g[i - 1] + slope * dx[i - 1])
    for i in range(len(g) - 2, -1, -1):
        g[i] = min(g[i], g[i + 1] + slope * dx[i])
    return g


def weyl_regularize(raw, alpha: float, grid) -> GapProfile:
    """Largest profile below ``raw`` whose slope never exceeds ``4 alpha``.

    ``raw`` is either a callable or an array of values on ``grid``. Between
    grid points the result interpolates linearly, which keeps the slope bound.
    """
    alpha = check_positive(alpha, "alpha")
    grid = np.asarray(grid, dtype=float)
    if grid.ndim != 1 or len(grid) < 2 or np.any(np.diff(grid) <= 0):
        raise ValidationError("grid must be strictly increasing with at least two points")
    vals = np.asarray(raw(grid) if callable(raw) else raw, dtype=float)
    if vals.shape != grid.shape:
        raise ValidationError("raw values must match the grid")
    if np.any(~np.isfinite(vals)) or np.any(vals <= 0):
        raise ValidationError("gap values must be positive")
    g = _cone_envelope(vals, grid, 4 * alpha)
    return GapProfile(lambda s: np.interp(s, grid, g), alpha, max(len(grid) - 1, 20_000),
                      exact_minimum=float(g.min()))


def profile_from_family(fam: InterpolationFamily, k: int, points: int = 2001) -> GapProfile:
    grid = np.linspace(0, 1, points)
    return weyl_regularize(gaps_on_grid(fam, grid, k), fam.alpha, grid)


def grover_gap(search_size: int) -> GapProfile:
    """``gamma(s) = sqrt(1 - 4 (1 - 1/n) s (1 - s))`` with ``alpha = 1``.

    The matrix pair with this gap is :func:`grover_family`.
    """
    if int(search_size) != search_size or search_size < 2:
        raise ValidationError("search size must be an integer >= 2")
    a = 1 - 1 / int(search_size)

    def ev(s):
        return np.sqrt(np.maximum(1 - 4 * a * s * (1 - s), 0.0))

    return GapProfile(ev, 1.0, exact_minimum=math.sqrt(1 / int(search_size)))


grover_pair = grover_family


def greedy_schedule(profile: GapProfile, c: float = DEFAULT_C) -> Schedule:
    """Step ``c gamma(s_i) / (alpha (1 + 4c))`` from each breakpoint.

    The slope bound gives ``gamma >= gamma(s_i) / (1 + 4c)`` on the whole
    segment, which is the recorded floor.
    """
    if not 0 < c < 0.25:
        raise ValidationError("c must lie in (0, 1/4)")
    alpha = profile.alpha
    pts, gams = [0.0], []
    s = 0.0
    while s < 1.0:
        g = profile(s)
        step = c * g / (alpha * (1 + 4 * c))
        if not step >= MIN_STEP:
            raise ValidationError(f"schedule step {step:.3e} underflows at s={s:.12f}; "
                                  "the gap effectively vanishes")
        s = min(1.0, s + step)
        pts.append(s)
        gams.append(g / (1 + 4 * c))
    return Schedule(np.array(pts), np.array(gams), float(c), float(alpha))


@dataclass(frozen=True)
class LevelSetReport:
    levels: tuple  # (l, measure, interval count) per nonempty level
    L: float
    R: int
    resolution: int


def level_sets(profile: GapProfile, alpha: float | None = None,
               resolution: int | None = None) -> LevelSetReport:
    """Measure and interval count of ``J_l = {alpha/2^(l+1) < gamma <= alpha/2^l}``.

    The scan uses cell midpoints; the default resolution puts at least a few
    hundred cells across the narrowest level near the minimum.
    """
    alpha = profile.alpha if alpha is None else float(alpha)
    gmin = profile.minimum()
    n = resolution or max(profile.grid_resolution, int(math.ceil(400 * alpha / gmin)))
    mids = (np.arange(n) + 0.5) / n
    g = profile(mids)
    with np.errstate(divide="ignore"):
        lvl = np.floor(np.log2(alpha / g)).astype(int)
    # floor(log2(alpha/g)) = l exactly when alpha/2^(l+1) < g <= alpha/2^l
    lvl = np.maximum(lvl, 0)
    out = []
    for l in np.unique(lvl):
        member = lvl == l
        runs = int(np.count_nonzero(np.diff(member.astype(np.int8)) == 1) + member[0])
        out.append((int(l), float(member.sum() / n), runs))
    L = max(2.0 ** l * m for l, m, _ in out)
    R = max(r for _, _, r in out)
    return LevelSetReport(tuple(out), float(L), int(R), n)


@dataclass(frozen=True)
class SegmentBoundReport:
    q: int
    q_bound: float
    inverse_gap_sum: float
    inverse_gap_bound: float
    gamma: float
    L: float
    R: float
    c: float
    passed: bool
    details: dict = field(default_factory=dict)


def check_segment_bounds(schedule: Schedule, profile: GapProfile, L: float, R: float) -> SegmentBoundReport:
    """Compare the schedule with the level-set bounds on ``q`` and ``sum 1/gamma_i``.

    ``q <= (floor(log2(alpha/gamma)) + 2)(2L/c + R)`` and
    ``sum_i 1/gamma_i <= 4/(1 - 4c) (2L/c + R) / gamma``.
    """
    if schedule.q == 0:
        raise ValidationError("empty schedule")
    c, alpha = schedule.c, schedule.alpha
    gamma = profile.minimum()
    width = 2 * L / c + R
    q_bound = (math.floor(math.log2(alpha / gamma)) + 2) * width
    inv = float(np.sum(1.0 / schedule.gammas))
    inv_bound = 4 / (1 - 4 * c) * width / gamma
    passed = schedule.q <= q_bound and inv <= inv_bound
    return SegmentBoundReport(schedule.q, float(q_bound), inv, float(inv_bound), gamma,
                            float(L), float(R), c, bool(passed),
                            {"step_violation": schedule.step_violation()})
