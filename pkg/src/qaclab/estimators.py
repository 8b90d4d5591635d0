# Thin scikit-learn style wrappers over the functional pipelines.
# Hyperparameters live in __init__, fitted state in trailing-underscore attributes.
import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.exceptions import NotFittedError

from ._validation import ValidationError
from .family import InterpolationFamily
from .gaps import DEFAULT_C, GapProfile, greedy_schedule, level_sets, profile_from_family
from .ground_state import DEFAULT_C_T, DEFAULT_PRECISION, prepare_ground_state
from .propagation import execute_plan, plan_eigenstate_run


def _as_family(X):
    if isinstance(X, InterpolationFamily):
        return X
    try:
        H0, H1 = X
    except (TypeError, ValueError):
        raise ValidationError("expected an InterpolationFamily or a pair (H0, H1)") from None
    return InterpolationFamily(np.asarray(H0), np.asarray(H1))


def _check_fitted(est, attr):
    if not hasattr(est, attr):
        raise NotFittedError(f"{type(est).__name__} is not fitted yet; call fit first")


class EigenstateTracker(TransformerMixin, BaseEstimator):
    """Fit on a Hamiltonian pair, then carry states along the path.

    ``transform`` applies the fitted segmented propagator to each row of ``X``.
    """

    def __init__(self, level=0, epsilon=1e-2, probe=True):
        self.level = level
        self.epsilon = epsilon
        self.probe = probe

    def fit(self, X, y=None):
        fam = _as_family(X)
        plan = plan_eigenstate_run(fam, self.level, self.epsilon, probe=self.probe)
        self.propagator_, self.run_ = execute_plan(plan)
        self.gamma_ = plan.gamma
        self.segment_count_ = plan.segment_count
        self.n_features_in_ = fam.dim
        return self

    def transform(self, X):
        _check_fitted(self, "propagator_")
        X = np.asarray(X, dtype=complex)
        single = X.ndim == 1
        X = np.atleast_2d(X)
        if X.shape[1] != self.n_features_in_:
            raise ValidationError(f"states must have {self.n_features_in_} components")
        out = X @ self.propagator_.T
        return out[0] if single else out


class GroundStatePreparer(BaseEstimator):
    """Fit prepares the ground state of ``H1``; the result is ``state_``."""

    def __init__(self, epsilon=1e-2, gamma1=None, c=DEFAULT_PRECISION, c_T=DEFAULT_C_T,
                 filter_method="exact"):
        self.epsilon = epsilon
        self.gamma1 = gamma1
        self.c = c
        self.c_T = c_T
        self.filter_method = filter_method

    def fit(self, X, y=None):
        fam = _as_family(X)
        self.state_, self.error_, self.run_ = prepare_ground_state(
            fam, self.gamma1, self.epsilon, self.c, self.c_T, self.filter_method)
        self.energy_ = self.run_.energy.value
        return self

    def transform(self, X=None):
        _check_fitted(self, "state_")
        return self.state_


class GapAdaptiveScheduler(BaseEstimator):
    """Fit builds a greedy schedule from a gap profile or a Hamiltonian pair.

    ``transform`` maps path positions ``s`` to their segment index.
    """

    def __init__(self, c=DEFAULT_C, level=0, grid_points=2001):
        self.c = c
        self.level = level
        self.grid_points = grid_points

    def fit(self, X, y=None):
        profile = X if isinstance(X, GapProfile) else profile_from_family(
            _as_family(X), self.level, self.grid_points)
        self.profile_ = profile
        self.schedule_ = greedy_schedule(profile, self.c)
        self.level_sets_ = level_sets(profile)
        return self

    def transform(self, X):
        _check_fitted(self, "schedule_")
        s = np.asarray(X, dtype=float)
        if np.any((s < 0) | (s > 1)):
            raise ValidationError("path positions must lie in [0, 1]")
        idx = np.searchsorted(self.schedule_.points, s, side="right") - 1
        return np.clip(idx, 0, self.schedule_.q - 1)
