"""scikit-learn compatible front-ends.

``BayesianPhaseEstimator`` treats a measurement record as training data:
``X`` holds the control phases of each probe and ``y`` the observed outcome
indices.  ``HeuristicScalingRegressor`` fits the particle-count scaling law
with ``X = [[n, p], ...]``.
"""

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y

from .exceptions import DegenerateUpdateError, DomainError
from .heuristic import FitPoint, eval_f, fit_heuristic
from .particles import (
    bayes_update,
    init_uniform_prior,
    liu_west_resample,
    summarize,
)
from .probes import get_model


class BayesianPhaseEstimator(BaseEstimator):
    """Particle-filter posterior over the phases of a probe model.

    Parameters
    ----------
    model : str
        Model identifier, see :func:`bayesbench.probes.get_model`.
    n_particles : int
    resampling : bool
        Apply Liu-West resampling when the ESS drops below
        ``ess_threshold * n_particles``.
    liu_west_a, ess_threshold : float
    estimator : {"circular", "linear"}
    random_state : int, Generator or None
    """

    def __init__(
        self,
        model="single_qubit",
        n_particles=1000,
        resampling=True,
        liu_west_a=0.98,
        ess_threshold=0.5,
        estimator="circular",
        random_state=None,
    ):
        self.model = model
        self.n_particles = n_particles
        self.resampling = resampling
        self.liu_west_a = liu_west_a
        self.ess_threshold = ess_threshold
        self.estimator = estimator
        self.random_state = random_state

    def _check_record(self, X, y):
        X, y = check_X_y(X, y, dtype=float, ensure_min_samples=1)
        p = self.model_.parameter_count
        if X.shape[1] != p:
            raise DomainError(f"expected {p} control columns, got {X.shape[1]}")
        if np.any(y != np.round(y)) or np.any(y < 0) or np.any(y >= self.model_.outcome_count):
            raise DomainError("outcomes must be integer indices into the model's outcome set")
        return X, y.astype(int)

    def fit(self, X, y):
        """Start from the uniform prior and condition on every (control, outcome)."""
        self.model_ = get_model(self.model)
        self._rng = np.random.default_rng(self.random_state)
        self.cloud_ = init_uniform_prior(
            self.n_particles, self.model_.parameter_count, self._rng,
            self.liu_west_a, self.ess_threshold,
        )
        self.n_probes_seen_ = 0
        self.degenerate_restarts_ = 0
        return self.partial_fit(X, y)

    def partial_fit(self, X, y):
        if not hasattr(self, "cloud_"):
            return self.fit(X, y)
        X, y = self._check_record(X, y)
        cloud = self.cloud_
        for theta, m in zip(X, y):
            try:
                cloud = bayes_update(cloud, self.model_, int(m), theta)
            except DegenerateUpdateError:
                self.degenerate_restarts_ += 1
                cloud = init_uniform_prior(
                    self.n_particles, self.model_.parameter_count, self._rng,
                    self.liu_west_a, self.ess_threshold,
                )
            if self.resampling and cloud.needs_resampling():
                cloud = liu_west_resample(cloud, self._rng)
        self.cloud_ = cloud
        self.n_probes_seen_ += len(y)
        summary = summarize(cloud, self.estimator)
        self.estimate_ = summary.estimate
        self.covariance_ = summary.covariance
        self.variance_trace_ = summary.variance_trace
        return self

    def predict_proba(self, X):
        """Posterior-predictive outcome distribution for each row of controls."""
        check_is_fitted(self, "cloud_")
        X = check_array(X, dtype=float)
        like = self.model_.probabilities(self.cloud_.positions[None, :, :], X[:, None, :])
        return np.einsum("n,knm->km", self.cloud_.weights, like)

    def predict(self, X):
        """Most probable outcome for each row of controls."""
        return np.argmax(self.predict_proba(X), axis=1)


class HeuristicScalingRegressor(RegressorMixin, BaseEstimator):
    """Least-squares fit of the particle-count scaling law in log space.

    ``X`` has two columns, particle count ``n`` and parameter count ``p``;
    ``y`` is the rescaled median loss of each cell.
    """

    def __init__(self, starts=32, random_state=0):
        self.starts = starts
        self.random_state = random_state

    def fit(self, X, y, sample_weight=None):
        X, y = check_X_y(X, y, dtype=float)
        if X.shape[1] != 2:
            raise DomainError("X must have exactly two columns: n and p")
        w = np.ones(len(y)) if sample_weight is None else np.asarray(sample_weight, dtype=float)
        points = [FitPoint(int(n), int(p), float(t), float(wt)) for (n, p), t, wt in zip(X, y, w)]
        self.report_ = fit_heuristic(points, starts=self.starts, random_state=self.random_state)
        self.params_ = self.report_.params
        return self

    def predict(self, X):
        check_is_fitted(self, "params_")
        X = check_array(X, dtype=float)
        return eval_f(self.params_, X[:, 0], X[:, 1])
