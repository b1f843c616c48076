"""Choice of the control phases applied before each probe."""

from dataclasses import dataclass

import numpy as np

from ._validation import TWO_PI, check_random_state, wrap_angles
from .exceptions import ConfigurationError
from .particles import summarize, variance_traces

OUTCOME_FLOOR = 1e-12
STRATEGY_KINDS = ("random", "adaptive")


@dataclass(frozen=True)
class StrategyConfig:
    kind: str = "random"
    candidate_count: int = 30
    include_estimate_heuristic: bool = True

    def __post_init__(self):
        if self.kind not in STRATEGY_KINDS:
            raise ConfigurationError(
                f"strategy must be one of {STRATEGY_KINDS}, got {self.kind!r}", key="strategy"
            )
        if self.kind == "adaptive" and self.candidate_count < 1:
            raise ConfigurationError("candidate_count must be >= 1", key="K")


def next_control_random(p, random_state=None):
    """Independent uniform control phases on [0, 2*pi)."""
    rng = check_random_state(random_state)
    return rng.uniform(0.0, TWO_PI, size=p)


def expected_posterior_variances(cloud, model, thetas, estimator="circular"):
    """Expected posterior variance trace for each row of ``thetas`` (K, p).

    Outcomes whose predictive probability falls below 1e-12 are dropped.
    """
    thetas = np.atleast_2d(np.asarray(thetas, dtype=float))
    like = model.shifted_probabilities(cloud.positions, thetas)
    joint = cloud.weights[None, :, None] * like  # (K, n, outcomes)
    predictive = joint.sum(axis=1)
    keep = predictive >= OUTCOME_FLOOR
    posterior = joint / np.where(keep, predictive, 1.0)[:, None, :]
    posterior = np.swapaxes(posterior, 1, 2)  # (K, outcomes, n)
    traces = variance_traces(cloud.positions, posterior, estimator)
    return np.where(keep, predictive * traces, 0.0).sum(axis=1)


def expected_posterior_variance(cloud, model, theta, estimator="circular"):
    """Sum over outcomes of Pr(m | theta) times the updated variance trace."""
    theta = np.asarray(theta, dtype=float).reshape(1, -1)
    return float(expected_posterior_variances(cloud, model, theta, estimator)[0])


def adaptive_candidates(cloud, config, random_state=None, estimator="circular"):
    """Candidate controls in evaluation order: K random, then -estimate."""
    rng = check_random_state(random_state)
    cands = rng.uniform(0.0, TWO_PI, size=(config.candidate_count, cloud.p))
    if config.include_estimate_heuristic:
        guess = wrap_angles(-summarize(cloud, estimator).estimate)
        cands = np.vstack([cands, guess[None, :]])
    return cands


def next_control_adaptive(cloud, model, config, random_state=None, estimator="circular"):
    """Candidate with the lowest expected posterior variance; first wins ties."""
    cands = adaptive_candidates(cloud, config, random_state, estimator)
    scores = expected_posterior_variances(cloud, model, cands, estimator)
    return cands[int(np.argmin(scores))]


def next_control(cloud, model, config, random_state=None, estimator="circular"):
    if config.kind == "random":
        return next_control_random(cloud.p, random_state)
    return next_control_adaptive(cloud, model, config, random_state, estimator)
