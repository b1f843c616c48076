"""Sequential Monte Carlo posterior on the p-torus.

Angles live on [0, 2*pi).  Moments are taken in a local chart: each
component is re-centred on its circular mean so that deviations fall in
(-pi, pi], which keeps clusters straddling the wrap point tight.
"""

from dataclasses import dataclass, field, replace

import numpy as np

from ._validation import TWO_PI, check_positions, check_random_state, wrap_angles, wrap_centered
from .exceptions import ConfigurationError, DegenerateUpdateError, DomainError

UNDERFLOW = 1e-300
RESULTANT_FLOOR = 1e-12
COVARIANCE_FLOOR = 1e-6**2
ESTIMATORS = ("circular", "linear")


@dataclass(frozen=True)
class ParticleCloud:
    """Weighted particle approximation of a posterior over ``p`` phases."""

    positions: np.ndarray
    weights: np.ndarray
    liu_west_a: float = 0.98
    ess_threshold_fraction: float = 0.5

    def __post_init__(self):
        positions = check_positions(self.positions)
        weights = np.asarray(self.weights, dtype=float)
        if positions.shape[0] < 1 or weights.shape != (positions.shape[0],):
            raise DomainError("weights must have one entry per particle")
        if np.any(weights < 0) or not np.all(np.isfinite(weights)):
            raise DomainError("weights must be finite and non-negative")
        if not 0.0 < self.liu_west_a < 1.0:
            raise ConfigurationError("liu_west_a must lie in (0, 1)", key="liu_west_a")
        if not 0.0 < self.ess_threshold_fraction <= 1.0:
            raise ConfigurationError(
                "ess_threshold_fraction must lie in (0, 1]", key="ess_threshold"
            )
        object.__setattr__(self, "positions", positions)
        object.__setattr__(self, "weights", weights / weights.sum())

    @property
    def n(self):
        return self.positions.shape[0]

    @property
    def p(self):
        return self.positions.shape[1]

    def needs_resampling(self):
        return effective_sample_size(self) < self.ess_threshold_fraction * self.n


@dataclass(frozen=True)
class PosteriorSummary:
    estimate: np.ndarray
    covariance: np.ndarray
    variance_trace: float
    low_confidence: bool = field(default=False)


def init_uniform_prior(n, p, random_state=None, liu_west_a=0.98, ess_threshold_fraction=0.5):
    """Uniform prior: ``n`` i.i.d. uniform positions on [0, 2*pi)^p, weights 1/n."""
    if isinstance(n, bool) or int(n) != n or n < 2:
        raise ConfigurationError(f"particle count must be an integer >= 2, got {n!r}", key="n")
    if isinstance(p, bool) or int(p) != p or p < 1:
        raise ConfigurationError(f"parameter count must be >= 1, got {p!r}", key="p")
    rng = check_random_state(random_state)
    positions = rng.uniform(0.0, TWO_PI, size=(int(n), int(p)))
    return ParticleCloud(
        positions,
        np.full(int(n), 1.0 / n),
        liu_west_a=liu_west_a,
        ess_threshold_fraction=ess_threshold_fraction,
    )


def bayes_update(cloud, model, m, theta):
    """Multiply weights by the likelihood of outcome ``m`` and renormalise."""
    m = model._check_outcome(m)
    theta = np.asarray(theta, dtype=float)
    like = model.probabilities(cloud.positions, theta)[:, m]
    w = cloud.weights * like
    if np.all(w < UNDERFLOW):
        raise DegenerateUpdateError(f"all particle weights underflowed after outcome {m}")
    return replace(cloud, weights=w)


def effective_sample_size(cloud):
    w = cloud.weights
    return float(1.0 / np.dot(w, w))


def circular_mean(positions, weights):
    """Weighted circular mean per component and its resultant length.

    ``positions`` is (..., n, p) and ``weights`` (..., n); returns arrays of
    shape (..., p).
    """
    z = np.einsum("...n,...np->...p", weights, np.exp(1j * positions))
    resultant = np.abs(z)
    mean = np.where(resultant < RESULTANT_FLOOR, 0.0, wrap_angles(np.angle(z)))
    return mean, resultant


def chart_moments(positions, weights, estimator="circular"):
    """Location, covariance and low-confidence flags of weighted clouds.

    Works on a single cloud (n, p) or a batch (..., n, p).  For the circular
    estimator the covariance is computed from deviations in (-pi, pi]
    around the circular mean; the linear estimator uses raw angles.
    """
    positions = np.asarray(positions, dtype=float)
    weights = np.asarray(weights, dtype=float)
    if estimator == "circular":
        centre, resultant = circular_mean(positions, weights)
        low = resultant < RESULTANT_FLOOR
        dev = wrap_centered(positions - centre[..., None, :])
    elif estimator == "linear":
        centre = np.einsum("...n,...np->...p", weights, positions)
        low = np.zeros(centre.shape, dtype=bool)
        dev = positions - centre[..., None, :]
    else:
        raise DomainError(f"estimator must be one of {ESTIMATORS}, got {estimator!r}")
    first = np.einsum("...n,...np->...p", weights, dev)
    second = np.einsum("...n,...np,...nq->...pq", weights, dev, dev)
    cov = second - first[..., :, None] * first[..., None, :]
    cov = 0.5 * (cov + np.swapaxes(cov, -1, -2))
    return centre, cov, low


def variance_traces(positions, weights, estimator="circular"):
    """Chart variance trace of one particle set under many weightings.

    ``positions`` is (n, p) and shared; ``weights`` is (..., n).  Equivalent to
    the trace of :func:`chart_moments` covariance, computed per component.
    """
    positions = np.asarray(positions, dtype=float)
    weights = np.asarray(weights, dtype=float)
    batch = weights.shape[:-1]
    w = weights.reshape(-1, positions.shape[0])
    total = np.zeros(w.shape[0])
    for k in range(positions.shape[1]):
        x = positions[:, k]
        if estimator == "circular":
            z = w @ np.exp(1j * x)
            centre = np.where(np.abs(z) < RESULTANT_FLOOR, 0.0, wrap_angles(np.angle(z)))
            dev = x[None, :] - centre[:, None]
            # both terms lie in [0, 2 pi): one conditional shift lands in (-pi, pi]
            dev = np.where(dev > np.pi, dev - TWO_PI, dev)
            dev = np.where(dev <= -np.pi, dev + TWO_PI, dev)
        elif estimator == "linear":
            dev = x[None, :] - (w @ x)[:, None]
        else:
            raise DomainError(f"estimator must be one of {ESTIMATORS}, got {estimator!r}")
        wd = w * dev
        first = wd.sum(axis=1)
        total += np.einsum("bn,bn->b", wd, dev) - first * first
    return total.reshape(batch)


def summarize(cloud, estimator="circular"):
    """Point estimate and posterior spread of ``cloud``."""
    centre, cov, low = chart_moments(cloud.positions, cloud.weights, estimator)
    return PosteriorSummary(
        estimate=wrap_angles(centre),
        covariance=cov,
        variance_trace=float(np.trace(cov)),
        low_confidence=bool(np.any(low)),
    )


def systematic_resample(weights, rng):
    """Ancestor indices by low-variance systematic resampling."""
    n = weights.shape[0]
    u = (rng.random() + np.arange(n)) / n
    cdf = np.cumsum(weights)
    cdf[-1] = 1.0
    return np.searchsorted(cdf, u, side="right").clip(max=n - 1)


def liu_west_resample(cloud, random_state=None):
    """Liu-West resampling with shrinkage towards the circular mean.

    New positions are ``mu + a * d_anc + (1 - a) * mean(d) + noise`` in the
    chart centred at the circular mean ``mu``, with Gaussian noise of
    covariance ``(1 - a^2) * Sigma``.  A singular ``Sigma`` is replaced by its
    diagonal floored at 1e-12; an exactly zero ``Sigma`` adds no noise.
    """
    rng = check_random_state(random_state)
    a = cloud.liu_west_a
    mu, _ = circular_mean(cloud.positions, cloud.weights)
    dev = wrap_centered(cloud.positions - mu)
    _, cov, _ = chart_moments(cloud.positions, cloud.weights)
    mean_dev = cloud.weights @ dev

    ancestors = systematic_resample(cloud.weights, rng)
    shrunk = a * dev[ancestors] + (1.0 - a) * mean_dev
    if np.any(cov):
        try:
            chol = np.linalg.cholesky((1.0 - a * a) * cov)
        except np.linalg.LinAlgError:
            chol = np.diag(np.sqrt((1.0 - a * a) * np.maximum(np.diag(cov), COVARIANCE_FLOOR)))
        shrunk = shrunk + rng.standard_normal((cloud.n, cloud.p)) @ chol.T
    positions = wrap_angles(mu + shrunk)
    return replace(cloud, positions=positions, weights=np.full(cloud.n, 1.0 / cloud.n))
