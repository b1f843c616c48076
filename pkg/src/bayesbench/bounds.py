"""Reference bounds: Cramer-Rao trace, chi-squared median factor, grid floor."""

from functools import lru_cache
from itertools import product

import numpy as np
from scipy.special import gammainc

from ._validation import TWO_PI
from .exceptions import BoundUnavailableError, DomainError
from .probes import fisher_matrices, get_model

CONDITION_LIMIT = 1e12
_CHUNK = 8192


def inverse_fisher_traces(model, psi):
    """trace(F^-1) at each row of ``psi``; inf where F is ill-conditioned."""
    fims = fisher_matrices(model, psi)
    eig = np.linalg.eigvalsh(fims)
    lo, hi = eig[:, 0], eig[:, -1]
    ok = (lo > 0) & (hi <= CONDITION_LIMIT * np.where(lo > 0, lo, np.inf))
    traces = np.full(len(psi), np.inf)
    traces[ok] = np.sum(1.0 / eig[ok], axis=1)
    return traces


def crb_trace(model, grid_density=64):
    """Smallest single-probe trace(F^-1) over a regular grid of operating points.

    Only ``phi + theta`` enters the likelihood, so minimising over the grid
    gives the per-probe bound at the best control setting; the N-probe bound
    is this value divided by N.
    """
    if isinstance(model, str):
        model = get_model(model)
    if grid_density < 8:
        raise DomainError(f"grid_density must be >= 8, got {grid_density}")
    return _crb_trace_cached(model.model_id, int(grid_density))


@lru_cache(maxsize=None)
def _crb_trace_cached(model_id, grid_density):
    model = get_model(model_id)
    axis = np.arange(grid_density) * (TWO_PI / grid_density)
    p = model.parameter_count
    best = np.inf
    points = np.array(list(product(axis, repeat=p)))
    for start in range(0, len(points), _CHUNK):
        best = min(best, float(np.min(inverse_fisher_traces(model, points[start : start + _CHUNK]))))
    if not np.isfinite(best):
        raise BoundUnavailableError(f"Fisher matrix singular at every grid point for {model_id}")
    return best


def chi2_cdf(x, p):
    """Chi-squared CDF via the regularised lower incomplete gamma function."""
    return gammainc(0.5 * p, 0.5 * x)


@lru_cache(maxsize=None)
def chi2_median_factor(p, tol=1e-8):
    """median(chi^2_p) / p, found by bisection on the CDF.

    This is the expected ratio between the median and the mean of a quadratic
    loss built from ``p`` independent Gaussian errors of equal variance.
    """
    if p < 1:
        raise DomainError(f"parameter count must be >= 1, got {p}")
    lo, hi = 0.0, float(p)
    while chi2_cdf(hi, p) < 0.5:
        hi *= 2.0
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if chi2_cdf(mid, p) < 0.5:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi) / p


def discretization_floor(n, p):
    """(2*pi/n)^p, the resolution of n grid points on the p-torus."""
    if n < 2 or p < 1:
        raise DomainError(f"need n >= 2 and p >= 1, got n={n}, p={p}")
    return (TWO_PI / n) ** p
