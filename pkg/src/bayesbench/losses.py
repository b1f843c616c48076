"""Figures of merit and their aggregation over repeated runs."""

from dataclasses import dataclass

import numpy as np

from ._validation import TWO_PI
from .exceptions import DomainError

AGGREGATION_MODES = (
    "mean-all",
    "median-all",
    "mean-per-phase-then-mean",
    "mean-per-phase-then-median",
    "median-per-phase-then-mean",
    "median-per-phase-then-median",
)


def wrapped_distance(a, b):
    d = np.mod(np.abs(np.asarray(a, dtype=float) - np.asarray(b, dtype=float)), TWO_PI)
    return np.minimum(d, TWO_PI - d)


def quadratic_loss(estimate, truth):
    """Sum of squared wrapped distances between estimate and truth.

    Accepts single vectors or stacked (..., p) arrays.
    """
    estimate = np.asarray(estimate, dtype=float)
    truth = np.asarray(truth, dtype=float)
    if estimate.shape[-1:] != truth.shape[-1:]:
        raise DomainError(
            f"estimate and truth lengths differ: {estimate.shape[-1:]} vs {truth.shape[-1:]}"
        )
    loss = np.sum(wrapped_distance(estimate, truth) ** 2, axis=-1)
    return float(loss) if np.ndim(loss) == 0 else loss


@dataclass(frozen=True)
class AggregateCurve:
    """Per-probe aggregate of quadratic loss and posterior variance.

    ``loss`` and ``variance`` hold the reduction selected by ``mode``;
    ``run_count`` is the number of runs that entered each point.
    """

    mode: str
    probe_index: np.ndarray
    loss: np.ndarray
    variance: np.ndarray
    run_count: np.ndarray

    def rescaled_loss(self, crb_trace, k_factor=1.0):
        """N * loss / (k * crb); tends to 1 for an efficient estimator."""
        return self.probe_index * self.loss / (k_factor * crb_trace)

    def rescaled_variance(self, crb_trace):
        return self.probe_index * self.variance / crb_trace


def _stack(trajectories):
    runs = [t for t in trajectories if not getattr(t, "failed", False)]
    if not runs:
        raise DomainError("cannot aggregate an empty set of trajectories")
    lengths = {len(t.quadratic_losses) for t in runs}
    if len(lengths) != 1:
        raise DomainError(f"trajectories have inconsistent probe counts {sorted(lengths)}")
    loss = np.vstack([t.quadratic_losses for t in runs])
    var = np.vstack([t.variance_traces for t in runs])
    phase = np.array([t.phase_index for t in runs])
    return loss, var, phase


def _reduce(values, phase, mode):
    if mode == "mean-all":
        return values.mean(axis=0)
    if mode == "median-all":
        return np.median(values, axis=0)
    first, _, _, _, last = mode.split("-")
    inner = np.mean if first == "mean" else np.median
    outer = np.mean if last == "mean" else np.median
    per_phase = np.vstack([inner(values[phase == k], axis=0) for k in np.unique(phase)])
    return outer(per_phase, axis=0)


def aggregate(trajectories, mode="median-all"):
    """Combine runs probe-by-probe.

    ``*-all`` modes pool every run; two-stage modes reduce the repetitions
    of each true phase first and then reduce across phases.  Failed runs
    are skipped.
    """
    if mode not in AGGREGATION_MODES:
        raise DomainError(f"mode must be one of {AGGREGATION_MODES}, got {mode!r}")
    loss, var, phase = _stack(trajectories)
    n_probes = loss.shape[1]
    return AggregateCurve(
        mode=mode,
        probe_index=np.arange(1, n_probes + 1),
        loss=_reduce(loss, phase, mode),
        variance=_reduce(var, phase, mode),
        run_count=np.full(n_probes, loss.shape[0]),
    )


def convergence_table(trajectories, crb_trace, k_factor):
    """Mean and median curves side by side, with bound-rescaled columns."""
    mean = aggregate(trajectories, "mean-all")
    median = aggregate(trajectories, "median-all")
    n = mean.probe_index
    return {
        "N": n,
        "mean_loss": mean.loss,
        "median_loss": median.loss,
        "mean_variance": mean.variance,
        "median_variance": median.variance,
        "runs": mean.run_count,
        "crb": crb_trace / n,
        "k_crb": k_factor * crb_trace / n,
        "mean_loss_rescaled": mean.rescaled_loss(crb_trace),
        "median_loss_rescaled": median.rescaled_loss(crb_trace, k_factor),
        "mean_variance_rescaled": mean.rescaled_variance(crb_trace),
        "median_variance_rescaled": median.rescaled_variance(crb_trace),
    }


def mean_median_crossing(curve_mean, curve_median, threshold=0.01, quantity="loss"):
    """First probe index after which the two curves agree to ``threshold``.

    Returns ``None`` when the relative gap never settles below the threshold.
    """
    if threshold <= 0:
        raise DomainError("threshold must be positive")
    a = np.asarray(getattr(curve_mean, quantity), dtype=float)
    b = np.asarray(getattr(curve_median, quantity), dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where((a == b), 1.0, a / b)
    bad = np.flatnonzero(~(np.abs(ratio - 1.0) < threshold))
    if bad.size == 0:
        return int(curve_mean.probe_index[0])
    if bad[-1] == len(ratio) - 1:
        return None
    return int(curve_mean.probe_index[bad[-1] + 1])


@dataclass(frozen=True)
class KernelDensity:
    grid: np.ndarray
    density: np.ndarray
    bandwidth: float
    degenerate: bool = False


def silverman_bandwidth(values):
    """1.06 * min(std, IQR / 1.349) * n^(-1/5)."""
    values = np.asarray(values, dtype=float)
    std = np.std(values, ddof=1)
    q75, q25 = np.percentile(values, [75, 25])
    spread = min(std, (q75 - q25) / 1.349)
    if spread <= 0:
        spread = std
    return 1.06 * spread * values.size ** (-0.2)


def kernel_density(values, grid_points=256):
    """Gaussian KDE on a uniform grid covering [min - 3 bw, max + 3 bw].

    Constant input yields a single unit spike flagged ``degenerate``.
    """
    values = np.asarray(values, dtype=float).ravel()
    if values.size < 2:
        raise DomainError("kernel density needs at least two values")
    if grid_points < 16:
        raise DomainError("grid_points must be >= 16")
    bw = silverman_bandwidth(values)
    if not bw > 0:
        return KernelDensity(np.array([values[0]]), np.array([1.0]), 0.0, degenerate=True)
    grid = np.linspace(values.min() - 3 * bw, values.max() + 3 * bw, grid_points)
    z = (grid[:, None] - values[None, :]) / bw
    density = np.exp(-0.5 * z * z).sum(axis=1) / (values.size * bw * np.sqrt(2 * np.pi))
    return KernelDensity(grid, density, float(bw))
