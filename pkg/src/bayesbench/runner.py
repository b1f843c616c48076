"""Estimation runs and seeded benchmark sweeps."""

import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from ._validation import TWO_PI, check_angles, check_int
from .bounds import chi2_median_factor, crb_trace
from .controls import StrategyConfig, next_control
from .exceptions import ConfigurationError, DegenerateUpdateError
from .losses import quadratic_loss
from .particles import (
    ESTIMATORS,
    bayes_update,
    init_uniform_prior,
    liu_west_resample,
    summarize,
)
from .probes import MODEL_IDS, get_model, sample_outcome

logger = logging.getLogger(__name__)

MAX_RESTARTS = 10
_MASK = (1 << 64) - 1
_PHASE_STREAM_TAG = 0x5BD1E9955BD1E995


@dataclass(frozen=True)
class ExperimentConfig:
    model_id: str
    n: int
    N: int
    M: int = 1
    r: int = 1
    master_seed: int = 0
    strategy: StrategyConfig = field(default_factory=StrategyConfig)
    resampling_enabled: bool = True
    estimator: str = "circular"
    liu_west_a: float = 0.98
    ess_threshold: float = 0.5
    crb_grid_density: int = 64

    def __post_init__(self):
        if self.model_id not in MODEL_IDS:
            raise ConfigurationError(
                f"model must be one of {MODEL_IDS}, got {self.model_id!r}", key="model"
            )
        check_int(self.n, "n", 2)
        for key in ("N", "M", "r"):
            check_int(getattr(self, key), key, 1)
        check_int(self.master_seed, "seed", 0)
        if self.master_seed > _MASK:
            raise ConfigurationError("seed must fit in 64 bits", key="seed")
        if self.estimator not in ESTIMATORS:
            raise ConfigurationError(
                f"estimator must be one of {ESTIMATORS}, got {self.estimator!r}", key="estimator"
            )
        if not 0.0 < self.liu_west_a < 1.0:
            raise ConfigurationError("liu_west_a must lie in (0, 1)", key="liu_west_a")
        if not 0.0 < self.ess_threshold <= 1.0:
            raise ConfigurationError("ess_threshold must lie in (0, 1]", key="ess_threshold")
        check_int(self.crb_grid_density, "crb_grid_density", 8)

    @property
    def model(self):
        return get_model(self.model_id)

    @property
    def p(self):
        return self.model.parameter_count

    def to_dict(self):
        return asdict(self)


@dataclass
class RunTrajectory:
    """Per-probe record of one estimation run; row ``t`` is probe ``t + 1``."""

    phase_index: int
    repetition_index: int
    true_phases: np.ndarray
    controls: np.ndarray
    outcomes: np.ndarray
    estimates: np.ndarray
    variance_traces: np.ndarray
    quadratic_losses: np.ndarray
    degenerate_restarts: int = 0
    failed: bool = False
    failure_reason: str = None

    @property
    def n_probes(self):
        return len(self.outcomes)


def _splitmix64(x):
    x = (x + 0x9E3779B97F4A7C15) & _MASK
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & _MASK
    return x ^ (x >> 31)


def derive_run_seed(master_seed, phase_index, repetition_index):
    """64-bit seed of run (phase_index, repetition_index), via chained splitmix64."""
    h = _splitmix64(int(master_seed) & _MASK)
    h = _splitmix64(h ^ (int(phase_index) & _MASK))
    return _splitmix64(h ^ (int(repetition_index) & _MASK))


def phase_stream_seed(master_seed):
    return _splitmix64(_splitmix64(int(master_seed) & _MASK) ^ _PHASE_STREAM_TAG)


def draw_true_phases(cfg):
    """The M true phase vectors of a sweep, shape (M, p)."""
    rng = np.random.default_rng(phase_stream_seed(cfg.master_seed))
    return rng.uniform(0.0, TWO_PI, size=(cfg.M, cfg.p))


def run_estimation(cfg, true_phases, run_seed, phase_index=0, repetition_index=0):
    """Drive ``cfg.N`` probes: control, measure, update, resample, summarise."""
    model = cfg.model
    p = model.parameter_count
    truth = check_angles(true_phases, p, "true_phases")
    rng = np.random.default_rng(run_seed)

    def prior():
        return init_uniform_prior(cfg.n, p, rng, cfg.liu_west_a, cfg.ess_threshold)

    controls = np.full((cfg.N, p), np.nan)
    outcomes = np.full(cfg.N, -1, dtype=np.int64)
    estimates = np.full((cfg.N, p), np.nan)
    variances = np.full(cfg.N, np.nan)
    losses = np.full(cfg.N, np.nan)
    traj = RunTrajectory(
        phase_index, repetition_index, truth, controls, outcomes, estimates, variances, losses
    )

    cloud = prior()
    for t in range(cfg.N):
        theta = next_control(cloud, model, cfg.strategy, rng, cfg.estimator)
        m = sample_outcome(model, truth, theta, rng)
        try:
            cloud = bayes_update(cloud, model, m, theta)
        except DegenerateUpdateError:
            traj.degenerate_restarts += 1
            logger.warning(
                "degenerate update in run (%d, %d) at probe %d; restarting from prior",
                phase_index, repetition_index, t + 1,
            )
            if traj.degenerate_restarts > MAX_RESTARTS:
                traj.failed = True
                traj.failure_reason = f"more than {MAX_RESTARTS} degenerate updates"
                return traj
            cloud = prior()
        if cfg.resampling_enabled and cloud.needs_resampling():
            cloud = liu_west_resample(cloud, rng)
        summary = summarize(cloud, cfg.estimator)
        controls[t] = theta
        outcomes[t] = m
        estimates[t] = summary.estimate
        variances[t] = summary.variance_trace
        losses[t] = quadratic_loss(summary.estimate, truth)
    return traj


def _run_task(task):
    cfg, phases, i, j = task
    return run_estimation(cfg, phases, derive_run_seed(cfg.master_seed, i, j), i, j)


def run_benchmark(cfg, threads=1):
    """All M * r runs of a sweep in canonical (phase, repetition) order.

    ``threads`` sets the worker-process count and never changes results.
    """
    phases = draw_true_phases(cfg)
    tasks = [(cfg, phases[i], i, j) for i in range(cfg.M) for j in range(cfg.r)]
    if threads > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            chunk = max(1, len(tasks) // (4 * threads))
            runs = list(pool.map(_run_task, tasks, chunksize=chunk))
    else:
        runs = [_run_task(task) for task in tasks]
    for run in runs:
        if run.failed:
            logger.warning(
                "run (%d, %d) failed: %s", run.phase_index, run.repetition_index, run.failure_reason
            )
    return runs


@dataclass
class BenchmarkResult:
    """A finished sweep together with the bound values used to rescale it."""

    config: ExperimentConfig
    trajectories: list
    true_phases: np.ndarray
    crb_trace: float
    k_factor: float

    @property
    def successful(self):
        return [t for t in self.trajectories if not t.failed]

    @property
    def failures(self):
        return [t for t in self.trajectories if t.failed]


def benchmark(cfg, threads=1):
    """Run a sweep and attach its CRB trace and median factor."""
    runs = run_benchmark(cfg, threads)
    return BenchmarkResult(
        config=cfg,
        trajectories=runs,
        true_phases=draw_true_phases(cfg),
        crb_trace=crb_trace(cfg.model, cfg.crb_grid_density),
        k_factor=chi2_median_factor(cfg.p),
    )
