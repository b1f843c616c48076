import numpy as np
import pytest

from bayesbench import runner
from bayesbench.controls import StrategyConfig
from bayesbench.exceptions import ConfigurationError, DegenerateUpdateError
from bayesbench.runner import (
    ExperimentConfig,
    benchmark,
    derive_run_seed,
    draw_true_phases,
    run_benchmark,
    run_estimation,
)


def small(model="single_qubit", **kw):
    base = dict(model_id=model, n=200, N=30, M=2, r=3, master_seed=7)
    base.update(kw)
    return ExperimentConfig(**base)


@pytest.mark.parametrize(
    "kw", [dict(n=1), dict(N=0), dict(M=0), dict(r=0), dict(model_id="qutrit"),
           dict(estimator="mode"), dict(liu_west_a=1.0), dict(ess_threshold=0.0),
           dict(master_seed=-1), dict(master_seed=2**64)]
)
def test_config_rejects_invalid(kw):
    with pytest.raises(ConfigurationError):
        small(**kw)


def test_run_seed_determinism_and_spread():
    assert derive_run_seed(3, 1, 2) == derive_run_seed(3, 1, 2)
    assert derive_run_seed(0, 0, 0) != derive_run_seed(0, 0, 1)
    assert derive_run_seed(0, 1, 0) != derive_run_seed(0, 0, 1)
    seeds = {derive_run_seed(42, i, j) for i in range(100) for j in range(100)}
    assert len(seeds) == 10_000
    assert all(0 <= s < 2**64 for s in seeds)


def test_run_estimation_deterministic():
    cfg = small("fourier_p2", N=20, strategy=StrategyConfig("adaptive", candidate_count=5))
    phases = draw_true_phases(cfg)[0]
    a = run_estimation(cfg, phases, 99)
    b = run_estimation(cfg, phases, 99)
    for field in ("controls", "outcomes", "estimates", "variance_traces", "quadratic_losses"):
        assert getattr(a, field).tobytes() == getattr(b, field).tobytes()


def test_trajectory_records_every_probe():
    cfg = small("fourier_p2", N=25)
    traj = run_estimation(cfg, [1.0, 2.0], 5)
    assert traj.n_probes == 25
    assert np.all((traj.outcomes >= 0) & (traj.outcomes < cfg.model.outcome_count))
    assert np.all(traj.quadratic_losses >= 0)
    assert np.all(traj.variance_traces >= -1e-12)
    assert np.all(np.isfinite(traj.estimates))
    assert not traj.failed


def test_benchmark_cardinality_and_order():
    runs = run_benchmark(small())
    assert [(t.phase_index, t.repetition_index) for t in runs] == [
        (i, j) for i in range(2) for j in range(3)
    ]
    phases = draw_true_phases(small())
    for t in runs:
        np.testing.assert_array_equal(t.true_phases, phases[t.phase_index])


def test_true_phases_depend_on_seed_only():
    a = draw_true_phases(small(n=50, N=5))
    b = draw_true_phases(small(n=500, N=50, strategy=StrategyConfig("adaptive")))
    np.testing.assert_array_equal(a, b)
    assert a.shape == (2, 1)
    assert not np.array_equal(a, draw_true_phases(small(master_seed=8)))


def test_serial_equals_parallel():
    cfg = small(N=15)
    serial = run_benchmark(cfg, threads=1)
    parallel = run_benchmark(cfg, threads=3)
    for a, b in zip(serial, parallel, strict=True):
        assert a.quadratic_losses.tobytes() == b.quadratic_losses.tobytes()
        assert a.controls.tobytes() == b.controls.tobytes()


def test_benchmark_attaches_bounds():
    res = benchmark(small(N=5, M=1, r=1))
    assert res.crb_trace == pytest.approx(1.0, abs=1e-3)
    assert res.k_factor == pytest.approx(0.4549, abs=1e-3)
    assert len(res.successful) == 1 and not res.failures


def test_one_outcome_sample_per_probe(monkeypatch):
    calls = []
    original = runner.sample_outcome

    def counting(*args, **kw):
        calls.append(1)
        return original(*args, **kw)

    monkeypatch.setattr(runner, "sample_outcome", counting)
    run_estimation(small(N=40), [0.3], 1)
    assert len(calls) == 40


def test_degenerate_updates_restart_then_fail(monkeypatch):
    def always_degenerate(*args, **kw):
        raise DegenerateUpdateError("underflow")

    monkeypatch.setattr(runner, "bayes_update", always_degenerate)
    traj = run_estimation(small(N=50), [0.3], 1)
    assert traj.failed
    assert traj.degenerate_restarts == runner.MAX_RESTARTS + 1
    assert "degenerate" in traj.failure_reason


def test_plateau_without_resampling():
    # 32 fixed particles cannot resolve below their spacing; the bound keeps falling
    cfg = small(n=32, N=400, M=4, r=3, resampling_enabled=False)
    runs = run_benchmark(cfg)
    loss = np.median([t.quadratic_losses for t in runs], axis=0)
    early, late = np.median(loss[190:210]), np.median(loss[390:400])
    assert late > 0.5 * early
    # N * loss grows once the loss stops following 1/N
    assert 400 * late > 2 * 100 * np.median(loss[95:105])
