"""Configuration files, runs tables and manifests.

Configuration is a flat YAML mapping::

    model: single_qubit        # single_qubit | fourier_p2 | fourier_p3
    n: 1000                    # particles
    N: 300                     # probes per run
    M: 20                      # true phase vectors
    r: 10                      # repetitions per phase
    seed: 2024
    strategy: random           # random | adaptive
    # optional, defaults shown
    K: 30
    include_estimate_heuristic: true
    liu_west_a: 0.98
    ess_threshold: 0.5
    estimator: circular        # circular | linear
    resampling: true
    crb_grid_density: 64
    true_phases: null          # simulate only: explicit phase vector
"""

import csv
import hashlib
import json
import numbers
from pathlib import Path

import numpy as np
import yaml

from .controls import StrategyConfig
from .exceptions import ConfigurationError
from .runner import ExperimentConfig, RunTrajectory

REQUIRED_KEYS = ("model", "n", "N", "M", "r", "seed", "strategy")
OPTIONAL_KEYS = {
    "K": 30,
    "include_estimate_heuristic": True,
    "liu_west_a": 0.98,
    "ess_threshold": 0.5,
    "estimator": "circular",
    "resampling": True,
    "crb_grid_density": 64,
    "true_phases": None,
}
RUNS_FILE = "runs.csv"
MANIFEST_FILE = "manifest.json"


def _require_type(raw, key, kind):
    value = raw[key]
    if kind is int:
        ok = isinstance(value, numbers.Integral) and not isinstance(value, bool)
    elif kind is float:
        ok = isinstance(value, numbers.Real) and not isinstance(value, bool)
    else:
        ok = isinstance(value, kind)
    if not ok:
        raise ConfigurationError(f"{key} must be of type {kind.__name__}, got {value!r}", key=key)
    return value


def config_from_mapping(raw):
    """Validate a raw key-value mapping and build an :class:`ExperimentConfig`.

    Returns ``(config, true_phases)``; ``true_phases`` is ``None`` unless given.
    """
    if not isinstance(raw, dict):
        raise ConfigurationError("configuration must be a key-value mapping")
    unknown = sorted(set(raw) - set(REQUIRED_KEYS) - set(OPTIONAL_KEYS))
    if unknown:
        raise ConfigurationError(f"unknown configuration key {unknown[0]!r}", key=unknown[0])
    for key in REQUIRED_KEYS:
        if key not in raw:
            raise ConfigurationError(f"missing required configuration key {key!r}", key=key)
    values = {**OPTIONAL_KEYS, **raw}
    for key in ("n", "N", "M", "r", "seed", "K", "crb_grid_density"):
        _require_type(values, key, int)
    for key in ("liu_west_a", "ess_threshold"):
        _require_type(values, key, float)
    for key in ("include_estimate_heuristic", "resampling"):
        _require_type(values, key, bool)
    for key in ("model", "strategy", "estimator"):
        _require_type(values, key, str)
    if values["strategy"] == "adaptive" and values["K"] < 1:
        raise ConfigurationError("K must be >= 1", key="K")
    cfg = ExperimentConfig(
        model_id=values["model"],
        n=values["n"],
        N=values["N"],
        M=values["M"],
        r=values["r"],
        master_seed=values["seed"],
        strategy=StrategyConfig(
            kind=values["strategy"],
            candidate_count=values["K"],
            include_estimate_heuristic=values["include_estimate_heuristic"],
        ),
        resampling_enabled=values["resampling"],
        estimator=values["estimator"],
        liu_west_a=float(values["liu_west_a"]),
        ess_threshold=float(values["ess_threshold"]),
        crb_grid_density=values["crb_grid_density"],
    )
    phases = values["true_phases"]
    if phases is not None:
        if not isinstance(phases, list) or len(phases) != cfg.p:
            raise ConfigurationError(f"true_phases must be a list of {cfg.p} angles", key="true_phases")
        phases = np.array(phases, dtype=float)
    return cfg, phases


def read_config(path):
    """Read a YAML configuration file into ``(config, true_phases)``."""
    path = Path(path)
    try:
        raw = yaml.safe_load(path.read_text())
    except yaml.YAMLError as exc:
        raise ConfigurationError(f"{path}: not valid YAML ({exc})") from exc
    return config_from_mapping(raw)


def parse_config(path):
    """Read a YAML configuration file; see the module docstring for the schema."""
    return read_config(path)[0]


def config_to_mapping(cfg):
    """Inverse of :func:`config_from_mapping` (without ``true_phases``)."""
    return {
        "model": cfg.model_id,
        "n": cfg.n,
        "N": cfg.N,
        "M": cfg.M,
        "r": cfg.r,
        "seed": cfg.master_seed,
        "strategy": cfg.strategy.kind,
        "K": cfg.strategy.candidate_count,
        "include_estimate_heuristic": cfg.strategy.include_estimate_heuristic,
        "liu_west_a": cfg.liu_west_a,
        "ess_threshold": cfg.ess_threshold,
        "estimator": cfg.estimator,
        "resampling": cfg.resampling_enabled,
        "crb_grid_density": cfg.crb_grid_density,
    }


def fmt(x):
    """17 significant digits: enough for an exact float64 round trip."""
    return format(float(x), ".17g")


def runs_header(p):
    return (
        ["phase_index", "repetition_index", "probe_index", "outcome"]
        + [f"control_{k}" for k in range(1, p + 1)]
        + [f"estimate_{k}" for k in range(1, p + 1)]
        + ["variance_trace", "quadratic_loss"]
    )


def write_runs_file(trajectories, path, p):
    """Write runs in the order given (one row per probe); return the SHA-256 hex digest."""
    path = Path(path)
    lines = [",".join(runs_header(p))]
    for t in trajectories:
        for i in range(t.n_probes):
            row = [str(t.phase_index), str(t.repetition_index), str(i + 1), str(int(t.outcomes[i]))]
            row += [fmt(v) for v in t.controls[i]]
            row += [fmt(v) for v in t.estimates[i]]
            row += [fmt(t.variance_traces[i]), fmt(t.quadratic_losses[i])]
            lines.append(",".join(row))
    data = ("\n".join(lines) + "\n").encode("ascii")
    try:
        path.write_bytes(data)
    except OSError as exc:
        raise OSError(f"cannot write runs file {path}: {exc}") from exc
    return hashlib.sha256(data).hexdigest()


def file_sha256(path):
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def read_runs_file(path, true_phases=None):
    """Rebuild trajectories from a runs table.

    ``true_phases`` (M, p), when supplied, is attached to each trajectory.
    """
    path = Path(path)
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        rows = list(reader)
    p = sum(1 for h in header if h.startswith("control_"))
    if header != runs_header(p):
        raise ValueError(f"{path}: unexpected runs header {header}")
    groups = {}
    for row in rows:
        groups.setdefault((int(row[0]), int(row[1])), []).append(row)
    out = []
    for (i, j), grp in groups.items():
        arr = np.array([[float(v) for v in row[3:]] for row in grp])
        truth = None if true_phases is None else np.asarray(true_phases[i], dtype=float)
        out.append(
            RunTrajectory(
                phase_index=i,
                repetition_index=j,
                true_phases=truth,
                controls=arr[:, 1 : 1 + p],
                outcomes=arr[:, 0].astype(np.int64),
                estimates=arr[:, 1 + p : 1 + 2 * p],
                variance_traces=arr[:, 1 + 2 * p],
                quadratic_losses=arr[:, 2 + 2 * p],
            )
        )
    return out


def write_json(obj, path):
    Path(path).write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")


def read_json(path):
    return json.loads(Path(path).read_text())


def write_table(columns, path):
    """Write a dict of equal-length columns as CSV; floats at 17 digits."""
    names = list(columns)
    cols = [np.asarray(columns[k]) for k in names]
    lines = [",".join(names)]
    for row in zip(*cols):
        cells = []
        for v in row:
            if isinstance(v, (np.integer, int)) and not isinstance(v, bool):
                cells.append(str(int(v)))
            elif isinstance(v, (np.bool_, bool)):
                cells.append(str(bool(v)).lower())
            elif isinstance(v, (np.floating, float)):
                cells.append(fmt(v))
            else:
                cells.append(str(v))
        lines.append(",".join(cells))
    Path(path).write_bytes(("\n".join(lines) + "\n").encode("utf-8"))
