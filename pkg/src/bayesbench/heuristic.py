"""Scaling law of the rescaled median loss in particle and parameter count.

    f(n, p) = A (1 + sqrt p)^2 p n^(C p - B) + D sqrt p + E p^F / n^G
"""

from dataclasses import astuple, dataclass, field

import numpy as np
from scipy.optimize import minimize

from ._validation import check_random_state
from .exceptions import DatasetError, FitFailureError

DEFAULT_WINDOW = (400, 500)
PARAM_NAMES = ("A", "B", "C", "D", "E", "F", "G")
# A, D, E are searched on a log scale
_LOG_SCALED = np.array([True, False, False, True, True, False, False])


@dataclass(frozen=True)
class HeuristicParams:
    A: float
    B: float
    C: float
    D: float
    E: float
    F: float
    G: float

    def to_array(self):
        return np.array(astuple(self), dtype=float)

    @classmethod
    def from_array(cls, values):
        return cls(*(float(v) for v in values))

    def to_dict(self):
        return dict(zip(PARAM_NAMES, astuple(self)))


REFERENCE_PARAMS = HeuristicParams(A=160.0, B=5.4, C=0.8, D=0.002, E=0.11, F=3.5, G=1.3)


def eval_f(params, n, p):
    """Evaluate the scaling law; broadcasts over array-valued ``n`` and ``p``."""
    n = np.asarray(n, dtype=float)
    p = np.asarray(p, dtype=float)
    a, b, c, d, e, f, g = astuple(params)
    sp = np.sqrt(p)
    out = a * (1.0 + sp) ** 2 * p * n ** (c * p - b) + d * sp + e * p**f / n**g
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class FitPoint:
    n: int
    p: int
    y: float
    weight: float = 1.0

    def __post_init__(self):
        if not self.y > 0:
            raise DatasetError(f"fit target must be positive, got y={self.y} at n={self.n}, p={self.p}")
        if not self.weight > 0:
            raise DatasetError("fit weights must be positive")


def build_fit_dataset(sweeps, window=DEFAULT_WINDOW):
    """One :class:`FitPoint` per (n, p) cell of the given benchmark results.

    ``y`` is the median, over every successful run and every probe index in
    the inclusive ``window``, of ``N * loss / (k_p * crb_trace)``.  Sweeps
    sharing a cell are pooled.
    """
    lo, hi = window
    cells = {}
    for sweep in sweeps:
        runs = sweep.successful
        if not runs:
            continue
        n_max = runs[0].n_probes
        idx = np.arange(max(lo, 1), min(hi, n_max) + 1)
        if idx.size == 0:
            raise DatasetError(f"window {lo}:{hi} does not intersect probes 1..{n_max}")
        losses = np.vstack([t.quadratic_losses[idx - 1] for t in runs])
        scaled = idx[None, :] * losses / (sweep.k_factor * sweep.crb_trace)
        key = (sweep.config.n, sweep.config.p)
        cells.setdefault(key, []).append(scaled.ravel())
    if not cells:
        raise DatasetError("no successful runs to build a fit dataset from")
    return [
        FitPoint(n=n, p=p, y=float(np.median(np.concatenate(vals))))
        for (n, p), vals in sorted(cells.items())
    ]


@dataclass
class FitReport:
    params: HeuristicParams
    log_rms: float
    residuals: np.ndarray
    objective: float
    best_start: int
    starts: int
    finite_starts: int
    start_objectives: list = field(default_factory=list)

    def to_dict(self):
        return {
            "params": self.params.to_dict(),
            "log_rms": self.log_rms,
            "residuals": [float(r) for r in self.residuals],
            "objective": self.objective,
            "best_start": self.best_start,
            "starts": self.starts,
            "finite_starts": self.finite_starts,
        }


def _to_search(values):
    x = np.array(values, dtype=float)
    x[_LOG_SCALED] = np.log(x[_LOG_SCALED])
    return x


def _from_search(x):
    values = np.array(x, dtype=float)
    with np.errstate(over="ignore"):
        values[_LOG_SCALED] = np.exp(values[_LOG_SCALED])
    return values


def start_points(starts, random_state=0, centre=REFERENCE_PARAMS):
    """Restart locations: the centre, then log-uniform draws within x10 of it.

    The sequence for ``k`` starts is a prefix of the one for ``k + 1``.
    """
    rng = check_random_state(random_state)
    base = centre.to_array()
    pts = [base]
    for _ in range(starts - 1):
        pts.append(base * 10.0 ** rng.uniform(-1.0, 1.0, size=base.size))
    return pts


def _check_points(points):
    if len(points) < 10:
        raise DatasetError(f"need at least 10 fit points, got {len(points)}")
    if len({pt.p for pt in points}) < 2 or len({pt.n for pt in points}) < 3:
        raise DatasetError("fit points must span >= 2 values of p and >= 3 values of n")


def fit_heuristic(points, starts=32, random_state=0, polish_rounds=2):
    """Multi-start Nelder-Mead fit of the scaling law in log space.

    Minimises ``sum w (log f - log y)^2``.  Each start is re-launched from its
    own optimum ``polish_rounds`` times to rebuild a collapsed simplex.
    """
    _check_points(points)
    n = np.array([pt.n for pt in points], dtype=float)
    p = np.array([pt.p for pt in points], dtype=float)
    log_y = np.log([pt.y for pt in points])
    w = np.array([pt.weight for pt in points], dtype=float)

    sp = np.sqrt(p)
    lead = (1.0 + sp) ** 2 * p
    log_n, log_p = np.log(n), np.log(p)

    def residuals(values):
        a, b, c, d, e, f, g = values
        with np.errstate(all="ignore"):
            pred = a * lead * np.exp((c * p - b) * log_n) + d * sp + e * np.exp(f * log_p - g * log_n)
            return np.log(pred) - log_y

    def objective(x):
        r = residuals(_from_search(x))
        val = float(np.sum(w * r * r))
        return val if np.isfinite(val) else np.inf

    best = None
    objectives = []
    for i, start in enumerate(start_points(starts, random_state)):
        x = _to_search(start)
        val = objective(x)
        if np.isfinite(val):
            for _ in range(polish_rounds + 1):
                res = minimize(
                    objective,
                    x,
                    method="Nelder-Mead",
                    options={"maxiter": 8000, "maxfev": 8000, "xatol": 1e-12, "fatol": 1e-20, "adaptive": True},
                )
                if res.fun < val:
                    x, val = res.x, float(res.fun)
        objectives.append(val)
        if np.isfinite(val) and (best is None or val < best[1]):
            best = (i, val, x)
    if best is None:
        raise FitFailureError("objective was non-finite at every start")
    i, val, x = best
    values = _from_search(x)
    r = residuals(values)
    return FitReport(
        params=HeuristicParams.from_array(values),
        log_rms=float(np.sqrt(np.mean(r * r))),
        residuals=r,
        objective=val,
        best_start=i,
        starts=starts,
        finite_starts=int(np.sum(np.isfinite(objectives))),
        start_objectives=objectives,
    )
