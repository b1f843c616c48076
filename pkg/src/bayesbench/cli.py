"""Command-line interface: ``bayesbench {simulate,benchmark,fit,report}``."""

import argparse
import csv
import logging
import sys
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__
from .bounds import chi2_median_factor, crb_trace
from .exceptions import BayesBenchError, ConfigurationError, NoDataError
from .heuristic import DEFAULT_WINDOW, FitPoint, build_fit_dataset, eval_f, fit_heuristic
from .io import (
    MANIFEST_FILE,
    RUNS_FILE,
    config_from_mapping,
    config_to_mapping,
    file_sha256,
    read_config,
    read_json,
    read_runs_file,
    write_json,
    write_runs_file,
    write_table,
)
from .losses import AGGREGATION_MODES, aggregate, convergence_table, kernel_density, mean_median_crossing
from .runner import BenchmarkResult, derive_run_seed, draw_true_phases, run_benchmark, run_estimation

logger = logging.getLogger("bayesbench")

BOUND_CONVENTION = (
    "crb_trace is the smallest single-probe trace of the inverse classical Fisher "
    "matrix over a grid of control settings; the N-probe bound is crb_trace / N"
)
KDE_PROBE = 300
KDE_PHASES = 10


def _now():
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


def prepare_out_dir(path, force):
    """Create ``path``; refuse a non-empty directory unless ``force``."""
    path = Path(path)
    if path.exists() and any(path.iterdir()) and not force:
        raise ConfigurationError(f"output directory {path} is not empty; pass --force to overwrite")
    path.mkdir(parents=True, exist_ok=True)
    return path


def _bounds(cfg):
    return {
        "crb_trace": crb_trace(cfg.model, cfg.crb_grid_density),
        "k_factor": chi2_median_factor(cfg.p),
        "crb_grid_density": cfg.crb_grid_density,
        "convention": BOUND_CONVENTION,
    }


def _manifest(kind, cfg, runs, digest, phases, started):
    failed = [t for t in runs if t.failed]
    return {
        "tool": "bayesbench",
        "version": __version__,
        "command": kind,
        "config": config_to_mapping(cfg),
        "master_seed": cfg.master_seed,
        "started_at": started,
        "finished_at": _now(),
        "runs_file": RUNS_FILE,
        "runs_sha256": digest,
        "bounds": _bounds(cfg),
        "true_phases": np.asarray(phases).tolist(),
        "runs": {
            "total": len(runs),
            "successful": len(runs) - len(failed),
            "failed": [
                {
                    "phase_index": t.phase_index,
                    "repetition_index": t.repetition_index,
                    "reason": t.failure_reason,
                }
                for t in failed
            ],
        },
        "degenerate_restarts": int(sum(t.degenerate_restarts for t in runs)),
    }


def cmd_simulate(args):
    cfg, phases = read_config(args.config)
    out = prepare_out_dir(args.out, args.force)
    started = _now()
    if phases is None:
        phases = draw_true_phases(cfg)[0]
    traj = run_estimation(cfg, phases, derive_run_seed(cfg.master_seed, 0, 0))
    runs = [traj]
    digest = write_runs_file([t for t in runs if not t.failed], out / RUNS_FILE, cfg.p)
    write_json(_manifest("simulate", cfg, runs, digest, [phases], started), out / MANIFEST_FILE)
    print(f"wrote {out / RUNS_FILE} ({cfg.N} probes)")
    return 0


def cmd_benchmark(args):
    cfg, _ = read_config(args.config)
    out = prepare_out_dir(args.out, args.force)
    started = _now()
    runs = run_benchmark(cfg, threads=args.threads)
    digest = write_runs_file([t for t in runs if not t.failed], out / RUNS_FILE, cfg.p)
    manifest = _manifest("benchmark", cfg, runs, digest, draw_true_phases(cfg), started)
    write_json(manifest, out / MANIFEST_FILE)
    print(
        f"wrote {out / RUNS_FILE}: {manifest['runs']['successful']}/{len(runs)} runs, "
        f"sha256 {digest[:12]}"
    )
    return 0


def load_results(results_dir):
    """Read a benchmark directory back into a :class:`BenchmarkResult`."""
    results_dir = Path(results_dir)
    manifest_path = results_dir / MANIFEST_FILE
    runs_path = results_dir / RUNS_FILE
    if not manifest_path.is_file() or not runs_path.is_file():
        raise NoDataError(f"no benchmark data in {results_dir} (expected {RUNS_FILE} and {MANIFEST_FILE})")
    manifest = read_json(manifest_path)
    if file_sha256(runs_path) != manifest["runs_sha256"]:
        raise BayesBenchError(f"{runs_path} does not match the hash recorded in its manifest")
    cfg, _ = config_from_mapping(manifest["config"])
    phases = np.array(manifest["true_phases"], dtype=float)
    runs = read_runs_file(runs_path, phases)
    if not runs:
        raise NoDataError(f"{runs_path} holds no successful runs")
    bounds = manifest["bounds"]
    return BenchmarkResult(cfg, runs, phases, bounds["crb_trace"], bounds["k_factor"]), manifest


def _kde_phases(phases, count):
    """Up to ``count`` phase indices spread evenly over the sorted first phase."""
    order = np.argsort(phases[:, 0], kind="stable")
    if len(order) <= count:
        return sorted(order.tolist())
    picks = np.linspace(0, len(order) - 1, count).round().astype(int)
    return sorted(order[picks].tolist())


def cmd_report(args):
    result, manifest = load_results(args.results_dir)
    out = prepare_out_dir(args.out or Path(args.results_dir) / "report", args.force)
    runs = result.successful
    crb, k = result.crb_trace, result.k_factor

    curves = {mode: aggregate(runs, mode) for mode in AGGREGATION_MODES}
    (out / "curves").mkdir(exist_ok=True)
    for mode, curve in curves.items():
        write_table(
            {
                "N": curve.probe_index,
                "loss": curve.loss,
                "variance": curve.variance,
                "runs": curve.run_count,
                "loss_over_crb": curve.rescaled_loss(crb),
                "loss_over_k_crb": curve.rescaled_loss(crb, k),
                "variance_over_crb": curve.rescaled_variance(crb),
            },
            out / "curves" / f"{mode}.csv",
        )
    write_table(convergence_table(runs, crb, k), out / "convergence.csv")

    n_max = runs[0].n_probes
    kde_probe = min(args.kde_probe, n_max)
    (out / "kde").mkdir(exist_ok=True)
    index = {"phase_index": [], "true_phase_1": [], "quantity": [], "bandwidth": [], "degenerate": [], "file": []}
    for i in _kde_phases(result.true_phases, KDE_PHASES):
        reps = [t for t in runs if t.phase_index == i]
        if len(reps) < 2:
            continue
        for quantity, attr in (("loss", "quadratic_losses"), ("variance", "variance_traces")):
            kde = kernel_density([getattr(t, attr)[kde_probe - 1] for t in reps])
            name = f"phase_{i:03d}_{quantity}.csv"
            write_table({"x": kde.grid, "density": kde.density}, out / "kde" / name)
            index["phase_index"].append(i)
            index["true_phase_1"].append(float(result.true_phases[i, 0]))
            index["quantity"].append(quantity)
            index["bandwidth"].append(kde.bandwidth)
            index["degenerate"].append(kde.degenerate)
            index["file"].append(name)
    write_table(index, out / "kde" / "index.csv")

    crossings = {}
    for quantity in ("loss", "variance"):
        crossings[quantity] = {
            "median_per_phase_mean_vs_median": mean_median_crossing(
                curves["median-per-phase-then-mean"], curves["median-per-phase-then-median"],
                args.threshold, quantity,
            ),
            "all_runs_mean_vs_median": mean_median_crossing(
                curves["mean-all"], curves["median-all"], args.threshold, quantity
            ),
        }
    last = n_max - 1
    write_json(
        {
            "runs_sha256": manifest["runs_sha256"],
            "model": result.config.model_id,
            "runs": len(runs),
            "probes": n_max,
            "crb_trace": crb,
            "k_factor": k,
            "bound_convention": BOUND_CONVENTION,
            "kde_probe": kde_probe,
            "crossing_threshold": args.threshold,
            "crossing": crossings,
            "final": {
                "mean_loss": float(curves["mean-all"].loss[last]),
                "median_loss": float(curves["median-all"].loss[last]),
                "mean_loss_over_crb": float(curves["mean-all"].rescaled_loss(crb)[last]),
                "median_loss_over_k_crb": float(curves["median-all"].rescaled_loss(crb, k)[last]),
            },
        },
        out / "report.json",
    )
    print(f"wrote report to {out}")
    return 0


def read_fit_dataset(path):
    with Path(path).open(newline="") as fh:
        rows = list(csv.DictReader(fh))
    return [
        FitPoint(int(r["n"]), int(r["p"]), float(r["y"]), float(r.get("weight") or 1.0)) for r in rows
    ]


def parse_window(text):
    try:
        lo, hi = (int(v) for v in text.split(":"))
    except ValueError:
        raise argparse.ArgumentTypeError(f"window must look like LO:HI, got {text!r}") from None
    if lo > hi or lo < 1:
        raise argparse.ArgumentTypeError(f"invalid window {text!r}")
    return lo, hi


def cmd_fit(args):
    if args.dataset:
        points = read_fit_dataset(args.dataset)
    elif args.results:
        points = build_fit_dataset([load_results(d)[0] for d in args.results], args.window)
    else:
        raise NoDataError("fit needs benchmark result directories or --dataset")
    out = prepare_out_dir(args.out, args.force)
    report = fit_heuristic(points, starts=args.starts, random_state=args.seed)
    write_table(
        {
            "n": [pt.n for pt in points],
            "p": [pt.p for pt in points],
            "y": [pt.y for pt in points],
            "weight": [pt.weight for pt in points],
            "prediction": [eval_f(report.params, pt.n, pt.p) for pt in points],
        },
        out / "fit_dataset.csv",
    )
    write_json({**report.to_dict(), "window": list(args.window), "seed": args.seed}, out / "fit_report.json")
    print(f"fit log-RMS {report.log_rms:.3g} (best of {report.starts} starts)")
    return 0


def build_parser():
    parser = argparse.ArgumentParser(prog="bayesbench", description=__doc__)
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="run a single estimation and write its trajectory")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--force", action="store_true")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("benchmark", help="run an M x r sweep and write runs.csv + manifest.json")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--force", action="store_true")
    p.add_argument("--threads", type=int, default=1, help="worker processes; never changes output")
    p.set_defaults(func=cmd_benchmark)

    p = sub.add_parser("fit", help="fit the particle-count scaling law")
    p.add_argument("results", nargs="*", help="benchmark result directories")
    p.add_argument("--dataset", help="CSV with columns n,p,y[,weight] instead of result directories")
    p.add_argument("--out", required=True)
    p.add_argument("--force", action="store_true")
    p.add_argument("--window", type=parse_window, default=DEFAULT_WINDOW, help="probe window LO:HI")
    p.add_argument("--starts", type=int, default=32)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("report", help="aggregate curves, KDEs and crossings for a benchmark")
    p.add_argument("results_dir")
    p.add_argument("--out", help="default: RESULTS_DIR/report")
    p.add_argument("--force", action="store_true")
    p.add_argument("--kde-probe", type=int, default=KDE_PROBE)
    p.add_argument("--threshold", type=float, default=0.01)
    p.set_defaults(func=cmd_report)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except (BayesBenchError, OSError) as exc:
        print(f"bayesbench: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
