"""Experiment orchestration: single runs, grids, summaries and figure artifacts."""

import csv
import os
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from . import svg
from .config import generator_from, rotation
from .diagnostics import (
    Status,
    passes_drop_filter,
    toy_da_evaluate,
    toy_da_summary_row,
    write_toy_da_csv,
    write_trace_csv,
)
from .matchers import apply, write_params_csv
from .optimizers import identity_matcher, run_alignment, saddle_trace, saddle_trajectory
from .pointset import PointSet, Tag, generate, make_labeled_union, write_points_csv

SUMMARY_HEADER = ["run_id", "objective", "lr_theta", "lr_disc", "lr_alpha", "lambda", "lambda1", "lambda2",
                  "status", "final_cov_gap", "cov_gap_ratio", "final_acc"]
RANKING_HEADER = ["rank", "objective", "runs", "successes", "success_fraction"]
SUCCESS_COV_RATIO = 10.0


def _num(v):
    return repr(float(v))


def _safe_join(root, *parts):
    path = os.path.realpath(os.path.join(root, *parts))
    base = os.path.realpath(root)
    if os.path.commonpath([path, base]) != base:
        raise OSError(f"refusing to write outside the output directory: {path}")
    return path


def synthetic_data(cfg):
    raw, lines = cfg.raw, cfg.lines
    a = generate(generator_from(raw["data"]["a"], ("data", "a"), lines, Tag.SOURCE_A))
    b = generate(generator_from(raw["data"]["b"], ("data", "b"), lines, Tag.TARGET_B))
    return a, b


def toy_da_data(cfg):
    """Labeled source, unlabeled target points and the held-out target labels."""
    td = cfg.raw["toy_da"]
    spec = generator_from(td["source"], ("toy_da", "source"), cfg.lines, Tag.SOURCE_A)
    source = generate(spec)
    raw_target = generate(type(spec)(spec.kind, spec.count, int(td["target_seed"]), Tag.TARGET_B))
    moved = raw_target.points @ rotation(float(td["rotation_deg"])).T + np.asarray(td["shift"], dtype=float)
    return source, PointSet(moved, Tag.TARGET_B), np.array(raw_target.labels)


def planned_runs(cfg):
    """Ordered ``(run_id, objective, cell)`` triples; the order fixes summary row order."""
    runs = []
    for obj in cfg.objectives:
        for cell in cfg.grid_cells(obj):
            runs.append((f"{len(runs):03d}_{obj}", obj, cell))
    return runs


def _line_svgs(trace, title):
    it = trace.iterations
    return {
        "objective.svg": svg.line_plot({"objective": (it, trace.objective)}, f"{title}: objective"),
        "disc_acc.svg": svg.line_plot({"accuracy": (it, trace.disc_accuracy)}, f"{title}: discriminator accuracy"),
        "cov_gap.svg": svg.line_plot({"cov gap": (it, trace.cov_gap)}, f"{title}: covariance gap", logy=True),
    }


def _write_text(path, text):
    with open(path, "w") as fh:
        fh.write(text)


def _summary_row(run_id, obj, opt, pen, trace, final_acc):
    lam1 = getattr(pen, "lam1", "exact")
    lam2 = getattr(pen, "lam2", "exact")
    return {
        "run_id": run_id, "objective": obj,
        "lr_theta": _num(opt.lr_theta), "lr_disc": _num(opt.lr_disc), "lr_alpha": _num(opt.lr_alpha),
        "lambda": _num(opt.lam),
        "lambda1": lam1 if isinstance(lam1, str) else _num(lam1),
        "lambda2": lam2 if isinstance(lam2, str) else _num(lam2),
        "status": trace.status.value,
        "final_cov_gap": _num(trace.cov_gap[-1]) if trace.cov_gap else "nan",
        "cov_gap_ratio": _num(trace.cov_gap_ratio),
        "final_acc": _num(final_acc),
    }


def execute_run(cfg, run_id, obj, cell, out_dir):
    """Run one grid cell, write its artifacts, and return its summary row plus extras."""
    run_dir = _safe_join(out_dir, "runs", run_id)
    os.makedirs(run_dir, exist_ok=True)
    opt = cfg.optimizer_for(obj, cell)
    pen = cfg.penalties_for(obj, cell)
    extra = {}
    if cfg.experiment == "toy_da":
        source, target, labels = toy_da_data(cfg)
        a_unlabeled = PointSet(source.points)
        kernel = cfg.kernel_for(obj, a_unlabeled, target)
        matcher = identity_matcher(cfg.raw["matcher"], target)
        result = toy_da_evaluate(source, target, labels, matcher, objective=obj, config=opt,
                                 kernel=kernel, penalties=pen)
        trace = result.trace
        write_toy_da_csv(_safe_join(run_dir, "toy_da.csv"), result)
        extra = toy_da_summary_row(result)
        final_acc = result.final_accuracy
        a, b = a_unlabeled, target
    else:
        a, b = synthetic_data(cfg)
        kernel = cfg.kernel_for(obj, a, b)
        matcher = identity_matcher(cfg.raw["matcher"], b)
        trace = run_alignment(obj, a, b, matcher, opt, kernel=kernel, penalties=pen)
        final_acc = trace.disc_accuracy[-1] if trace.disc_accuracy else float("nan")
    write_trace_csv(_safe_join(run_dir, "trace.csv"), trace)
    for name, text in _line_svgs(trace, f"{run_id}").items():
        _write_text(_safe_join(run_dir, name), text)
    for it, pts in sorted(trace.snapshots.items()):
        label = "final" if it < 0 else f"{it:06d}"
        _write_text(_safe_join(run_dir, f"snapshot_{label}.svg"), svg.scatter_plot(
            {"A": (a.points, "circle"), "B": (b.points, "square"), "M(B)": (pts, "cross")},
            f"{run_id} iteration {it if it >= 0 else 'final'}"))
    params = trace.info.get("final_params")
    if params is not None:
        write_params_csv(_safe_join(run_dir, "params.csv"), params)
        if np.all(np.isfinite(params.flat())):
            write_points_csv(_safe_join(run_dir, "final_points.csv"), apply(params, b))
    row = _summary_row(run_id, obj, opt, pen, trace, final_acc)
    filters = {thr: passes_drop_filter(trace, thr) if len(trace) > 1 else False
               for thr in cfg.raw["diagnostics"]["drop_filter"]}
    return row, extra, filters


def _execute_star(args):
    return execute_run(*args)


def _run_all(cfg, out_dir, jobs):
    os.makedirs(out_dir, exist_ok=True)
    plan = planned_runs(cfg)
    tasks = [(cfg, rid, obj, cell, out_dir) for rid, obj, cell in plan]
    if jobs and jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_execute_star, tasks))
    else:
        results = [_execute_star(t) for t in tasks]
    return results


def _write_summary(out_dir, results, experiment):
    with open(_safe_join(out_dir, "summary.csv"), "w", newline="") as fh:
        w = csv.DictWriter(fh, SUMMARY_HEADER, lineterminator="\n")
        w.writeheader()
        for row, _, _ in results:
            w.writerow(row)
    if experiment == "toy_da":
        with open(_safe_join(out_dir, "toy_da_summary.csv"), "w", newline="") as fh:
            cols = ["run_id", "objective", "source_acc", "target_acc_before", "target_acc_final", "improved"]
            w = csv.DictWriter(fh, cols, lineterminator="\n")
            w.writeheader()
            for row, extra, _ in results:
                w.writerow({"run_id": row["run_id"], "objective": row["objective"], **extra})


def run_succeeded(row, extra, experiment):
    if experiment == "toy_da":
        return bool(extra.get("improved"))
    return row["status"] == Status.CONVERGED.value and float(row["cov_gap_ratio"]) >= SUCCESS_COV_RATIO


def run_experiment(cfg, out_dir=None, jobs=1):
    """Execute the configured run or grid; returns the summary rows."""
    out_dir = out_dir or cfg.output_dir
    if cfg.experiment == "saddle":
        return run_saddle(cfg, out_dir)
    results = _run_all(cfg, out_dir, jobs)
    _write_summary(out_dir, results, cfg.experiment)
    return [r for r, _, _ in results]


def compare_grid(cfg, out_dir=None, jobs=1):
    """Run every (grid cell, objective) pair and rank objectives by success fraction."""
    out_dir = out_dir or cfg.output_dir
    results = _run_all(cfg, out_dir, jobs)
    _write_summary(out_dir, results, cfg.experiment)
    thresholds = cfg.raw["diagnostics"]["drop_filter"]
    stats = {}
    for row, extra, filters in results:
        s = stats.setdefault(row["objective"], {"runs": 0, "ok": 0, "filtered": {t: [0, 0] for t in thresholds}})
        ok = run_succeeded(row, extra, cfg.experiment)
        s["runs"] += 1
        s["ok"] += ok
        for t in thresholds:
            if filters[t]:
                s["filtered"][t][0] += 1
                s["filtered"][t][1] += ok
    order = sorted(stats, key=lambda o: (-stats[o]["ok"] / stats[o]["runs"], cfg.objectives.index(o)))
    header = RANKING_HEADER + [f"filtered_fraction_{t}" for t in thresholds]
    ranking = []
    with open(_safe_join(out_dir, "ranking.csv"), "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for rank, obj in enumerate(order, 1):
            s = stats[obj]
            frac = s["ok"] / s["runs"]
            filt = [_num(ok / n) if n else "nan" for n, ok in (s["filtered"][t] for t in thresholds)]
            w.writerow([rank, obj, s["runs"], s["ok"], _num(frac)] + filt)
            ranking.append({"objective": obj, "runs": s["runs"], "successes": s["ok"], "success_fraction": frac})
    return [r for r, _, _ in results], ranking


def run_saddle(cfg, out_dir=None):
    out_dir = out_dir or cfg.output_dir
    os.makedirs(out_dir, exist_ok=True)
    p = cfg.raw["saddle"]
    traj = saddle_trajectory(float(p["x0"]), float(p["y0"]), float(p["step"]), int(p["steps"]))
    with open(_safe_join(out_dir, "saddle_trace.csv"), "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["iter", "x", "y", "r2"])
        for t, (x, y) in enumerate(traj):
            w.writerow([t, _num(x), _num(y), _num(x * x + y * y)])
    trace = saddle_trace(float(p["x0"]), float(p["y0"]), float(p["step"]), int(p["steps"]))
    write_trace_csv(_safe_join(out_dir, "trace.csv"), trace)
    _write_text(_safe_join(out_dir, "saddle.svg"),
                svg.path_plot(traj, f"gradient steps on min_x max_y xy, step {p['step']}"))
    return [{"steps": len(traj) - 1, "final_r2": float(traj[-1] @ traj[-1])}]


def generate_data(cfg, out_dir=None):
    """Write the configured point sets (and their labeled union) as CSV."""
    out_dir = out_dir or cfg.output_dir
    os.makedirs(out_dir, exist_ok=True)
    written = []
    if cfg.experiment == "toy_da":
        source, target, labels = toy_da_data(cfg)
        write_points_csv(_safe_join(out_dir, "source.csv"), source, source.labels, "class")
        write_points_csv(_safe_join(out_dir, "target.csv"), target)
        write_points_csv(_safe_join(out_dir, "target_labels_heldout.csv"), target, labels, "class")
        written = ["source.csv", "target.csv", "target_labels_heldout.csv"]
        a, b = PointSet(source.points), target
    else:
        a, b = synthetic_data(cfg)
        write_points_csv(_safe_join(out_dir, "a.csv"), a)
        write_points_csv(_safe_join(out_dir, "b.csv"), b)
        written = ["a.csv", "b.csv"]
    write_points_csv(_safe_join(out_dir, "union.csv"), make_labeled_union(a, b))
    return written + ["union.csv"]
