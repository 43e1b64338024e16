"""Batch runs, CSV trajectory files, aggregate summaries, and SVG charts.

One CSV per seed (schema ``n,s,a1,a2,c_1..c_K,x_1..x_K,dist,eps``), one
aggregate JSON per batch, and a static log-log convergence chart emitted
as plain XML.
"""
from __future__ import annotations

import csv
import json
import math
from pathlib import Path

import numpy as np

from .adversaries import build_adversary
from .config import RunConfig
from .controller import SteeringController
from .game import load_model
from .learner import TwoTimescaleLearner
from .simulate import TrajectoryRecord, metrics, run_episode

PLOT_FLOOR = 1e-6


class BatchError(RuntimeError):
    def __init__(self, message: str, failures: dict[int, str]):
        super().__init__(message)
        self.failures = failures


def _fmt(v: float) -> str:
    return format(float(v), ".17g")


def trajectory_csv_path(output_dir: Path, seed: int) -> Path:
    return Path(output_dir) / f"run_seed{seed}.csv"


def write_trajectory_csv(traj: TrajectoryRecord, path: str | Path) -> None:
    K = traj.costs.shape[1]
    header = (
        ["n", "s", "a1", "a2"]
        + [f"c_{k + 1}" for k in range(K)]
        + [f"x_{k + 1}" for k in range(K)]
        + ["dist", "eps"]
    )
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for i in range(len(traj)):
            row = [int(traj.n[i]), int(traj.state[i]), int(traj.a1[i]), int(traj.a2[i])]
            row += [_fmt(v) for v in traj.costs[i]]
            row += [_fmt(v) for v in traj.x[i]]
            row += [_fmt(traj.dist[i]), _fmt(traj.eps[i])]
            writer.writerow(row)


def read_trajectory_csv(path: str | Path) -> TrajectoryRecord:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        K = sum(1 for name in header if name.startswith("c_"))
        rows = [row for row in reader]
    arr = np.array(rows, dtype=float)
    return TrajectoryRecord(
        n=arr[:, 0].astype(np.int64),
        state=arr[:, 1].astype(np.int64),
        a1=arr[:, 2].astype(np.int64),
        a2=arr[:, 3].astype(np.int64),
        costs=arr[:, 4 : 4 + K],
        x=arr[:, 4 + K : 4 + 2 * K],
        dist=arr[:, 4 + 2 * K],
        eps=arr[:, 5 + 2 * K],
        metadata={"source": str(path)},
    )


def run_batch(cfg: RunConfig) -> tuple[dict[int, TrajectoryRecord], dict]:
    """Run every seed of a config, writing one CSV (plus a metadata JSON
    sidecar) per seed and an aggregate JSON.  Failed seeds are recorded and
    reported at the end; completed seeds keep their outputs either way."""
    model = load_model(cfg.model_path)
    cfg.output_dir.mkdir(parents=True, exist_ok=True)

    records: dict[int, TrajectoryRecord] = {}
    failures: dict[int, str] = {}
    for seed in cfg.seeds:
        try:
            if cfg.leader == "exact":
                leader = SteeringController(model, cfg.target)
            else:
                leader = TwoTimescaleLearner(model, cfg.target, cfg.learner)
            adversary = build_adversary(cfg.adversary, model, cfg.target)
            traj = run_episode(
                model, leader, adversary, cfg.target, steps=cfg.steps, seed=seed
            )
            write_trajectory_csv(traj, trajectory_csv_path(cfg.output_dir, seed))
            sidecar = {
                "seed": seed,
                "steps": cfg.steps,
                "wall_time": traj.metadata.get("wall_time"),
                "policy_recompute_count": traj.metadata.get("policy_recompute_count"),
                "config": cfg.to_dict(),
            }
            with open(cfg.output_dir / f"run_seed{seed}.meta.json", "w") as fh:
                json.dump(sidecar, fh, indent=1)
            records[seed] = traj
        except Exception as exc:  # noqa: BLE001 - partial results are kept deliberately
            failures[seed] = f"{type(exc).__name__}: {exc}"

    aggregate = aggregate_records(records, cfg)
    aggregate["failures"] = failures
    with open(cfg.output_dir / "aggregate.json", "w") as fh:
        json.dump(aggregate, fh, indent=1)
    if failures:
        raise BatchError(f"{len(failures)} seed(s) failed: {sorted(failures)}", failures)
    return records, aggregate


def aggregate_records(records: dict[int, TrajectoryRecord], cfg: RunConfig) -> dict:
    """Quantiles of distance across seeds at the common recorded steps,
    plus per-seed final distances and log-log slopes."""
    out: dict = {"seeds": sorted(records), "steps": cfg.steps}
    if not records:
        return out
    grids = [tuple(traj.n.tolist()) for traj in records.values()]
    common = set(grids[0])
    for g in grids[1:]:
        common &= set(g)
    checkpoints = sorted(common)
    dist_at = {
        seed: dict(zip(traj.n.tolist(), traj.dist.tolist())) for seed, traj in records.items()
    }
    table = np.array([[dist_at[seed][n] for seed in sorted(records)] for n in checkpoints])
    out["checkpoints"] = checkpoints
    out["dist_median"] = np.median(table, axis=1).tolist()
    out["dist_q25"] = np.quantile(table, 0.25, axis=1).tolist()
    out["dist_q75"] = np.quantile(table, 0.75, axis=1).tolist()
    finals = {seed: float(traj.dist[-1]) for seed, traj in records.items()}
    out["final_dists"] = {str(seed): d for seed, d in finals.items()}
    out["final_dist_median"] = float(np.median(list(finals.values())))
    slopes = {}
    for seed, traj in records.items():
        try:
            slopes[str(seed)] = metrics(traj, cfg.target).loglog_slope
        except ValueError:
            slopes[str(seed)] = None
    out["loglog_slopes"] = slopes
    out["policy_recompute_counts"] = {
        str(seed): traj.metadata.get("policy_recompute_count")
        for seed, traj in records.items()
    }
    return out


# ---------------------------------------------------------------------------
# SVG convergence chart (direct XML emission, log-log axes)
# ---------------------------------------------------------------------------

_PALETTE = (
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e",
    "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf",
)

_WIDTH, _HEIGHT = 720, 480
_MARGIN_L, _MARGIN_R, _MARGIN_T, _MARGIN_B = 70, 20, 20, 50


def render_svg(records: list[TrajectoryRecord], out_path: str | Path) -> None:
    """Log-log distance-vs-step chart, one polyline per record.

    Distances at or below the plot floor are clamped to it and the legend
    says so; steps are 1-based so the log axis is always defined.
    """
    if not records:
        raise ValueError("render_svg needs at least one trajectory")
    clamped = False
    series = []
    for traj in records:
        n = traj.n.astype(float)
        d = traj.dist.astype(float)
        if np.any(d < PLOT_FLOOR):
            clamped = True
        d = np.clip(d, PLOT_FLOOR, None)
        series.append((n, d))

    x_lo = math.floor(math.log10(min(s[0].min() for s in series)))
    x_hi = math.ceil(math.log10(max(s[0].max() for s in series)))
    y_lo = math.floor(math.log10(min(s[1].min() for s in series)))
    y_hi = math.ceil(math.log10(max(s[1].max() for s in series)))
    x_hi = max(x_hi, x_lo + 1)
    y_hi = max(y_hi, y_lo + 1)
    plot_w = _WIDTH - _MARGIN_L - _MARGIN_R
    plot_h = _HEIGHT - _MARGIN_T - _MARGIN_B

    def px(logn: float) -> float:
        return _MARGIN_L + (logn - x_lo) / (x_hi - x_lo) * plot_w

    def py(logd: float) -> float:
        return _MARGIN_T + (y_hi - logd) / (y_hi - y_lo) * plot_h

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{_WIDTH}" height="{_HEIGHT}" '
        f'viewBox="0 0 {_WIDTH} {_HEIGHT}">',
        f'<rect x="{_MARGIN_L}" y="{_MARGIN_T}" width="{plot_w}" height="{plot_h}" '
        'fill="white" stroke="black" stroke-width="1"/>',
    ]
    for ex in range(x_lo, x_hi + 1):
        gx = px(ex)
        parts.append(
            f'<line x1="{gx:.2f}" y1="{_MARGIN_T}" x2="{gx:.2f}" y2="{_MARGIN_T + plot_h}" '
            'stroke="#cccccc" stroke-width="0.5"/>'
        )
        parts.append(
            f'<text x="{gx:.2f}" y="{_MARGIN_T + plot_h + 18}" font-size="11" '
            f'text-anchor="middle">1e{ex}</text>'
        )
    for ey in range(y_lo, y_hi + 1):
        gy = py(ey)
        parts.append(
            f'<line x1="{_MARGIN_L}" y1="{gy:.2f}" x2="{_MARGIN_L + plot_w}" y2="{gy:.2f}" '
            'stroke="#cccccc" stroke-width="0.5"/>'
        )
        parts.append(
            f'<text x="{_MARGIN_L - 6}" y="{gy + 4:.2f}" font-size="11" '
            f'text-anchor="end">1e{ey}</text>'
        )
    for i, (n, d) in enumerate(series):
        color = _PALETTE[i % len(_PALETTE)]
        points = " ".join(
            f"{px(math.log10(nv)):.2f},{py(math.log10(dv)):.2f}" for nv, dv in zip(n, d)
        )
        parts.append(
            f'<polyline fill="none" stroke="{color}" stroke-width="1.2" points="{points}"/>'
        )
    parts.append(
        f'<text x="{_MARGIN_L + plot_w / 2:.0f}" y="{_HEIGHT - 10}" font-size="13" '
        'text-anchor="middle">steps (log scale)</text>'
    )
    parts.append(
        f'<text x="16" y="{_MARGIN_T + plot_h / 2:.0f}" font-size="13" text-anchor="middle" '
        f'transform="rotate(-90 16 {_MARGIN_T + plot_h / 2:.0f})">distance to target (log scale)</text>'
    )
    legend = f"{len(series)} seed(s)"
    if clamped:
        legend += f"; values clamped at {PLOT_FLOOR:g}"
    parts.append(
        f'<text x="{_MARGIN_L + 8}" y="{_MARGIN_T + 16}" font-size="11">{legend}</text>'
    )
    parts.append("</svg>")
    Path(out_path).write_text("\n".join(parts))
