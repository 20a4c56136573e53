"""Plot rendering for experiment outputs.

SVG output is made byte-deterministic by pinning the hash salt and
stripping the creation date, so rerunning a seeded experiment reproduces
the plot files exactly.
"""

from __future__ import annotations

import csv
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
matplotlib.rcParams["svg.hashsalt"] = "sspest"

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402


def _read_csv(path: Path) -> dict[str, list[str]]:
    if not path.exists():
        raise FileNotFoundError(f"missing input table: {path}")
    with path.open() as fh:
        rows = list(csv.reader(fh))
    if len(rows) < 2:
        raise ValueError(f"empty table: {path}")
    header, body = rows[0], rows[1:]
    return {name: [row[i] for row in body] for i, name in enumerate(header)}


def _need(table: dict, path: Path, *names) -> list[np.ndarray]:
    out = []
    for name in names:
        if name not in table:
            raise ValueError(f"{path}: missing required column '{name}'")
        out.append(np.array([float(v) for v in table[name]]))
    return out


def _save(fig, path: Path):
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)


def render_metrics(in_dir, out_dir) -> list[Path]:
    """Metric-vs-step line plots from summary.csv (or metrics.csv)."""
    in_dir, out_dir = Path(in_dir), Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []
    src = in_dir / "summary.csv"
    if src.exists():
        table = _read_csv(src)
        step, rr, ss = _need(table, src, "step", "mean_rrmse", "mean_ssim")
    else:
        src = in_dir / "metrics.csv"
        table = _read_csv(src)
        step, rr, ss = _need(table, src, "step", "rrmse", "ssim")
    for name, vals, label in (("rrmse", rr, "RRMSE"), ("ssim", ss, "SSIM")):
        fig, ax = plt.subplots(figsize=(6, 4))
        ax.plot(step, vals)
        ax.set_xlabel("measurements")
        ax.set_ylabel(label)
        ax.grid(True, alpha=0.3)
        path = out_dir / f"{name}_vs_step.svg"
        _save(fig, path)
        written.append(path)
    return written


def render_field(in_dir, out_dir) -> list[Path]:
    """Heatmaps of the true/estimated fields with the trajectory overlay."""
    in_dir, out_dir = Path(in_dir), Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []
    traj = None
    traj_path = in_dir / "trajectory.csv"
    if traj_path.exists():
        t = _read_csv(traj_path)
        traj = _need(t, traj_path, "range", "depth")
    for stem in ("field_true", "field_est"):
        src = in_dir / f"{stem}.csv"
        if not src.exists():
            continue
        table = _read_csv(src)
        r, z, c = _need(table, src, "range", "depth", "sound_speed")
        nr = len(np.unique(r))
        nz = len(np.unique(z))
        grid = c.reshape(nz, nr)
        fig, ax = plt.subplots(figsize=(7, 3))
        im = ax.imshow(grid, origin="upper", aspect="auto",
                       extent=(0.0, float(r.max() + r.min()),
                               float(z.max() + z.min()), 0.0))
        if traj is not None:
            ax.plot(traj[0], traj[1], "w-", linewidth=1.2)
        ax.set_xlabel("range (m)")
        ax.set_ylabel("depth (m)")
        fig.colorbar(im, ax=ax, label="sound speed (m/s)")
        path = out_dir / f"{stem}.svg"
        _save(fig, path)
        written.append(path)
    return written


def render(in_dir, out_dir) -> list[Path]:
    written = render_metrics(in_dir, out_dir)
    written += render_field(in_dir, out_dir)
    return written
