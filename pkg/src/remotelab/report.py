"""Report rendering: delimited cost/usage output plus matplotlib figures
written next to it. Figures use the Agg backend so reports work headless.
"""

from __future__ import annotations

import csv
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)

from .model import FieldLayout, Telemetry  # noqa: E402
from .provisioner import cost_report  # noqa: E402
from .state import SystemState  # noqa: E402


def write_cost_report(state: SystemState, from_ts: int, to_ts: int,
                      out_dir: str | Path) -> tuple[Path, Path]:
    """Write cost.csv and cost.png for the window; returns both paths."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    total, breakdown = cost_report(state, from_ts, to_ts)

    csv_path = out / "cost.csv"
    with open(csv_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["node_id", "amount_cents"])
        for node_id in sorted(breakdown):
            writer.writerow([node_id, breakdown[node_id]])
        writer.writerow(["total", total])

    png_path = out / "cost.png"
    fig, ax = plt.subplots(figsize=(8, 4))
    nodes = sorted(breakdown)
    ax.bar(range(len(nodes)), [breakdown[n] for n in nodes],
           color="steelblue")
    ax.set_xticks(range(len(nodes)))
    ax.set_xticklabels(nodes, rotation=45, ha="right", fontsize=7)
    ax.set_ylabel("cents")
    ax.set_title(f"node cost, window [{from_ts}, {to_ts}) — "
                 f"total {total} cents")
    fig.tight_layout()
    fig.savefig(png_path, dpi=100)
    plt.close(fig)
    return csv_path, png_path


def write_telemetry_report(telemetry: dict[str, list[Telemetry]],
                           layout: FieldLayout | None,
                           out_dir: str | Path) -> tuple[Path, Path]:
    """Write telemetry.csv and a pose-trail figure trails.png."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)

    csv_path = out / "telemetry.csv"
    with open(csv_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["robot_id", "tick", "x", "y", "theta",
                         "battery_pct", "state"])
        for robot_id in sorted(telemetry):
            for t in telemetry[robot_id]:
                writer.writerow([t.robot_id, t.tick, f"{t.x:.3f}",
                                 f"{t.y:.3f}", f"{t.theta:.3f}",
                                 f"{t.battery_pct:.3f}", t.state])

    png_path = out / "trails.png"
    fig, ax = plt.subplots(figsize=(6, 6))
    if layout is not None:
        for r, row in enumerate(layout.rows):
            for c, cell in enumerate(row):
                if cell == "#":
                    ax.add_patch(plt.Rectangle(
                        (c * layout.cell_size_m, r * layout.cell_size_m),
                        layout.cell_size_m, layout.cell_size_m,
                        color="0.3"))
        ax.set_xlim(0, layout.width_m)
        ax.set_ylim(0, layout.height_m)
    for robot_id in sorted(telemetry):
        xs = [t.x for t in telemetry[robot_id]]
        ys = [t.y for t in telemetry[robot_id]]
        if xs:
            ax.plot(xs, ys, label=robot_id, linewidth=1.2)
    if telemetry:
        ax.legend(fontsize=7)
    ax.set_aspect("equal")
    ax.set_xlabel("x (m)")
    ax.set_ylabel("y (m)")
    ax.set_title("robot pose trails")
    fig.tight_layout()
    fig.savefig(png_path, dpi=100)
    plt.close(fig)
    return csv_path, png_path
