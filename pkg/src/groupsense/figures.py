"""Matplotlib figure rendering for evaluation and benchmark reports.

Figures are written to files next to the delimited outputs; nothing is
shown interactively (the Agg backend is forced).
"""

from __future__ import annotations

import math
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .costmap import SocialCostmap
from .grouping import InteractionGroup
from .metrics import KeypointErrorRow, ScenarioErrors, StageTimingReport
from .skeleton import KEYPOINT_NAMES, PersonState


def save_keypoint_error_figure(rows: list[KeypointErrorRow], path: str | Path) -> None:
    per_kp = [r for r in rows if r.index >= 0]
    fig, ax = plt.subplots(figsize=(9, 4))
    if per_kp:
        idx = np.arange(len(per_kp))
        width = 0.27
        ax.bar(idx - width, [r.mae for r in per_kp], width, label="MAE (m)")
        ax.bar(idx, [r.rmse for r in per_kp], width, label="RMSE (m)")
        ax.bar(idx + width, [r.pe for r in per_kp], width, label="PE")
        ax.set_xticks(idx)
        ax.set_xticklabels([KEYPOINT_NAMES[r.index] for r in per_kp], rotation=60, ha="right")
    ax.set_ylabel("error")
    ax.set_title("Keypoint position errors")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def save_scenario_error_figure(errors: ScenarioErrors, path: str | Path) -> None:
    labels = ["IZA (m²)", "IPX (m)", "IPY (m)", "HPX (m)", "HPY (m)", "HFD (°)"]
    values = [errors.iza, errors.ipx, errors.ipy, errors.hpx, errors.hpy, errors.hfd_deg]
    fig, ax = plt.subplots(figsize=(7, 4))
    ax.bar(labels, values, color="tab:blue")
    ax.set_ylabel("RMSE")
    ax.set_title(
        f"Scenario RMSE over {errors.frames} frames "
        f"({errors.detection_failures} grouping mismatches)"
    )
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def save_timing_figure(report: StageTimingReport, path: str | Path) -> None:
    fig, ax = plt.subplots(figsize=(6, 4))
    stages = [s.stage for s in report.stages]
    means = [s.mean_ms for s in report.stages]
    p95s = [s.p95_ms for s in report.stages]
    idx = np.arange(len(stages))
    ax.bar(idx - 0.2, means, 0.4, label="mean")
    ax.bar(idx + 0.2, p95s, 0.4, label="p95")
    ax.set_xticks(idx)
    ax.set_xticklabels(stages)
    ax.set_ylabel("ms per frame")
    ax.set_title("Stage timing")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def save_scene_figure(
    states: list[PersonState],
    groups: list[InteractionGroup],
    path: str | Path,
    title: str = "Recognized groups",
) -> None:
    """Top-down view: positions, facing arrows, interaction zones."""
    fig, ax = plt.subplots(figsize=(6, 6))
    for state in states:
        x, y = state.position
        ax.plot(y, x, "o", color="tab:blue", markersize=8)
        ax.annotate(str(state.person_id), (y, x), textcoords="offset points", xytext=(6, 6))
        ax.arrow(
            y,
            x,
            0.5 * math.sin(state.theta),
            0.5 * math.cos(state.theta),
            head_width=0.08,
            color="tab:blue",
        )
    for group in groups:
        if group.polygon:
            poly = list(group.polygon)
            if len(poly) >= 3:
                ys = [p[1] for p in poly] + [poly[0][1]]
                xs = [p[0] for p in poly] + [poly[0][0]]
                ax.fill(ys, xs, alpha=0.3, color="tab:orange")
            else:
                ax.plot([p[1] for p in poly], [p[0] for p in poly], "s", color="tab:orange")
        if group.centroid is not None:
            ax.plot(group.centroid[1], group.centroid[0], "*", color="tab:red", markersize=12)
    ax.plot(0, 0, "k^", markersize=10)  # camera
    ax.set_xlabel("lateral (m)")
    ax.set_ylabel("forward (m)")
    ax.set_title(title)
    ax.set_aspect("equal")
    ax.invert_xaxis()  # viewer-style: camera-left on the left
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def save_costmap_figure(costmap: SocialCostmap, path: str | Path) -> None:
    fig, ax = plt.subplots(figsize=(6, 6))
    extent = (
        costmap.origin[1],
        costmap.origin[1] + costmap.width * costmap.resolution,
        costmap.origin[0],
        costmap.origin[0] + costmap.height * costmap.resolution,
    )
    ax.imshow(costmap.cells.T, origin="lower", extent=extent, cmap="inferno", vmin=0, vmax=255)
    ax.set_xlabel("lateral (m)")
    ax.set_ylabel("forward (m)")
    ax.set_title("Social costmap layer")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
