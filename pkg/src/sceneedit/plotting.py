"""Top-down scene plots and metric charts written to image files."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
from matplotlib.patches import Polygon, Rectangle  # noqa: E402

from . import geometry as geo  # noqa: E402
from .scene import Scene, world_obb  # noqa: E402


def draw_scene(ax, scene: Scene, highlight=(), title: str = ""):
    b = scene.bounds
    ax.add_patch(Rectangle((b.min.x, b.min.y), b.max.x - b.min.x, b.max.y - b.min.y, fill=False, lw=1.5, ec="black"))
    highlight = set(highlight)
    for oid in scene.placed_ids():
        obj = scene.objects[oid]
        box = world_obb(obj)
        color = "tab:red" if oid in highlight else ("tab:gray" if obj.wall_mounted else "tab:blue")
        # Stacked objects are drawn lighter so the support underneath stays readable.
        alpha = 0.25 if obj.support_parent in (None, "floor") else 0.5
        ax.add_patch(Polygon(geo.footprint(box), closed=True, fc=color, ec=color, alpha=alpha))
        ax.annotate(oid, (box.center.x, box.center.y), ha="center", va="center", fontsize=6)
        fx, fy = geo.world_front(obj.pose, obj.front_axis)[:2]
        r = min(obj.half_extents.x, obj.half_extents.y)
        ax.arrow(box.center.x, box.center.y, fx * r, fy * r, width=0.005, color=color, length_includes_head=True)
    for name, vp in scene.viewpoints.items():
        ax.plot([vp.position.x], [vp.position.y], marker="^", color="tab:green")
        ax.annotate(name, (vp.position.x, vp.position.y), fontsize=6, xytext=(3, 3), textcoords="offset points")
    pad = 0.5
    ax.set_xlim(b.min.x - pad, b.max.x + pad)
    ax.set_ylim(b.min.y - pad, b.max.y + pad)
    ax.set_aspect("equal")
    ax.set_xlabel("x [m]")
    ax.set_ylabel("y [m]")
    if title:
        ax.set_title(title)


def render_scene(scene: Scene, path, highlight=(), title: str = "") -> Path:
    fig, ax = plt.subplots(figsize=(6, 6))
    try:
        draw_scene(ax, scene, highlight, title)
        fig.tight_layout()
        Path(path).parent.mkdir(parents=True, exist_ok=True)
        fig.savefig(path, dpi=120)
    finally:
        plt.close(fig)
    return Path(path)


def render_before_after(before: Scene, after: Scene, touched, path) -> Path:
    fig, (a, b) = plt.subplots(1, 2, figsize=(11, 5.5))
    try:
        draw_scene(a, before, touched, "before")
        draw_scene(b, after, touched, "after")
        fig.tight_layout()
        Path(path).parent.mkdir(parents=True, exist_ok=True)
        fig.savefig(path, dpi=120)
    finally:
        plt.close(fig)
    return Path(path)


def render_metrics(report, path) -> Path:
    """Bar chart of per-scene floating counts next to the two batch rates."""
    names = [s["name"] for s in report.per_scene]
    floating = [len(s["floating"]) for s in report.per_scene]
    oob = [len(s["oob"]) for s in report.per_scene]
    fig, (a, b) = plt.subplots(1, 2, figsize=(10, 4), gridspec_kw={"width_ratios": [3, 1]})
    try:
        xs = range(len(names))
        a.bar([x - 0.2 for x in xs], floating, width=0.4, label="floating")
        a.bar([x + 0.2 for x in xs], oob, width=0.4, label="out of bounds")
        a.set_xticks(list(xs))
        a.set_xticklabels(names, rotation=45, ha="right", fontsize=7)
        a.set_ylabel("objects")
        a.legend(fontsize=7)
        b.bar(["OOB scenes", "floating"], [report.oob_scene_ratio, report.floating_object_rate], color=["tab:orange", "tab:blue"])
        b.set_ylabel("%")
        b.set_ylim(0, max(100.0, report.oob_scene_ratio, report.floating_object_rate))
        fig.tight_layout()
        Path(path).parent.mkdir(parents=True, exist_ok=True)
        fig.savefig(path, dpi=120)
    finally:
        plt.close(fig)
    return Path(path)
