"""Social costmap layer: rasterization of interaction zones and file I/O.

Cost convention follows the 0-255 occupancy-cost scale: 254 inside an
interaction zone's hull, an exponentially decaying band around it, 0
elsewhere.  A merge with a base costmap is the cell-wise maximum.

File format (``.smap``): five ASCII header lines --- the magic string
``SOCIALMAP1``, ``origin_x origin_y``, ``resolution``, ``width height``,
and a creation timestamp (``-`` when suppressed) --- followed by
width*height raw cost bytes in row-major order.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from .errors import IncompatibleGridsError
from .grouping import InteractionGroup

logger = logging.getLogger(__name__)

MAGIC = "SOCIALMAP1"
ZONE_COST = 254


@dataclass(frozen=True)
class GridSpec:
    """Geometry of a costmap grid; origin is the corner of cell (0, 0)."""

    origin_x: float = -6.0
    origin_y: float = -6.0
    resolution: float = 0.05
    width: int = 240
    height: int = 240

    def __post_init__(self):
        if self.resolution <= 0:
            raise ValueError("resolution must be positive")
        if self.width <= 0 or self.height <= 0:
            raise ValueError("grid dimensions must be positive")


@dataclass
class SocialCostmap:
    origin: tuple[float, float]
    resolution: float
    width: int
    height: int
    cells: np.ndarray  # uint8, shape (height, width), row-major

    def same_geometry(self, other: "SocialCostmap") -> bool:
        return (
            self.origin == other.origin
            and self.resolution == other.resolution
            and self.width == other.width
            and self.height == other.height
        )


def _convex_hull(points: np.ndarray) -> np.ndarray:
    """Counterclockwise convex hull (monotone chain); collinear points dropped."""
    pts = np.unique(np.asarray(points, dtype=np.float64).reshape(-1, 2), axis=0)
    if pts.shape[0] <= 2:
        return pts
    ordered = pts[np.lexsort((pts[:, 1], pts[:, 0]))]

    def half(chain_pts):
        chain: list[np.ndarray] = []
        for p in chain_pts:
            while len(chain) >= 2:
                a, b = chain[-2], chain[-1]
                if (b[0] - a[0]) * (p[1] - a[1]) - (b[1] - a[1]) * (p[0] - a[0]) <= 0.0:
                    chain.pop()
                else:
                    break
            chain.append(p)
        return chain

    lower = half(ordered)
    upper = half(ordered[::-1])
    hull = lower[:-1] + upper[:-1]
    return np.array(hull) if len(hull) >= 3 else np.array([ordered[0], ordered[-1]])


def _distance_to_hull(hull: np.ndarray, px: np.ndarray, py: np.ndarray) -> np.ndarray:
    """Distance from query points to a convex hull; zero inside or on it."""
    n = hull.shape[0]
    if n == 1:
        return np.hypot(px - hull[0, 0], py - hull[0, 1])
    dist = np.full(px.shape, np.inf)
    inside = np.ones(px.shape, dtype=bool) if n >= 3 else np.zeros(px.shape, dtype=bool)
    for i in range(n):
        ax, ay = hull[i]
        bx, by = hull[(i + 1) % n] if n >= 3 else hull[i + 1]
        ex, ey = bx - ax, by - ay
        length2 = ex * ex + ey * ey
        if length2 <= 0.0:
            seg = np.hypot(px - ax, py - ay)
        else:
            t = np.clip(((px - ax) * ex + (py - ay) * ey) / length2, 0.0, 1.0)
            seg = np.hypot(px - (ax + t * ex), py - (ay + t * ey))
        dist = np.minimum(dist, seg)
        if n >= 3:
            inside &= (ex * (py - ay) - ey * (px - ax)) >= 0.0
        else:
            break  # a 2-point hull is a single segment
    dist[inside] = 0.0
    return dist


def rasterize_groups(
    groups: list[InteractionGroup],
    grid: GridSpec | None = None,
    inflation_radius: float = 0.5,
    decay_rate: float = 3.0,
) -> SocialCostmap:
    """Render interaction groups into a costmap layer.

    Each group's footprint is the convex hull of its member positions and
    polygon vertices; cells whose centers fall in the hull cost 254, cells
    within ``inflation_radius`` of it cost ``254 * exp(-decay_rate *
    distance)``, everything else 0.  Groups (or parts) outside the grid are
    clipped with a warning.
    """
    if grid is None:
        grid = GridSpec()
    cells = np.zeros((grid.height, grid.width), dtype=np.uint8)
    res = grid.resolution
    for group in groups:
        footprint = list(group.polygon) + list(group.member_positions)
        if not footprint:
            continue
        hull = _convex_hull(np.array(footprint))
        min_x = hull[:, 0].min() - inflation_radius
        max_x = hull[:, 0].max() + inflation_radius
        min_y = hull[:, 1].min() - inflation_radius
        max_y = hull[:, 1].max() + inflation_radius
        col0 = max(int(math.floor((min_x - grid.origin_x) / res)), 0)
        col1 = min(int(math.ceil((max_x - grid.origin_x) / res)), grid.width - 1)
        row0 = max(int(math.floor((min_y - grid.origin_y) / res)), 0)
        row1 = min(int(math.ceil((max_y - grid.origin_y) / res)), grid.height - 1)
        if col0 > col1 or row0 > row1:
            logger.warning("group %s lies outside the costmap grid; clipped", group.member_ids)
            continue
        if (
            min_x < grid.origin_x
            or min_y < grid.origin_y
            or max_x > grid.origin_x + grid.width * res
            or max_y > grid.origin_y + grid.height * res
        ):
            logger.warning("group %s partially outside the costmap grid; clipped", group.member_ids)
        cols = grid.origin_x + (np.arange(col0, col1 + 1) + 0.5) * res
        rows = grid.origin_y + (np.arange(row0, row1 + 1) + 0.5) * res
        px, py = np.meshgrid(cols, rows)
        dist = _distance_to_hull(hull, px, py)
        cost = np.zeros(dist.shape, dtype=np.uint8)
        band = (dist > 0.0) & (dist <= inflation_radius)
        # the full zone cost is reserved for the interior; band cells cap below it
        decayed = np.rint(ZONE_COST * np.exp(-decay_rate * dist[band]))
        cost[band] = np.minimum(decayed, ZONE_COST - 1).astype(np.uint8)
        cost[dist == 0.0] = ZONE_COST
        window = cells[row0 : row1 + 1, col0 : col1 + 1]
        np.maximum(window, cost, out=window)
    return SocialCostmap(
        origin=(grid.origin_x, grid.origin_y),
        resolution=res,
        width=grid.width,
        height=grid.height,
        cells=cells,
    )


def merge_costmaps(base: SocialCostmap, social: SocialCostmap) -> SocialCostmap:
    """Cell-wise maximum of two costmaps with identical geometry."""
    if not base.same_geometry(social):
        raise IncompatibleGridsError(
            f"grids differ: {base.origin}/{base.resolution}/{base.width}x{base.height} vs "
            f"{social.origin}/{social.resolution}/{social.width}x{social.height}"
        )
    return SocialCostmap(
        origin=base.origin,
        resolution=base.resolution,
        width=base.width,
        height=base.height,
        cells=np.maximum(base.cells, social.cells),
    )


def write_costmap(costmap: SocialCostmap, path: str | Path, timestamp: str | None = None) -> None:
    """Write a costmap; pass ``timestamp="-"`` for reproducible output."""
    if timestamp is None:
        timestamp = datetime.now(timezone.utc).isoformat()
    header = (
        f"{MAGIC}\n"
        f"{costmap.origin[0]!r} {costmap.origin[1]!r}\n"
        f"{costmap.resolution!r}\n"
        f"{costmap.width} {costmap.height}\n"
        f"{timestamp}\n"
    )
    with open(path, "wb") as fh:
        fh.write(header.encode("ascii"))
        fh.write(np.ascontiguousarray(costmap.cells, dtype=np.uint8).tobytes())


def read_costmap(path: str | Path) -> tuple[SocialCostmap, str]:
    """Read a costmap file; returns (costmap, timestamp string)."""
    data = Path(path).read_bytes()
    parts = data.split(b"\n", 5)
    if len(parts) != 6 or parts[0].decode("ascii", "replace") != MAGIC:
        raise ValueError(f"{path}: not a {MAGIC} file")
    try:
        ox, oy = (float(v) for v in parts[1].decode("ascii").split())
        resolution = float(parts[2].decode("ascii"))
        width, height = (int(v) for v in parts[3].decode("ascii").split())
        timestamp = parts[4].decode("ascii")
    except (UnicodeDecodeError, ValueError) as exc:
        raise ValueError(f"{path}: malformed header: {exc}") from exc
    body = parts[5]
    if len(body) != width * height:
        raise ValueError(f"{path}: expected {width * height} cost bytes, got {len(body)}")
    cells = np.frombuffer(body, dtype=np.uint8).reshape(height, width).copy()
    return (
        SocialCostmap(origin=(ox, oy), resolution=resolution, width=width, height=height, cells=cells),
        timestamp,
    )
