"""Group-interaction recognition: clustering, ray geometry, refinement.

Persons are clustered by position, each casts a ray along their facing
direction, and the pairwise forward ray crossings form the interaction
polygon.  Its area, centroid, and the members' dispersion around the
centroid decide whether the cluster is an interacting group; members whose
removal repairs an oversized zone are pruned one at a time.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .errors import EmptyPolygonError
from .skeleton import PersonState

PARALLEL_EPS = 1e-12
COLLINEAR_EPS = 1e-9
ZERO_AREA_EPS = 1e-12


@dataclass(frozen=True)
class GroupingConfig:
    """Tunable thresholds; all distances meters, areas square meters."""

    epsilon: float = 2.0
    n_min: int = 2
    area_threshold: float = 3.0
    dispersion_threshold: float = 2.0
    max_ray_length: float = 8.0

    def __post_init__(self):
        if self.epsilon <= 0 or self.area_threshold <= 0 or self.dispersion_threshold <= 0:
            raise ValueError("thresholds must be positive")
        if self.max_ray_length <= 0:
            raise ValueError("max_ray_length must be positive")
        if self.n_min < 2:
            raise ValueError("n_min must be at least 2")


class FacingRay(NamedTuple):
    origin: tuple[float, float]
    direction: tuple[float, float]  # unit vector
    max_length: float


@dataclass(frozen=True)
class InteractionGroup:
    """One cluster's interaction verdict.

    ``centroid``/``dispersion`` are None when no ray crossings exist, so
    there is no interaction zone to measure.  ``member_positions`` mirrors
    ``member_ids`` so consumers (rasterization, reports) need no access to
    the person states.
    """

    member_ids: tuple[int, ...]
    polygon: tuple[tuple[float, float], ...]
    area: float
    centroid: tuple[float, float] | None
    dispersion: float | None
    interacting: int
    removed_ids: tuple[int, ...] = ()
    member_positions: tuple[tuple[float, float], ...] = ()


@dataclass
class GroupingDiagnostics:
    noise_ids: list[int] = field(default_factory=list)
    rejected: list[InteractionGroup] = field(default_factory=list)


def dbscan(points, epsilon: float, n_min: int) -> tuple[list[list[int]], set[int]]:
    """Density-based clustering over 2D points.

    A point is core when at least ``n_min`` points (itself included) lie
    strictly within ``epsilon``; clusters are the maximal density-connected
    sets; the rest is noise.

    Returns:
        (clusters, noise): clusters as lists of input indices in discovery
        order, and the set of noise indices.
    """
    n = len(points)
    if n == 0:
        return [], set()
    eps2 = epsilon * epsilon
    if n <= 16:
        # Python distance loops beat numpy dispatch overhead at this size.
        coords = [(float(p[0]), float(p[1])) for p in points]
        neighbor_lists: list[list[int]] = []
        for i, (xi, yi) in enumerate(coords):
            row = []
            for j, (xj, yj) in enumerate(coords):
                dx = xi - xj
                dy = yi - yj
                if dx * dx + dy * dy < eps2:
                    row.append(j)
            neighbor_lists.append(row)
    else:
        pts = np.asarray(points, dtype=np.float64).reshape(-1, 2)
        diff = pts[:, None, :] - pts[None, :, :]
        within = (diff**2).sum(axis=2) < eps2
        neighbor_lists = [list(np.nonzero(row)[0]) for row in within]
    core = [len(nb) >= n_min for nb in neighbor_lists]

    UNSEEN, NOISE = -2, -1
    labels = [UNSEEN] * n
    clusters: list[list[int]] = []
    for seed in range(n):
        if labels[seed] != UNSEEN:
            continue
        if not core[seed]:
            labels[seed] = NOISE
            continue
        cluster_id = len(clusters)
        members = [seed]
        labels[seed] = cluster_id
        queue = list(neighbor_lists[seed])
        while queue:
            j = queue.pop()
            if labels[j] == NOISE:
                labels[j] = cluster_id  # border point reached from a core
                members.append(j)
            if labels[j] != UNSEEN:
                continue
            labels[j] = cluster_id
            members.append(j)
            if core[j]:
                queue.extend(neighbor_lists[j])
        clusters.append(sorted(members))
    noise = {i for i, lab in enumerate(labels) if lab == NOISE}
    return clusters, noise


def facing_ray(state: PersonState, max_length: float) -> FacingRay:
    return FacingRay(
        origin=state.position,
        direction=(math.cos(state.theta), math.sin(state.theta)),
        max_length=max_length,
    )


def ray_intersection(
    r1: FacingRay, r2: FacingRay
) -> tuple[tuple[float, float], float, float] | None:
    """Forward crossing point of two facing rays, if any.

    Solves origin1 + t1*dir1 == origin2 + t2*dir2 and accepts the solution
    only when both parameters lie in (0, max_length]: the crossing must be
    in front of both persons.  Parallel rays yield None, with one
    exception: two rays facing each other along the line joining their
    origins meet in the degenerate sense on that whole segment, and the
    segment midpoint is returned (this is the mutual-gaze configuration of
    a facing pair).
    """
    px, py = r1.origin
    qx, qy = r2.origin
    d1x, d1y = r1.direction
    d2x, d2y = r2.direction
    ox, oy = qx - px, qy - py
    cross = d1x * d2y - d1y * d2x
    if abs(cross) < PARALLEL_EPS:
        dist = math.hypot(ox, oy)
        if dist < PARALLEL_EPS:
            return None
        collinear = abs(d1x * oy - d1y * ox) <= COLLINEAR_EPS * dist
        facing = (d1x * ox + d1y * oy) > 0.0 and (d2x * ox + d2y * oy) < 0.0
        if collinear and facing:
            t = 0.5 * dist
            if t <= r1.max_length and t <= r2.max_length:
                return ((px + qx) * 0.5, (py + qy) * 0.5), t, t
        return None
    t1 = (ox * d2y - oy * d2x) / cross
    t2 = (ox * d1y - oy * d1x) / cross
    if 0.0 < t1 <= r1.max_length and 0.0 < t2 <= r2.max_length:
        return (px + t1 * d1x, py + t1 * d1y), t1, t2
    return None


def build_interaction_polygon(rays: list[FacingRay]) -> list[tuple[float, float]]:
    """All pairwise forward ray crossings, ordered counterclockwise.

    Vertices are sorted by angle around their arithmetic mean (radius and
    coordinates break ties) so the boundary is traversed consistently.
    Returns a single vertex for the two-ray case and an empty list when no
    crossings exist.
    """
    points: list[tuple[float, float]] = []
    for i in range(len(rays)):
        for j in range(i + 1, len(rays)):
            hit = ray_intersection(rays[i], rays[j])
            if hit is not None:
                points.append(hit[0])
    if len(points) <= 1:
        return points
    mx = sum(p[0] for p in points) / len(points)
    my = sum(p[1] for p in points) / len(points)
    return sorted(
        points,
        key=lambda p: (math.atan2(p[1] - my, p[0] - mx), math.hypot(p[0] - mx, p[1] - my), p),
    )


def _signed_area(vertices) -> float:
    total = 0.0
    n = len(vertices)
    for i in range(n):
        x1, y1 = vertices[i]
        x2, y2 = vertices[(i + 1) % n]
        total += x1 * y2 - y1 * x2
    return 0.5 * total


def polygon_area(vertices) -> float:
    """Shoelace area of an ordered vertex list; orientation-independent."""
    if len(vertices) < 3:
        return 0.0
    return abs(_signed_area(vertices))


def polygon_centroid(vertices) -> tuple[float, float]:
    """Area centroid of an ordered vertex list.

    Falls back to the vertex mean for degenerate inputs (fewer than three
    vertices, or numerically zero area).
    """
    n = len(vertices)
    if n == 0:
        raise EmptyPolygonError("no vertices to take a centroid of")
    a = _signed_area(vertices) if n >= 3 else 0.0
    if abs(a) < ZERO_AREA_EPS:
        return (
            sum(v[0] for v in vertices) / n,
            sum(v[1] for v in vertices) / n,
        )
    sx = sy = 0.0
    for i in range(n):
        x1, y1 = vertices[i]
        x2, y2 = vertices[(i + 1) % n]
        w = x1 * y2 - y1 * x2
        sx += (x1 + x2) * w
        sy += (y1 + y2) * w
    return sx / (6.0 * a), sy / (6.0 * a)


def mean_dispersion(members: list[PersonState], centroid: tuple[float, float]) -> float:
    """Mean member distance from the interaction centroid."""
    return sum(
        math.hypot(s.position[0] - centroid[0], s.position[1] - centroid[1]) for s in members
    ) / len(members)


def classify_interaction(area: float, dispersion: float, config: GroupingConfig) -> int:
    """1 for a significant interaction, 0 for weak or none.

    The comparison is strictly greater-than: values exactly at a threshold
    still count as interacting.
    """
    if area > config.area_threshold or dispersion > config.dispersion_threshold:
        return 0
    return 1


def _zone_metrics(
    members: list[PersonState], rays: list[FacingRay]
) -> tuple[list[tuple[float, float]], float, tuple[float, float] | None, float | None]:
    polygon = build_interaction_polygon(rays)
    if not polygon:
        return [], 0.0, None, None
    area = polygon_area(polygon)
    centroid = polygon_centroid(polygon)
    return polygon, area, centroid, mean_dispersion(members, centroid)


def refine_cluster(cluster: list[PersonState], config: GroupingConfig) -> InteractionGroup:
    """Classify a cluster, pruning members that break the interaction zone.

    While the zone exceeds a threshold, members are tried for removal in
    ascending person_id order; the first whose removal brings area or
    dispersion back under its threshold is permanently dropped and the loop
    repeats.  It stops when the zone qualifies or no single removal helps.
    A removal that would destroy the zone entirely (no crossings left, or
    fewer than two members) never counts as an improvement.
    """
    members = sorted(cluster, key=lambda s: s.person_id)
    removed: list[int] = []
    rays = {s.person_id: facing_ray(s, config.max_ray_length) for s in members}
    polygon, area, centroid, dispersion = _zone_metrics(
        members, [rays[s.person_id] for s in members]
    )
    if not polygon or len(members) < 2:
        return InteractionGroup(
            member_ids=tuple(s.person_id for s in members),
            polygon=(),
            area=0.0,
            centroid=None,
            dispersion=None,
            interacting=0,
            removed_ids=(),
            member_positions=tuple(s.position for s in members),
        )
    while area > config.area_threshold or dispersion > config.dispersion_threshold:
        improved = False
        for candidate in members:
            reduced = [s for s in members if s is not candidate]
            if len(reduced) < 2:
                continue
            new_polygon, new_area, new_centroid, new_dispersion = _zone_metrics(
                reduced, [rays[s.person_id] for s in reduced]
            )
            if not new_polygon:
                continue
            if (
                new_area <= config.area_threshold
                or new_dispersion <= config.dispersion_threshold
            ):
                members = reduced
                removed.append(candidate.person_id)
                polygon, area, centroid, dispersion = (
                    new_polygon,
                    new_area,
                    new_centroid,
                    new_dispersion,
                )
                improved = True
                break
        if not improved:
            break
    return InteractionGroup(
        member_ids=tuple(s.person_id for s in members),
        polygon=tuple(polygon),
        area=area,
        centroid=centroid,
        dispersion=dispersion,
        interacting=classify_interaction(area, dispersion, config),
        removed_ids=tuple(removed),
        member_positions=tuple(s.position for s in members),
    )


def recognize_groups(
    states: list[PersonState], config: GroupingConfig | None = None
) -> tuple[list[InteractionGroup], GroupingDiagnostics]:
    """Full per-frame grouping: cluster, refine, keep interacting groups.

    Returns the interacting groups plus diagnostics naming the noise
    persons and the clusters rejected as non-interacting.
    """
    if config is None:
        config = GroupingConfig()
    diagnostics = GroupingDiagnostics()
    if not states:
        return [], diagnostics
    clusters, noise = dbscan([s.position for s in states], config.epsilon, config.n_min)
    diagnostics.noise_ids = sorted(states[i].person_id for i in noise)
    groups: list[InteractionGroup] = []
    for cluster_indices in clusters:
        group = refine_cluster([states[i] for i in cluster_indices], config)
        if group.interacting:
            groups.append(group)
        else:
            diagnostics.rejected.append(group)
    return groups, diagnostics
