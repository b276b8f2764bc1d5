"""Crowd-level fusion of detections into located map semantics."""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np
from scipy.spatial import cKDTree

from .config import MapperConfig
from .model import AnnotatedMap, MapSemantic, SemanticDetection, map_label

DEFAULT_MAPPER = MapperConfig()


def _neighbours(points: np.ndarray, eps: float) -> list[list[int]]:
    if len(points) == 0:
        return []
    tree = cKDTree(points)
    # tiny slack so that distances of exactly eps count as neighbours
    return [sorted(nb) for nb in tree.query_ball_point(points, eps * (1 + 1e-12))]


def dbscan(points, eps: float, minpts: int) -> tuple[list[list[int]], set[int]]:
    """Plain DBSCAN with inclusive neighbourhoods (a point counts itself).

    Clusters come out ordered by their lowest core index, and a border point
    reachable from several clusters joins the earliest one.
    """
    pts = np.asarray(points, dtype=float).reshape(-1, 2)
    n = len(pts)
    nbrs = _neighbours(pts, eps)
    core = [len(nb) >= minpts for nb in nbrs]
    label = [-1] * n
    clusters: list[list[int]] = []
    for i in range(n):
        if label[i] != -1 or not core[i]:
            continue
        cid = len(clusters)
        members = [i]
        label[i] = cid
        queue = deque([i])
        while queue:
            p = queue.popleft()
            for q in nbrs[p]:
                if label[q] != -1:
                    continue
                label[q] = cid
                members.append(q)
                if core[q]:
                    queue.append(q)
        clusters.append(sorted(members))
    noise = {i for i in range(n) if label[i] == -1}
    return clusters, noise


def weighted_centroid(points, weights) -> tuple[float, float]:
    p = np.asarray(points, dtype=float).reshape(-1, 2)
    w = np.asarray(weights, dtype=float)
    if len(p) == 0:
        raise ValueError("cannot locate an empty cluster")
    total = w.sum()
    return float((w * p[:, 0]).sum() / total), float((w * p[:, 1]).sum() / total)


@dataclass(frozen=True)
class SemanticCluster:
    label: str  # map label, aggregates folded (see model.map_label)
    members: tuple[SemanticDetection, ...]
    minpts: int

    @property
    def location(self) -> tuple[float, float]:
        return estimate_location(self)

    @property
    def confirmed(self) -> bool:
        return len(self.members) >= self.minpts

    @property
    def total_weight(self) -> float:
        return float(sum(d.weight for d in self.members))


def estimate_location(cluster: SemanticCluster | Sequence[SemanticDetection]) -> tuple[float, float]:
    members = cluster.members if isinstance(cluster, SemanticCluster) else tuple(cluster)
    if not members:
        raise ValueError("cannot locate an empty cluster")
    return weighted_centroid([d.position for d in members], [d.weight for d in members])


@dataclass(frozen=True)
class SemanticMap:
    station_id: str
    clusters: tuple[SemanticCluster, ...] = ()
    version: int = 0

    def of_label(self, label: str) -> list[SemanticCluster]:
        return [c for c in self.clusters if c.label == label]

    def confirmed(self) -> list[SemanticCluster]:
        return [c for c in self.clusters if c.confirmed]

    def nearest_confirmed(self, label: str, position, radius: float) -> SemanticCluster | None:
        best, best_d = None, radius
        for c in self.clusters:
            if c.label != label or not c.confirmed:
                continue
            d = float(np.hypot(*(np.subtract(c.location, position))))
            if d <= best_d:
                best, best_d = c, d
        return best


def update_map(smap: SemanticMap, detection: SemanticDetection, config: MapperConfig = DEFAULT_MAPPER) -> SemanticMap:
    """Fold one detection into the nearest same-label cluster within eps.

    A detection with no such cluster seeds a new one.  Confirmed clusters that
    drift within eps of each other are merged.
    """
    label = map_label(detection.cls)
    if label is None:
        return smap
    params = config.params(label)
    clusters = list(smap.clusters)
    best, best_d = None, params.eps
    for k, c in enumerate(clusters):
        if c.label != label:
            continue
        d = float(np.hypot(*(np.subtract(c.location, detection.position))))
        if d <= best_d:
            best, best_d = k, d
    if best is None:
        clusters.append(SemanticCluster(label, (detection,), params.minpts))
        return SemanticMap(smap.station_id, tuple(clusters), smap.version + 1)
    merged = SemanticCluster(label, clusters[best].members + (detection,), params.minpts)
    clusters[best] = merged
    while merged.confirmed:
        loc = merged.location
        other = next(
            (k for k, c in enumerate(clusters)
             if c is not merged and c.label == label and c.confirmed
             and np.hypot(*(np.subtract(c.location, loc))) <= params.eps),
            None,
        )
        if other is None:
            break
        combined = SemanticCluster(label, merged.members + clusters[other].members, params.minpts)
        idx = clusters.index(merged)
        clusters[idx] = combined
        del clusters[other]
        merged = combined
    return SemanticMap(smap.station_id, tuple(clusters), smap.version + 1)


def build_map(station_id: str, detections: Iterable[SemanticDetection], config: MapperConfig = DEFAULT_MAPPER) -> SemanticMap:
    smap = SemanticMap(station_id)
    for d in detections:
        smap = update_map(smap, d, config)
    return smap


def batch_clusters(detections: Sequence[SemanticDetection], config: MapperConfig = DEFAULT_MAPPER) -> list[SemanticCluster]:
    """DBSCAN per map label; noise points are dropped."""
    by_label: dict[str, list[SemanticDetection]] = {}
    for d in detections:
        label = map_label(d.cls)
        if label is not None:
            by_label.setdefault(label, []).append(d)
    out = []
    for label in sorted(by_label):
        dets = by_label[label]
        params = config.params(label)
        groups, _ = dbscan([d.position for d in dets], params.eps, params.minpts)
        out.extend(SemanticCluster(label, tuple(dets[i] for i in g), params.minpts) for g in groups)
    return out


def group_waiting_lines(
    lines: Sequence[Sequence[float]],
    n_doors: int,
    origin: Sequence[float] = (0.0, 0.0),
    axis: Sequence[float] = (1.0, 0.0),
) -> tuple[list[tuple[int, tuple[tuple[float, float], ...]]], list[tuple[float, float]]]:
    """Consecutive runs of ``n_doors`` lines along the platform axis form car areas.

    Returns ``(car_areas, ungrouped)``; the first car is the one nearest the
    platform origin.
    """
    if n_doors < 1:
        raise ValueError("n_doors must be at least 1")
    a = np.asarray(axis, dtype=float)
    a = a / np.linalg.norm(a)
    pts = [(float(p[0]), float(p[1])) for p in lines]
    pts.sort(key=lambda p: (float(np.dot(np.subtract(p, origin), a)), p))
    n_cars = len(pts) // n_doors
    areas = [(k, tuple(pts[k * n_doors:(k + 1) * n_doors])) for k in range(n_cars)]
    return areas, pts[n_cars * n_doors:]


def to_annotated(smap: SemanticMap, config: MapperConfig = DEFAULT_MAPPER, platform_origin=(0.0, 0.0)) -> AnnotatedMap:
    semantics = []
    for c in smap.clusters:
        x, y = c.location
        semantics.append(MapSemantic(c.label, x, y, len(c.members)))
    lines = [c.location for c in smap.clusters if c.label == "waiting_line" and c.confirmed]
    areas, _ = group_waiting_lines(lines, config.doors_per_car, platform_origin)
    return AnnotatedMap(smap.station_id, tuple(semantics), tuple(areas))


# ---------------------------------------------------------------------------
# change detection


@dataclass(frozen=True)
class MapChange:
    label: str
    location: tuple[float, float]
    kind: str  # removed | relocated | added
    previous: tuple[float, float] | None = None
    window: int = 0


@dataclass
class _Tracked:
    label: str
    location: tuple[float, float]
    absent: int = 0
    present: int = 0
    since: int = 0


def _window_semantics(dets, config) -> list[tuple[str, tuple[float, float]]]:
    return [(c.label, c.location) for c in batch_clusters(dets, config) if c.confirmed]


def detect_changes(
    windows: Sequence[Sequence[SemanticDetection]], config: MapperConfig = DEFAULT_MAPPER
) -> list[MapChange]:
    """Compare windowed re-clusterings against the semantics seen so far.

    A known semantic with no confirmed same-label cluster within eps for
    ``change_windows`` consecutive live windows is removed; a new confirmed
    cluster persisting that long is added.  Windows with fewer than
    ``change_min_detections`` mapped detections are skipped.  Removals and
    additions of one label are paired into relocations.
    """
    if len(windows) < 2:
        raise ValueError("change detection needs at least two windows")
    k_needed = config.change_windows
    known: list[_Tracked] = []
    pending: list[_Tracked] = []
    removed: list[_Tracked] = []
    added: list[_Tracked] = []
    started = False
    for w, dets in enumerate(windows):
        mapped = [d for d in dets if map_label(d.cls) is not None]
        if len(mapped) < config.change_min_detections:
            continue
        found = _window_semantics(mapped, config)
        if not started:
            known = [_Tracked(lbl, loc) for lbl, loc in found]
            started = True
            continue
        used = [False] * len(found)

        def match(label, loc):
            eps = config.params(label).eps
            for k, (lbl, other) in enumerate(found):
                if lbl == label and np.hypot(*np.subtract(other, loc)) <= eps:
                    used[k] = True
                    return other
            return None

        for s in list(known):
            if match(s.label, s.location) is None:
                s.absent += 1
                if s.absent >= k_needed:
                    s.since = w
                    removed.append(s)
                    known.remove(s)
            else:
                s.absent = 0
        for s in list(pending):
            loc = match(s.label, s.location)
            if loc is None:
                pending.remove(s)
                continue
            s.present += 1
            if s.present >= k_needed:
                pending.remove(s)
                added.append(s)
                known.append(_Tracked(s.label, s.location))
        for k, (lbl, loc) in enumerate(found):
            if not used[k]:
                pending.append(_Tracked(lbl, loc, present=1, since=w))
                if k_needed <= 1:
                    pending.pop()
                    added.append(_Tracked(lbl, loc, since=w))
                    known.append(_Tracked(lbl, loc))
    changes = []
    free = list(added)
    for r in removed:
        candidates = [a for a in free if a.label == r.label]
        if candidates:
            a = min(candidates, key=lambda a: np.hypot(*np.subtract(a.location, r.location)))
            free.remove(a)
            changes.append(MapChange(r.label, a.location, "relocated", r.location, max(r.since, a.since)))
        else:
            changes.append(MapChange(r.label, r.location, "removed", None, r.since))
    changes.extend(MapChange(a.label, a.location, "added", None, a.since) for a in free)
    return sorted(changes, key=lambda c: (c.kind, c.label, c.location))
