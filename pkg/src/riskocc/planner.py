"""Local path planning over maneuver node sets.

The node set is a stack of rows ordered by station. From each node the
search may move one row forward, with the lateral step restricted by the
requested maneuver (column index grows leftward):

=========  ===============
maneuver   allowed col step
=========  ===============
left       0, +1, +2
straight   -1, 0, +1
right      0, -1, -2
=========  ===============

Two strategies are provided: ``local`` picks the cheapest successor row by
row, ``global`` runs a dynamic program over the layered graph and returns
the cheapest complete path.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Any, Sequence

import numpy as np
from scipy.interpolate import CubicSpline

from .geometry import Point2, dist_point_point
from .occupancy import RiskGrid
from .scenario import ConfigError, Maneuver, ManeuverNodeSet, Node

__all__ = [
    "ManeuverNodeSet",
    "Node",
    "PlannerConfig",
    "PlannedPath",
    "RawNode",
    "PlanningError",
    "StartUnreachableError",
    "DegenerateRequestError",
    "NodeLookupError",
    "MOVES",
    "collision_free",
    "node_set_from_samples",
    "successors",
    "score",
    "plan_local",
    "plan_global",
    "plan",
    "gaussian_filter_nodes",
    "smooth",
    "second_difference_energy",
]

MOVES: dict[Maneuver, tuple[int, ...]] = {
    Maneuver.LEFT: (0, 1, 2),
    Maneuver.STRAIGHT: (-1, 0, 1),
    Maneuver.RIGHT: (0, -1, -2),
}


class PlanningError(RuntimeError):
    code = "PLANNING_ERROR"


class StartUnreachableError(PlanningError):
    code = "START_UNREACHABLE"


class DegenerateRequestError(PlanningError):
    code = "DEGENERATE_REQUEST"


class NodeLookupError(PlanningError, LookupError):
    code = "NODE_LOOKUP"


@dataclass(frozen=True)
class PlannerConfig:
    risk_threshold: float = 0.4
    w_risk: float = 0.7
    w_dis: float = 0.3
    strategy: str = "local"
    kernel_size: int = 5
    sigma: float = 1.0
    resample_step: float = 0.5
    start_radius: float = 4.0
    # charged per row an exhausted path fails to reach
    unreached_row_cost: float = 10.0

    def __post_init__(self):
        if not self.risk_threshold > 0:
            raise ConfigError("risk_threshold must be > 0")
        if self.w_risk < 0 or self.w_dis < 0 or (self.w_risk == 0 and self.w_dis == 0):
            raise ConfigError("w_risk and w_dis must be >= 0 and not both zero")
        if self.strategy not in ("local", "global"):
            raise ConfigError(f"strategy must be 'local' or 'global', got {self.strategy!r}")
        if self.kernel_size < 1 or self.kernel_size % 2 == 0:
            raise ConfigError("kernel_size must be an odd integer >= 1")
        if not self.sigma > 0 or not self.resample_step > 0:
            raise ConfigError("sigma and resample_step must be > 0")


@dataclass(frozen=True)
class RawNode:
    row: int
    col: int
    position: Point2
    risk: float


@dataclass(frozen=True)
class PlannedPath:
    raw_nodes: tuple[RawNode, ...]
    smoothed: tuple[Point2, ...]
    status: str  # "reached" | "exhausted"
    total_cost: float

    def to_dict(self) -> dict[str, Any]:
        return {
            "status": self.status,
            "raw": [
                {"row": n.row, "col": n.col, "x": n.position.x, "y": n.position.y, "risk": n.risk}
                for n in self.raw_nodes
            ],
            "smoothed": [[p.x, p.y] for p in self.smoothed],
            "total_cost": self.total_cost,
        }


def collision_free(nodes: ManeuverNodeSet, grid: RiskGrid, threshold: float, tol: float | None = None) -> ManeuverNodeSet:
    """Keep the nodes whose grid risk is below ``threshold``; every kept node
    carries its risk. Rows keep their index even when emptied."""
    tol = grid.resolution / 2.0 if tol is None else tol
    flat = list(nodes.nodes())
    risks = grid.lookup_many([n.position for _, n in flat], tol)
    rows: list[list[Node]] = [[] for _ in nodes.rows]
    for (r, n), risk in zip(flat, risks):
        if np.isnan(risk):
            raise NodeLookupError(
                f"node row {r} col {n.col} at ({n.position.x:.3f}, {n.position.y:.3f}) has no grid sample within {tol:.3f} m"
            )
        if risk < threshold:
            rows[r].append(replace(n, risk=float(risk)))
    rows = [tuple(row) for row in rows]
    return ManeuverNodeSet(nodes.maneuver, tuple(rows), nodes.dest)


def node_set_from_samples(samples: Sequence, maneuver: Maneuver, dest: Point2 | None = None) -> ManeuverNodeSet:
    """Treat a whole sample layout as one node set (rows by sample row)."""
    by_row: dict[int, list[Node]] = {}
    for s in samples:
        by_row.setdefault(s.row, []).append(Node(s.col, s.position))
    rows = tuple(tuple(sorted(by_row[r], key=lambda n: n.col)) for r in sorted(by_row))
    return ManeuverNodeSet(maneuver, rows, dest)


def successors(node: tuple[int, int], maneuver: Maneuver, free_set: ManeuverNodeSet) -> list[tuple[int, Node]]:
    row, col = node
    if row + 1 >= len(free_set.rows):
        return []
    allowed = {col + dc for dc in MOVES[maneuver]}
    return [(row + 1, n) for n in free_set.rows[row + 1] if n.col in allowed]


def score(sample: Point2, risk: float, icv: Point2, dest: Point2, cfg: PlannerConfig) -> float:
    base = dist_point_point(icv, dest)
    if base == 0.0:
        raise DegenerateRequestError("ICV position coincides with the destination")
    return cfg.w_risk * risk + cfg.w_dis * dist_point_point(sample, dest) / base


def _risk(n: Node) -> float:
    return 0.0 if n.risk is None else n.risk


def _start(free_set: ManeuverNodeSet, icv: Point2, cfg: PlannerConfig) -> tuple[int, Node]:
    best = None
    for r, n in free_set.nodes():
        d = dist_point_point(n.position, icv)
        key = (d, r, n.col)
        if d <= cfg.start_radius and (best is None or key < best[0]):
            best = (key, r, n)
    if best is None:
        raise StartUnreachableError(
            f"no collision-free node within {cfg.start_radius} m of ICV at ({icv[0]:.3f}, {icv[1]:.3f})"
        )
    return best[1], best[2]


def _dest_point(free_set: ManeuverNodeSet, dest: Point2 | None) -> Point2:
    """Free node in the final row nearest the requested destination, falling
    back to the requested point itself."""
    last = free_set.rows[-1]
    if dest is None:
        dest = free_set.dest
    if dest is None:
        if not last:
            raise DegenerateRequestError("no destination given and the final row is empty")
        xs = [n.position.x for n in last]
        ys = [n.position.y for n in last]
        dest = Point2(sum(xs) / len(xs), sum(ys) / len(ys))
    if last:
        return min(last, key=lambda n: (dist_point_point(n.position, dest), n.col)).position
    return Point2(*dest)


def _build(free_set, path, status, costs, cfg) -> PlannedPath:
    raw = tuple(RawNode(r, n.col, n.position, _risk(n)) for r, n in path)
    shortfall = len(free_set.rows) - 1 - path[-1][0]
    total = 0.0
    for c in costs:
        total += c
    total += shortfall * cfg.unreached_row_cost
    return PlannedPath(raw, tuple(smooth(raw, cfg)), status, total)


def plan_local(free_set: ManeuverNodeSet, icv: Point2, dest: Point2 | None, maneuver: Maneuver, cfg: PlannerConfig) -> PlannedPath:
    """Greedy: take the cheapest successor in each batch.

    Ties go to the smaller lateral step, then to the smaller column.
    """
    icv = Point2(*icv)
    goal = _dest_point(free_set, dest)
    r, n = _start(free_set, icv, cfg)
    path = [(r, n)]
    costs: list[float] = []
    last = len(free_set.rows) - 1
    while r < last:
        cands = successors((r, n.col), maneuver, free_set)
        if not cands:
            break
        scored = [(score(m.position, _risk(m), icv, goal, cfg), abs(m.col - n.col), m.col, rr, m) for rr, m in cands]
        s, _, _, r, n = min(scored, key=lambda t: t[:3])
        path.append((r, n))
        costs.append(s)
    return _build(free_set, path, "reached" if r == last else "exhausted", costs, cfg)


def plan_global(free_set: ManeuverNodeSet, icv: Point2, dest: Point2 | None, maneuver: Maneuver, cfg: PlannerConfig) -> PlannedPath:
    """Minimum total score over all rule-respecting paths from the start.

    Paths run until the final row or until no successor remains; a path
    that stops early is charged ``unreached_row_cost`` per missing row.
    Cost-to-go is computed backwards row by row, then the path is read off
    forwards with the same tie-break as :func:`plan_local`.
    """
    icv = Point2(*icv)
    goal = _dest_point(free_set, dest)
    r0, n0 = _start(free_set, icv, cfg)
    last = len(free_set.rows) - 1
    node_score = {}
    for r in range(r0 + 1, last + 1):
        for m in free_set.rows[r]:
            node_score[(r, m.col)] = score(m.position, _risk(m), icv, goal, cfg)
    togo: dict[tuple[int, int], float] = {}
    for r in range(last, r0 - 1, -1):
        for m in free_set.rows[r]:
            cands = successors((r, m.col), maneuver, free_set)
            if not cands:
                togo[(r, m.col)] = (last - r) * cfg.unreached_row_cost
            else:
                togo[(r, m.col)] = min(node_score[(rr, c.col)] + togo[(rr, c.col)] for rr, c in cands)
    path = [(r0, n0)]
    costs = []
    r, n = r0, n0
    while True:
        cands = successors((r, n.col), maneuver, free_set)
        if not cands:
            break
        keyed = [
            (node_score[(rr, m.col)] + togo[(rr, m.col)], abs(m.col - n.col), m.col, rr, m)
            for rr, m in cands
        ]
        _, _, _, r, n = min(keyed, key=lambda t: t[:3])
        path.append((r, n))
        costs.append(node_score[(r, n.col)])
    return _build(free_set, path, "reached" if r == last else "exhausted", costs, cfg)


def plan(free_set: ManeuverNodeSet, icv: Point2, dest: Point2 | None, maneuver: Maneuver, cfg: PlannerConfig) -> PlannedPath:
    fn = plan_global if cfg.strategy == "global" else plan_local
    return fn(free_set, icv, dest, maneuver, cfg)


def gaussian_filter_nodes(points: Sequence[Point2], kernel_size: int, sigma: float) -> np.ndarray:
    """Gaussian-weighted average over index neighbourhoods.

    The kernel is truncated at the path ends and renormalised; the first
    and last nodes are pinned.
    """
    pts = np.asarray(points, dtype=float).reshape(-1, 2)
    n = len(pts)
    out = pts.copy()
    half = kernel_size // 2
    for i in range(1, n - 1):
        lo, hi = max(0, i - half), min(n, i + half + 1)
        off = np.arange(lo, hi) - i
        w = np.exp(-(off**2) / (2.0 * sigma**2))
        out[i] = (w[:, None] * pts[lo:hi]).sum(axis=0) / w.sum()
    return out


def _resample(pts: np.ndarray, step: float) -> np.ndarray:
    keep = [0]
    for i in range(1, len(pts)):
        if np.hypot(*(pts[i] - pts[keep[-1]])) > 1e-12:
            keep.append(i)
    pts = pts[keep]
    if len(pts) == 1:
        return pts
    u = np.concatenate([[0.0], np.cumsum(np.hypot(*np.diff(pts, axis=0).T))])
    length = u[-1]
    n = int(math.floor(length / step + 1e-9))
    us = np.arange(n + 1) * step
    if length - us[-1] > 1e-9:
        us = np.append(us, length)
    else:
        us[-1] = length
    if len(pts) == 2:
        frac = (us / length)[:, None]
        out = pts[0] + frac * (pts[1] - pts[0])
    else:
        out = CubicSpline(u, pts, bc_type="natural")(us)
    out[0] = pts[0]
    out[-1] = pts[-1]
    return out


def smooth(path: Sequence, cfg: PlannerConfig) -> list[Point2]:
    """Gaussian-filter the raw nodes, then resample by arc length through a
    natural cubic spline at ``cfg.resample_step`` spacing."""
    pts = [p.position if isinstance(p, RawNode) else p for p in path]
    if len(pts) < 2:
        return [Point2(*p) for p in pts]
    filtered = gaussian_filter_nodes(pts, cfg.kernel_size, cfg.sigma)
    return [Point2(float(x), float(y)) for x, y in _resample(filtered, cfg.resample_step)]


def second_difference_energy(points: Sequence[Point2]) -> float:
    pts = np.asarray(points, dtype=float).reshape(-1, 2)
    if len(pts) < 3:
        return 0.0
    dd = pts[2:] - 2.0 * pts[1:-1] + pts[:-2]
    return float((dd**2).sum())
