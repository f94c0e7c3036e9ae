"""Sampling-point layout and the risk occupancy grid.

Samples are laid out in Frenet coordinates along a centerline (rows by
station, columns by lateral offset, column index growing leftward) and
carry the accumulated risk of every nearby participant and static factor.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .geometry import Centerline, FrenetCoord, Point2, dist_points_segments
from .risk_model import (
    ETA_CUTOFF,
    FAR_ETA_RISK,
    RISK_ETA_COEFFS,
    RiskConfig,
    project_future,
)
from .scenario import Frame, MapPrior, StaticFactor, ValidationError

__all__ = [
    "SamplePoint",
    "RiskGrid",
    "RasterError",
    "layout_samples",
    "samples_for_prior",
    "project_future",
    "compute_map",
    "export_grid",
    "normalize_risks",
]

FIXED_SCALE_MAX = 2.0


class RasterError(ValueError):
    """The grid's samples do not form a complete rows x cols raster."""


@dataclass(frozen=True)
class SamplePoint:
    row: int
    col: int
    position: Point2
    frenet: FrenetCoord | None = None


@dataclass(frozen=True, eq=False)
class RiskGrid:
    timestamp: float
    resolution: float
    samples: tuple[SamplePoint, ...]
    risks: np.ndarray
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        risks = np.asarray(self.risks, dtype=float)
        if risks.shape != (len(self.samples),):
            raise ValueError("risks must align with samples")
        if not (np.all(np.isfinite(risks)) and np.all(risks >= 0.0)):
            raise ValueError("risks must be finite and >= 0")
        risks.setflags(write=False)
        object.__setattr__(self, "risks", risks)

    def __len__(self) -> int:
        return len(self.samples)

    def positions(self) -> np.ndarray:
        if "pos" not in self._cache:
            pos = np.array([s.position for s in self.samples], dtype=float).reshape(-1, 2)
            pos.setflags(write=False)
            self._cache["pos"] = pos
        return self._cache["pos"]

    def _tree(self):
        if "tree" not in self._cache:
            from scipy.spatial import cKDTree

            self._cache["tree"] = cKDTree(self.positions()) if len(self.samples) else None
        return self._cache["tree"]

    def lookup(self, p: Point2, tol: float) -> float | None:
        """Risk at ``p``: exact match, else nearest sample within ``tol``."""
        r = self.lookup_many([p], tol)[0]
        return None if np.isnan(r) else float(r)

    def lookup_many(self, points, tol: float) -> np.ndarray:
        """Vectorised :meth:`lookup`; misses are NaN."""
        pts = np.asarray(points, dtype=float).reshape(-1, 2)
        out = np.full(len(pts), np.nan)
        tree = self._tree()
        if tree is None or not len(pts):
            return out
        dist, idx = tree.query(pts)
        hit = dist <= tol
        out[hit] = self.risks[idx[hit]]
        return out

    def window(self, center: Point2, radius: float) -> list[int]:
        """Indices of samples within ``radius`` of ``center``, in grid order."""
        if not len(self.samples):
            return []
        pos = self.positions()
        d = np.hypot(pos[:, 0] - center[0], pos[:, 1] - center[1])
        return [int(i) for i in np.nonzero(d <= radius)[0]]

    def raster(self) -> tuple[list[int], list[int], np.ndarray]:
        """Return ``(rows, cols, index)`` where ``index[i, j]`` is the sample
        index at ``(rows[i], cols[j])``. Raises :class:`RasterError` when
        any cell is missing or doubly occupied."""
        rows = sorted({s.row for s in self.samples})
        cols = sorted({s.col for s in self.samples})
        if len(rows) * len(cols) != len(self.samples) or not self.samples:
            raise RasterError(f"{len(self.samples)} samples do not fill a {len(rows)}x{len(cols)} raster")
        rpos = {r: i for i, r in enumerate(rows)}
        cpos = {c: j for j, c in enumerate(cols)}
        index = np.full((len(rows), len(cols)), -1, dtype=int)
        for k, s in enumerate(self.samples):
            i, j = rpos[s.row], cpos[s.col]
            if index[i, j] != -1:
                raise RasterError(f"duplicate sample at row {s.row}, col {s.col}")
            index[i, j] = k
        return rows, cols, index


def layout_samples(cl: Centerline, road_half_width: float, resolution: float) -> list[SamplePoint]:
    if not resolution > 0:
        raise ValueError("resolution must be > 0")
    if not road_half_width > 0:
        raise ValueError("road_half_width must be > 0")
    if not isinstance(cl, Centerline):
        raise ValueError("degenerate centerline")
    # tolerance absorbs round-off from geodetic round trips
    n_rows = math.floor(cl.length / resolution + 1e-6) + 1
    half = math.floor(road_half_width / resolution + 1e-6)
    out = []
    for i in range(n_rows):
        s = min(i * resolution, cl.length)
        for j in range(-half, half + 1):
            d = j * resolution
            out.append(SamplePoint(i, j + half, cl.to_cartesian(s, d), FrenetCoord(s, d)))
    return out


def samples_for_prior(prior: MapPrior) -> list[SamplePoint]:
    """Sample set for a map prior: the sampling layout when one is declared,
    otherwise the maneuver node sets themselves."""
    if prior.sampling is not None:
        sp = prior.sampling
        return layout_samples(prior.centerlines[sp.centerline], sp.half_width, sp.resolution)
    seen: dict[tuple[float, float], int] = {}
    cells: dict[tuple[int, int], Point2] = {}
    out = []
    for ns in prior.maneuver_sets.values():
        for r, node in ns.nodes():
            key = (node.position.x, node.position.y)
            if key in seen:
                continue
            if (r, node.col) in cells:
                raise ValidationError(
                    f"maneuver sets overlap at row {r}, col {node.col}; declare a 'sampling' section"
                )
            cells[(r, node.col)] = node.position
            seen[key] = len(out)
            out.append(SamplePoint(r, node.col, node.position))
    return out


def _static_arrays(statics: Sequence[StaticFactor]):
    starts, ends, owner = [], [], []
    for k, st in enumerate(statics):
        for seg in st.segments():
            starts.append(seg.start)
            ends.append(seg.end)
            owner.append(k)
    return (
        np.array(starts, dtype=float).reshape(-1, 2),
        np.array(ends, dtype=float).reshape(-1, 2),
        np.array(owner, dtype=int),
    )


def _risk_chunk(pts: np.ndarray, dyn: dict, sta: dict, cfg: RiskConfig) -> np.ndarray:
    total = np.zeros(len(pts))
    if dyn["n"]:
        if cfg.gating == "segment":
            gate = dist_points_segments(pts, dyn["starts"], dyn["ends"])
        else:
            gate = dist_points_segments(pts, dyn["starts"], dyn["starts"])
        dpos = np.hypot(pts[:, 0:1] - dyn["starts"][None, :, 0], pts[:, 1:2] - dyn["starts"][None, :, 1])
        e = dpos / (dyn["speeds"][None, :] + cfg.speed_epsilon)
        a, b, c, d = RISK_ETA_COEFFS
        cubic = a * e**3 + b * e**2 + c * e + d
        if cfg.clamp_dynamic:
            cubic = np.clip(cubic, 0.0, 1.0)
        r = np.where(e > ETA_CUTOFF, FAR_ETA_RISK, cubic) * dyn["weights"][None, :]
        r = np.where(gate <= cfg.dynamic_radius, r, 0.0)
        # column-by-column keeps the same summation order as point_risk
        for j in range(dyn["n"]):
            total += r[:, j]
    if sta["n"]:
        d_seg = dist_points_segments(pts, sta["starts"], sta["ends"])
        for k in range(sta["n"]):
            dk = d_seg[:, sta["owner"] == k].min(axis=1)
            total += np.where(dk <= cfg.static_radius, sta["values"][k], 0.0)
    return total


def compute_map(
    samples: Sequence[SamplePoint],
    frame: Frame,
    statics: Sequence[StaticFactor],
    cfg: RiskConfig,
    resolution: float = 1.9,
    workers: int = 1,
    chunk_size: int = 2048,
) -> RiskGrid:
    """Risk at every sample for one frame.

    Future segments are projected once per frame. With ``workers > 1`` the
    samples are split into chunks evaluated in parallel; the result does not
    depend on the split.
    """
    pts = np.array([s.position for s in samples], dtype=float).reshape(-1, 2)
    segs = [project_future(o, cfg.horizon) for o in frame.dynamics]
    dyn = {
        "n": len(segs),
        "starts": np.array([s.start for s in segs], dtype=float).reshape(-1, 2),
        "ends": np.array([s.end for s in segs], dtype=float).reshape(-1, 2),
        "speeds": np.array([o.speed for o in frame.dynamics], dtype=float),
        "weights": np.array([cfg.weights.of(o.category) for o in frame.dynamics], dtype=float),
    }
    starts, ends, owner = _static_arrays(statics)
    sta = {
        "n": len(statics),
        "starts": starts,
        "ends": ends,
        "owner": owner,
        "values": [st.risk_value * st.weight for st in statics],
    }
    bounds = list(range(0, len(pts), chunk_size)) or [0]
    chunks = [pts[i : i + chunk_size] for i in bounds]
    if workers > 1 and len(chunks) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(lambda c: _risk_chunk(c, dyn, sta, cfg), chunks))
    else:
        parts = [_risk_chunk(c, dyn, sta, cfg) for c in chunks]
    risks = np.concatenate(parts) if parts else np.zeros(0)
    return RiskGrid(frame.timestamp, resolution, tuple(samples), risks)


def normalize_risks(risks: np.ndarray, scale: str = "minmax") -> np.ndarray:
    """Map risks to integer levels 0..255 with round-half-up.

    ``minmax`` divides by the grid maximum (risks are >= 0, so zero risk is
    always level 0); ``fixed`` maps [0, 2] linearly and saturates above.
    """
    risks = np.asarray(risks, dtype=float)
    if scale == "minmax":
        top = float(risks.max()) if risks.size else 0.0
        if top <= 0.0:
            return np.zeros(risks.shape, dtype=np.uint8)
        frac = risks / top
    elif scale == "fixed":
        frac = np.clip(risks / FIXED_SCALE_MAX, 0.0, 1.0)
    else:
        raise ValueError(f"unknown scale {scale!r}")
    return np.floor(frac * 255.0 + 0.5).astype(np.uint8)


def export_grid(grid: RiskGrid, fmt: str, scale: str = "minmax") -> bytes:
    if fmt == "csv":
        lines = ["row,col,x,y,risk"]
        for s, r in zip(grid.samples, grid.risks):
            lines.append(f"{s.row},{s.col},{s.position.x:.6f},{s.position.y:.6f},{r:.6f}")
        return ("\n".join(lines) + "\n").encode("ascii")
    if fmt == "pgm":
        rows, cols, index = grid.raster()
        levels = normalize_risks(grid.risks, scale)[index]
        header = f"P5\n{len(cols)} {len(rows)}\n255\n".encode("ascii")
        return header + levels.tobytes()
    raise ValueError(f"unknown export format {fmt!r}")
