"""Raster and figure output for risk grids and plans.

Colour rasters use a five-stop linear colormap over the normalised risk
level ``t = level / 255``:

=====  ==========  ===============
t      colour      RGB
=====  ==========  ===============
0.00   dark blue   (0, 0, 139)
0.25   blue        (0, 0, 255)
0.50   yellow      (255, 255, 0)
0.75   orange      (255, 165, 0)
1.00   dark red    (139, 0, 0)
=====  ==========  ===============

Channels are interpolated linearly between stops and rounded half-up, so
renders are bit-reproducible. Planned paths are drawn as 3x3 squares of
pure yellow centred in each node's cell.
"""

from __future__ import annotations

import math
from pathlib import Path
from typing import Sequence

import numpy as np

from .occupancy import RiskGrid, normalize_risks

COLOR_STOPS = (
    (0.00, (0, 0, 139)),
    (0.25, (0, 0, 255)),
    (0.50, (255, 255, 0)),
    (0.75, (255, 165, 0)),
    (1.00, (139, 0, 0)),
)
PATH_COLOR = (255, 255, 0)
DEFAULT_CELL = 5


def _build_lut() -> np.ndarray:
    lut = np.zeros((256, 3), dtype=np.uint8)
    for level in range(256):
        t = level / 255.0
        for (t0, c0), (t1, c1) in zip(COLOR_STOPS, COLOR_STOPS[1:]):
            if t0 <= t <= t1:
                f = (t - t0) / (t1 - t0)
                lut[level] = [int(np.floor(a + (b - a) * f + 0.5)) for a, b in zip(c0, c1)]
                break
    return lut


COLOR_LUT = _build_lut()


def colorize(levels: np.ndarray) -> np.ndarray:
    return COLOR_LUT[np.asarray(levels, dtype=np.uint8)]


def _ppm(rgb: np.ndarray) -> bytes:
    h, w, _ = rgb.shape
    return f"P6\n{w} {h}\n255\n".encode("ascii") + np.ascontiguousarray(rgb, dtype=np.uint8).tobytes()


def grid_rgb(grid: RiskGrid, scale: str = "minmax", cell: int = 1) -> np.ndarray:
    _, _, index = grid.raster()
    rgb = colorize(normalize_risks(grid.risks, scale)[index])
    if cell > 1:
        rgb = np.repeat(np.repeat(rgb, cell, axis=0), cell, axis=1)
    return rgb


def export_ppm(grid: RiskGrid, scale: str = "minmax") -> bytes:
    """One pixel per sample, same raster layout as the PGM export."""
    return _ppm(grid_rgb(grid, scale))


def export_overlay(grid: RiskGrid, path_points: Sequence, scale: str = "minmax", cell: int = DEFAULT_CELL) -> bytes:
    """Colour raster upscaled to ``cell`` pixels per sample with each path
    node (snapped to its nearest sample) drawn as a yellow 3x3 square."""
    if cell < 3:
        raise ValueError("overlay cell size must be >= 3")
    rows, cols, index = grid.raster()
    rgb = grid_rgb(grid, scale, cell)
    where = {int(k): (i, j) for (i, j), k in np.ndenumerate(index)}
    pos = grid.positions()
    mid = cell // 2
    for p in path_points:
        k = int(np.argmin(np.hypot(pos[:, 0] - p[0], pos[:, 1] - p[1])))
        i, j = where[k]
        ci, cj = i * cell + mid, j * cell + mid
        rgb[ci - 1 : ci + 2, cj - 1 : cj + 2] = PATH_COLOR
    return _ppm(rgb)


# -- matplotlib figures -------------------------------------------------------


def _mpl():
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt
    from matplotlib.colors import LinearSegmentedColormap

    cmap = LinearSegmentedColormap.from_list(
        "risk", [(t, tuple(v / 255.0 for v in c)) for t, c in COLOR_STOPS]
    )
    return plt, cmap


def _save(fig, out: Path) -> None:
    fig.savefig(out, dpi=120, metadata={"Software": None})


def plot_risk_map(grid: RiskGrid, out: str | Path, path=None, title: str | None = None) -> Path:
    """Bird's-eye scatter of sample risks, optionally with a planned path."""
    plt, cmap = _mpl()
    out = Path(out)
    pos = grid.positions()
    fig, ax = plt.subplots(figsize=(8, 5))
    sc = ax.scatter(pos[:, 0], pos[:, 1], c=grid.risks, cmap=cmap, s=18, marker="s", vmin=0.0,
                    vmax=max(float(grid.risks.max()) if len(grid) else 0.0, 1e-9))
    fig.colorbar(sc, ax=ax, label="accumulated risk")
    if path is not None:
        raw = np.array([n.position for n in path.raw_nodes]).reshape(-1, 2)
        sm = np.array(path.smoothed).reshape(-1, 2)
        ax.plot(raw[:, 0], raw[:, 1], "o", color="yellow", ms=4, mec="k", mew=0.5, label="raw nodes")
        ax.plot(sm[:, 0], sm[:, 1], "-", color="yellow", lw=2, label=f"smoothed ({path.status})")
        ax.legend(loc="upper left", fontsize=8)
    ax.set_aspect("equal")
    ax.set_xlabel("x [m]")
    ax.set_ylabel("y [m]")
    ax.set_title(title or f"risk occupancy, t = {grid.timestamp:g} s")
    fig.tight_layout()
    _save(fig, out)
    plt.close(fig)
    return out


def plot_braking_study(study, scenario, out: str | Path) -> Path:
    """Two panels: scene with both ICV tracks and the hazard's footprint, and
    the per-scheme safe speed / deceleration bars."""
    plt, _ = _mpl()
    out = Path(out)
    fig, (ax0, ax1) = plt.subplots(1, 2, figsize=(11, 4.2), gridspec_kw={"width_ratios": [1.6, 1]})
    lane = np.array(scenario.lane_track.points)
    ax0.plot(lane[:, 0], lane[:, 1], "-", color="0.4", lw=1.5, label="lane track")
    if study.planned_track is not None:
        pl = np.array(study.planned_track.points)
        ax0.plot(pl[:, 0], pl[:, 1], "-", color="tab:red", lw=1.5, label="planned path")
    for o in scenario.frames[0].dynamics:
        mk = "^" if o.id == scenario.hazard_id else "s"
        ax0.plot(o.position.x, o.position.y, mk, color="k", ms=6)
        ax0.annotate(o.id, o.position, textcoords="offset points", xytext=(3, 3), fontsize=7)
    ax0.plot(*scenario.icv_start, "o", color="white", mec="k", ms=7, label="ICV")
    ax0.set_aspect("equal")
    ax0.set_xlabel("x [m]")
    ax0.set_ylabel("y [m]")
    ax0.legend(fontsize=7, loc="lower right")
    names = ["baseline", "occupancy", "occ.+plan"]
    # non-finite values (no conflict / unavoidable) are left out of the bars
    speeds = [r.max_safe_speed if math.isfinite(r.max_safe_speed) else np.nan for r in study.results]
    decels = [r.avg_decel if math.isfinite(r.avg_decel) else np.nan for r in study.results]
    xs = np.arange(3)
    ax1.bar(xs - 0.2, speeds, width=0.4, color="tab:blue", label="max safe speed [m/s]")
    ax2 = ax1.twinx()
    ax2.bar(xs + 0.2, decels, width=0.4, color="tab:orange", label=f"avg decel @ {study.v0:g} m/s [m/s^2]")
    ax1.set_xticks(xs)
    ax1.set_xticklabels(names)
    ax1.set_ylabel("max safe speed [m/s]")
    ax2.set_ylabel("average deceleration [m/s$^2$]")
    fig.legend(loc="upper right", fontsize=7)
    fig.tight_layout()
    _save(fig, out)
    plt.close(fig)
    return out
