"""Per-point risk: ETA, the dynamic Risk-ETA curve, static risk and their
weighted accumulation at a sampling point."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

from .geometry import DirectedSegment, Point2, dist_point_point, dist_point_segment
from .scenario import ConfigError, DynamicObject, Frame, StaticFactor, Weights, default_weights

# Risk-ETA cubic, highest order first
RISK_ETA_COEFFS = (0.0667, -0.3, 0.0333, 1.0)
ETA_CUTOFF = 3.0
FAR_ETA_RISK = 0.5


@dataclass(frozen=True)
class RiskConfig:
    dynamic_radius: float = 2.0
    static_radius: float = 1.0
    horizon: float = 3.0
    speed_epsilon: float = 0.01
    clamp_dynamic: bool = True
    # "segment": gate on the current->future segment; "position": gate on the current position
    gating: str = "segment"
    weights: Weights = field(default_factory=default_weights)

    def __post_init__(self):
        if not (self.dynamic_radius > 0 and self.static_radius > 0):
            raise ConfigError("risk radii must be > 0")
        if not self.horizon > 0:
            raise ConfigError("horizon must be > 0")
        if not self.speed_epsilon > 0:
            raise ConfigError("speed_epsilon must be > 0")
        if self.gating not in ("segment", "position"):
            raise ConfigError(f"gating must be 'segment' or 'position', got {self.gating!r}")


def eta(distance: float, speed: float, cfg: RiskConfig) -> float:
    return distance / (speed + cfg.speed_epsilon)


def risk_eta_cubic(e: float) -> float:
    a, b, c, d = RISK_ETA_COEFFS
    return a * e**3 + b * e**2 + c * e + d


def dynamic_risk(eta_val: float, cfg: RiskConfig) -> float:
    if eta_val > ETA_CUTOFF:
        return FAR_ETA_RISK
    r = risk_eta_cubic(eta_val)
    if cfg.clamp_dynamic:
        r = min(1.0, max(0.0, r))
    return r


def static_risk(distance: float, factor: StaticFactor, cfg: RiskConfig) -> float:
    return factor.risk_value if distance <= cfg.static_radius else 0.0


def project_future(dyn: DynamicObject, horizon: float) -> DirectedSegment:
    """Constant speed and heading over ``horizon`` seconds."""
    if not horizon > 0:
        raise ValueError("horizon must be > 0")
    reach = dyn.speed * horizon
    x, y = dyn.position
    end = Point2(x + reach * math.cos(dyn.heading), y + reach * math.sin(dyn.heading))
    return DirectedSegment(dyn.position, end)


def static_distance(p: Point2, factor: StaticFactor) -> float:
    return min(dist_point_segment(p, seg) for seg in factor.segments())


def dynamic_contribution(p: Point2, dyn: DynamicObject, cfg: RiskConfig, seg: DirectedSegment | None = None) -> float:
    """Weighted risk of one participant at ``p`` (0 when outside the gate)."""
    if cfg.gating == "segment":
        seg = seg if seg is not None else project_future(dyn, cfg.horizon)
        gate = dist_point_segment(p, seg)
    else:
        gate = dist_point_point(p, dyn.position)
    if gate > cfg.dynamic_radius:
        return 0.0
    e = eta(dist_point_point(p, dyn.position), dyn.speed, cfg)
    return dynamic_risk(e, cfg) * cfg.weights.of(dyn.category)


def point_risk(
    p: Point2,
    frame: Frame,
    statics: Sequence[StaticFactor],
    cfg: RiskConfig,
    segments: Sequence[DirectedSegment] | None = None,
) -> float:
    """Accumulated weighted risk at ``p``: dynamics first, then statics.

    ``segments`` optionally supplies the pre-projected future segments,
    aligned with ``frame.dynamics``.
    """
    total = 0.0
    for i, dyn in enumerate(frame.dynamics):
        total += dynamic_contribution(p, dyn, cfg, None if segments is None else segments[i])
    for st in statics:
        if static_distance(p, st) <= cfg.static_radius:
            total += st.risk_value * st.weight
    return total
