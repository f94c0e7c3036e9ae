import json

import numpy as np
import pytest

from riskocc.braking import load_braking_scenario, run_study
from riskocc.config import Settings, load_settings, settings_from_mapping
from riskocc.geometry import Point2
from riskocc.occupancy import RiskGrid, SamplePoint
from riskocc.render import (
    COLOR_LUT,
    COLOR_STOPS,
    export_overlay,
    export_ppm,
    plot_braking_study,
    plot_risk_map,
)
from riskocc.scenario import ConfigError, ParticipantCategory as P


def lerp_colour(t):
    # independent piecewise-linear evaluation of the documented table
    stops = [(0.0, (0, 0, 139)), (0.25, (0, 0, 255)), (0.5, (255, 255, 0)), (0.75, (255, 165, 0)), (1.0, (139, 0, 0))]
    for (t0, c0), (t1, c1) in zip(stops, stops[1:]):
        if t <= t1:
            f = (t - t0) / (t1 - t0)
            return tuple(int(a + (b - a) * f + 0.5) for a, b in zip(c0, c1))


def test_colormap_table():
    assert [c for _, c in COLOR_STOPS] == [(0, 0, 139), (0, 0, 255), (255, 255, 0), (255, 165, 0), (139, 0, 0)]
    for level in range(256):
        assert tuple(COLOR_LUT[level]) == lerp_colour(level / 255)
    assert tuple(COLOR_LUT[0]) == (0, 0, 139) and tuple(COLOR_LUT[255]) == (139, 0, 0)


def grid():
    s = tuple(SamplePoint(r, c, Point2(r * 1.9, c * 1.9)) for r in range(3) for c in range(2))
    return RiskGrid(0.0, 1.9, s, np.array([0, 0.5, 1, 0, 0, 0.25]))


def test_ppm_layout():
    data = export_ppm(grid())
    header = b"P6\n2 3\n255\n"
    assert data.startswith(header)
    px = np.frombuffer(data[len(header):], dtype=np.uint8).reshape(3, 2, 3)
    assert tuple(px[0, 0]) == (0, 0, 139) and tuple(px[1, 0]) == (139, 0, 0)
    assert tuple(px[0, 1]) == tuple(COLOR_LUT[128])


def test_overlay_draws_yellow_squares():
    data = export_overlay(grid(), [Point2(1.9, 1.9)], cell=5)
    header = b"P6\n10 15\n255\n"
    img = np.frombuffer(data[len(header):], dtype=np.uint8).reshape(15, 10, 3)
    block = img[6:9, 6:9]
    assert (block == (255, 255, 0)).all()
    assert tuple(img[5, 5]) == tuple(COLOR_LUT[0])
    assert int((img == (255, 255, 0)).all(axis=2).sum()) == 9


def test_png_figures(tmp_path, scenario_path):
    out = plot_risk_map(grid(), tmp_path / "g.png")
    assert out.read_bytes()[:8] == b"\x89PNG\r\n\x1a\n"
    sc = load_braking_scenario(scenario_path)
    out = plot_braking_study(run_study(sc), sc, tmp_path / "b.png")
    assert out.stat().st_size > 1000


def test_default_settings():
    assert load_settings(None) == Settings()


def test_toml_and_json_settings(tmp_path):
    p = tmp_path / "c.toml"
    p.write_text('[planner]\nstrategy = "global"\nrisk_threshold = 0.3\n[weights]\npedestrian = 1.5\n[braking]\nv0 = 9.0\n')
    s = load_settings(p)
    assert s.planner.strategy == "global" and s.planner.risk_threshold == 0.3
    assert s.risk.weights.of(P.PEDESTRIAN) == 1.5 and s.braking.v0 == 9.0
    q = tmp_path / "c.json"
    q.write_text(json.dumps({"risk": {"dynamic_radius": 2.5}}))
    assert load_settings(q).risk.dynamic_radius == 2.5


@pytest.mark.parametrize(
    "doc",
    [{"planner": {"speed": 1}}, {"colour": {}}, {"weights": {"small_vehicle": 2.0}}, {"risk": {"horizon": 0}}],
)
def test_bad_settings(doc):
    with pytest.raises(ConfigError):
        settings_from_mapping(doc)


def test_config_error_names_file(tmp_path):
    p = tmp_path / "bad.toml"
    p.write_text("[planner\n")
    with pytest.raises(ConfigError, match="bad.toml"):
        load_settings(p)
