from __future__ import annotations

import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from riskocc import data_path  # noqa: E402
from riskocc.scenario import load_frames, load_map_prior  # noqa: E402


@pytest.fixture(scope="session")
def prior_path():
    return Path(data_path("intersection_dair.json"))


@pytest.fixture(scope="session")
def frames_path():
    return Path(data_path("overtake_merge.jsonl"))


@pytest.fixture(scope="session")
def scenario_path():
    return Path(data_path("quant_leftturn.jsonl"))


@pytest.fixture(scope="session")
def prior(prior_path):
    return load_map_prior(prior_path)


@pytest.fixture(scope="session")
def frames(frames_path, prior):
    return load_frames(frames_path, prior.origin)


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(mod.RESULTS):
        terminalreporter.write_line(mod.line(n))
