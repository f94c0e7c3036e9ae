"""Risk occupancy grids and risk-aware local path planning."""

from importlib import resources
from pathlib import Path

__version__ = "0.1.0"


def data_path(name: str) -> Path:
    """Path of a bundled fixture (``intersection_dair.json`` etc.)."""
    return Path(str(resources.files(__name__) / "data" / name))
