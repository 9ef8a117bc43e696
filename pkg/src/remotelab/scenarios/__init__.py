"""Bundled scenario scripts."""

from pathlib import Path

SCENARIO_DIR = Path(__file__).parent


def scenario_path(name: str) -> Path:
    return SCENARIO_DIR / f"{name}.yaml"
