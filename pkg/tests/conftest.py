"""Shared fixtures: shipped-config loading and a session-wide run cache.

Simulation points are deterministic in (config, variant, load, seed), so any
test may reuse a point another test already ran.
"""

import json
import pathlib

import pytest

from racksim.config import ExperimentConfig
from racksim.runner import RackRun, run_point

ROOT = pathlib.Path(__file__).resolve().parent.parent
CONFIG_DIR = ROOT / "configs"


def load_raw(name: str) -> dict:
    return json.loads((CONFIG_DIR / f"{name}.json").read_text())


def load_config(name: str) -> ExperimentConfig:
    return ExperimentConfig.from_dict(load_raw(name))


@pytest.fixture(scope="session")
def point_cache():
    return {}


@pytest.fixture(scope="session")
def cached_point(point_cache):
    """Callable fixture: run (or reuse) one simulation point."""

    def run(exp: ExperimentConfig, variant: str, load: float, seed: int):
        key = (exp.config_sha256, variant, load, seed)
        rec = point_cache.get(key)
        if rec is None:
            rec = run_point(exp, variant, load, seed)
            point_cache[key] = rec
        return rec

    return run


def run_traced(exp: ExperimentConfig, variant: str, load: float, seed: int):
    """Run one point with affinity tracing; returns (record, RackRun)."""
    spec = exp.build_runspec(variant, load, seed)
    rr = RackRun(spec, trace_affinity=True)
    rec = rr.run()
    return rec, rr
