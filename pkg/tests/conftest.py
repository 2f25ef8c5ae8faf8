from __future__ import annotations

from pathlib import Path

import numpy as np
import pytest

from reservebench.models import GAMMA_CASE_STUDY, params_from_dict
from reservebench.triangle import Flavor, Triangle, parse_csv

ROOT = Path(__file__).resolve().parents[1]


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(20240601)


@pytest.fixture
def raa() -> Triangle:
    """RAA paid triangle, cumulative, 10 x 10."""
    return parse_csv((ROOT / "data" / "raa.csv").read_bytes(), Flavor.CUMULATIVE)


@pytest.fixture
def gamma_generator():
    return params_from_dict(GAMMA_CASE_STUDY)


@pytest.fixture
def exact_fit_triangle() -> Triangle:
    """Incremental n = 3 triangle equal to its own chain-ladder fit (mu = 4, gamma = .25/.25/.5)."""
    return Triangle(np.array([[1.0, 1.0, 2.0], [1.0, 1.0, 0.0], [1.0, 0.0, 0.0]]))


@pytest.fixture(autouse=True)
def _isolated_config(tmp_path, monkeypatch):
    monkeypatch.setenv("XDG_CONFIG_HOME", str(tmp_path / "xdg"))
    monkeypatch.delenv("RESERVE_BENCH_THREADS", raising=False)


SMALL_GAMMA = {
    "model": "gamma",
    "mu": [1000.0, 1200.0, 900.0, 1100.0, 1000.0],
    "gamma": [0.5, 0.25, 0.125, 0.0625, 0.0625],
    "nu": 4.0,
}


@pytest.fixture
def small_generator():
    """5 x 5 Gamma generator whose pattern sums to exactly 1."""
    return params_from_dict(SMALL_GAMMA)
