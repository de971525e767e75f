"""
Shared fixtures for the lab test-suite
"""

import os
import sys

import pytest

sys.path.insert(0, os.path.join(os.path.dirname(os.path.dirname(os.path.abspath(__file__))), "nclp"))

from app.core.config import settings  # noqa: E402
from app.schemas.campaign import CampaignConfig  # noqa: E402
from app.services.matcore import random_hermitian, random_psd  # noqa: E402

SEED = 20240611


@pytest.fixture(autouse=True)
def single_process(monkeypatch):
    monkeypatch.setattr(settings, "THREADS", 1)


@pytest.fixture
def seed():
    return SEED


@pytest.fixture
def generic_pair():
    return random_psd(3, SEED, "generic", 0), random_psd(3, SEED, "generic", 1)


@pytest.fixture
def singular_pair():
    return random_psd(4, SEED, "singular", 2), random_psd(4, SEED, "singular", 3)


@pytest.fixture
def gapped():
    return random_psd(4, SEED, "spectral-gap", 4)


@pytest.fixture
def direction():
    return random_hermitian(4, SEED, 5)


@pytest.fixture
def small_config():
    return CampaignConfig(
        seed=7,
        trials=2,
        heavy_trials=1,
        dims=[2],
        p_grid=[2.0, 2.5, 3.0],
        sub2_grid=[1.0],
        checks=["classical", "theorem", "duality"],
        counterexample_budget=200,
    )
