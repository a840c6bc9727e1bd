import os

import numpy as np
import pytest

from scamfqi.models.plant import ProductionPlant, load_scenario
from scamfqi.schemas.scenario import ScenarioFile

ROOT = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
SCENARIOS = os.path.join(ROOT, "scenarios")
CONFIGS = os.path.join(ROOT, "configs")


def make_scenario(**overrides) -> ScenarioFile:
    """1x2 plant, one product that only needs removal at agent 0."""
    base = {
        "name": "pair",
        "layout": {"rows": 1, "cols": 2},
        "operations": [{"id": 0, "duration": 1}],
        "capabilities": {},
        "products": [{"ops": []}],
        "entries": [0],
        "exits": [0],
        "horizon": 50,
    }
    base.update(overrides)
    return ScenarioFile.model_validate(base)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def desk_env():
    return ProductionPlant(load_scenario(os.path.join(SCENARIOS, "desk.json")))


@pytest.fixture
def pair_env():
    return ProductionPlant(make_scenario())
