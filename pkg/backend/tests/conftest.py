import os
import sys
from pathlib import Path

import pytest
from fastapi.testclient import TestClient

ROOT_DIR = Path(__file__).resolve().parents[2]
if str(ROOT_DIR) not in sys.path:
    sys.path.insert(0, str(ROOT_DIR))
TEST_STATE_DIR = ROOT_DIR / ".pytest_state"
os.environ.setdefault("BUFFET_RUNS_DIR", str(TEST_STATE_DIR))
os.environ.setdefault("STATE_FILE", str(TEST_STATE_DIR / "runs.json"))
os.environ.setdefault("BUFFET_WORKERS", "1")

from backend.app.main import app
from backend.app.models import GameConfig
from backend.app.store import RUN_STORE


BALANCED_YAML = """\
schema_version: 1
N: 10
M: 5
L: 3
true_states: [5, 5, 5, 5, 5]
signal_quality: 0.8
utility: {gamma: 1.0, reward: 10.0, cost: 1.0}
prior:
  - [0, 0, 0, 0, 1]
  - [0, 0, 0, 0, 1]
  - [0, 0, 0, 0, 1]
  - [0, 0, 0, 0, 1]
  - [0, 0, 0, 0, 1]
seed: 7
"""

SMALL_YAML = """\
schema_version: 1
N: 4
M: 2
L: 1
true_states: [5, 2]
signal_quality: 0.7
utility: {gamma: 0.5, reward: 10.0, cost: 2.0}
slots: 6
seed: 11
"""


def build_config(**values):
    """Game config from keyword shorthand; N/M/true_states default to a 3x2 game."""
    payload = {"customers": 3, "dishes": 2, "true_states": [5.0, 3.0], "signal_quality": 0.8}
    payload.update(values)
    return GameConfig.model_validate(payload)


@pytest.fixture
def make_config():
    return build_config


@pytest.fixture
def client():
    RUN_STORE.clear()
    with TestClient(app) as test_client:
        yield test_client


@pytest.fixture
def balanced_yaml():
    return BALANCED_YAML


@pytest.fixture
def small_yaml():
    return SMALL_YAML
