from __future__ import annotations

import random
import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from helpers import main_phase_game  # noqa: E402


@pytest.fixture
def rng():
    return random.Random(1234)


@pytest.fixture
def game():
    return main_phase_game(7)
