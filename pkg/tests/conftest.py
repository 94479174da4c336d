import sys
from pathlib import Path

import pytest

HERE = Path(__file__).parent
FIXTURES = HERE / "fixtures"
sys.path.insert(0, str(HERE))


@pytest.fixture
def lamp_scene():
    from sceneedit import load_scene

    return load_scene(FIXTURES / "lamp_scene.json")


@pytest.fixture
def lamp_goals():
    from sceneedit import parse_goals

    return parse_goals((FIXTURES / "lamp.elg").read_text()).goals
