import os
import json
import sys
import pytest

sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))

from models.scenarios import Example1Spec, Example2Spec, build_example1, build_example2, build_constant  # noqa: E402
from models.equilibria import analyze_model  # noqa: E402


# Shared models are immutable, so session scope is safe
@pytest.fixture(scope="session")
def constant_model():
    """k=5, f=10: one endemic equilibrium at (0.1, 0.4)."""
    return build_constant(10.0, 5.0)


@pytest.fixture(scope="session")
def low_constant_model():
    """k=5, f=4: below threshold everywhere."""
    return build_constant(4.0, 5.0)


@pytest.fixture(scope="session")
def example1_model():
    return build_example1(Example1Spec(5, 5.0))


@pytest.fixture(scope="session")
def example2_model():
    return build_example2(Example2Spec(5.0))


@pytest.fixture(scope="session")
def example1_analysis(example1_model):
    return analyze_model(example1_model)


@pytest.fixture(scope="session")
def example2_analysis(example2_model):
    return analyze_model(example2_model)


@pytest.fixture
def write_spec(tmp_path):
    """Write a model spec dict to a temporary JSON file and return its path."""

    def _write(data, name="model.json"):
        path = tmp_path / name
        path.write_text(json.dumps(data), encoding="utf-8")
        return str(path)

    return _write
