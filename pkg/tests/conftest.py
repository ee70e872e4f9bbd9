import json
from pathlib import Path

import numpy as np
import pytest

from multimatrix.services.sampling import RngStream

GOLDEN_DIR = Path(__file__).parent / "golden"
SCHEMA_DIR = Path(__file__).parent.parent / "schemas"


def pytest_addoption(parser):
    parser.addoption(
        "--record-golden",
        action="store_true",
        default=False,
        help="Write tests/golden/*.json from the current results instead of comparing",
    )


@pytest.fixture
def rng():
    return RngStream(12345)


@pytest.fixture
def spd():
    """Factory for well-conditioned random SPD matrices of a given order"""
    stream = RngStream(99)

    def make(m):
        a = stream.standard_normal((m, m))
        return a @ a.T + m * np.eye(m)

    return make


@pytest.fixture
def golden(request):
    """Compare against tests/golden/<name>.json; --record-golden rewrites it"""
    record = request.config.getoption("--record-golden")

    def check(name, payload):
        path = GOLDEN_DIR / f"{name}.json"
        text = json.dumps(payload, indent=2, sort_keys=True) + "\n"
        if record:
            path.write_text(text, encoding="utf-8")
            return
        if not path.exists():
            pytest.fail(f"missing golden file {path.name}; record it with pytest --record-golden")
        assert path.read_text(encoding="utf-8") == text

    return check


@pytest.fixture
def schema():
    def load(name):
        return json.loads((SCHEMA_DIR / f"{name}.schema.json").read_text(encoding="utf-8"))

    return load
