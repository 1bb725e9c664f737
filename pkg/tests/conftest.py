import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

FIXTURE_DIR = Path(__file__).parent / "fixtures"


@pytest.fixture
def rng():
    return np.random.default_rng(42)


@pytest.fixture(scope="session")
def natural_fixture_paths():
    paths = sorted(FIXTURE_DIR.glob("natural_*.png"))
    assert len(paths) >= 5, "natural fixture images missing; run scripts/make_fixtures.py"
    return paths


@pytest.fixture(scope="session")
def natural_grays(natural_fixture_paths):
    from vcr.imgio import read_image
    from vcr.metrics import to_gray

    return [to_gray(read_image(p).planes) for p in natural_fixture_paths]
