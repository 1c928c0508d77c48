import sys
from pathlib import Path

import pytest

# Let tests import the shared oracle helpers as a plain module.
sys.path.insert(0, str(Path(__file__).parent))

from sapsense import default_layout, default_scales
from sapsense.chip import scales_by_chemical


@pytest.fixture(scope="session")
def layout():
    return default_layout()


@pytest.fixture(scope="session")
def scales():
    return default_scales()


@pytest.fixture(scope="session")
def scale_map(scales):
    return scales_by_chemical(scales)
