import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from fmatchlab.channel import SystemConfig
from fmatchlab.graph import load_graph

FIXTURES = Path(__file__).parent / "fixtures"


@pytest.fixture(scope="session")
def fig3_graph():
    """The 3-user, 6-subchannel walkthrough instance.

    User 1 sees only subchannel 4; the unique maximum f-matching profile at
    caps (2,2,2) is k = (2,1,2) with subchannel 2 left over for the random
    completion step.
    """
    return load_graph((FIXTURES / "fig3.graph").read_text())


@pytest.fixture
def cfg_rb():
    """Two users, six bands, two RBs per band, fixed unit rates."""
    return SystemConfig(
        num_users=2, num_bands=6, num_subchannels=12, snr=10.0, target_rates=(1.0, 1.0)
    )


@pytest.fixture
def cfg_chunk():
    """Three users, six chunks (one per band), fixed unit rates."""
    return SystemConfig(
        num_users=3, num_bands=6, num_subchannels=6, snr=10.0, target_rates=(1.0, 1.0, 1.0)
    )


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)
