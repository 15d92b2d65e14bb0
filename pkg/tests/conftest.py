import numpy as np
import pytest


@pytest.fixture(scope="session")
def ref_cache(tmp_path_factory):
    """Disk cache shared by every test that needs a spectral reference."""
    return str(tmp_path_factory.mktemp("refcache"))


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
