import pytest

from irsho.config import NetworkConfig, QuadratureSettings
from irsho.ho_engine import make_context, run_analysis
from irsho.scenario import geometry_for

# coarse grids for tests that do not probe quadrature accuracy
FAST_QUAD = QuadratureSettings(n_d=64, n_phi=128, refine=False)


@pytest.fixture(scope="session")
def default_cfg():
    return NetworkConfig()


@pytest.fixture(scope="session")
def default_geometry(default_cfg):
    return geometry_for(default_cfg)


@pytest.fixture(scope="session")
def default_context(default_cfg, default_geometry):
    return make_context(default_cfg, default_geometry)


@pytest.fixture(scope="session")
def default_metrics(default_cfg, default_geometry):
    return run_analysis(default_cfg, default_geometry, keep_states=True)
