"""
Shared testing infrastructure for gfm-gfl-duality.

Fixtures provide the default inverter parameters, operating points against
an infinite bus, small network topologies and a temporary output directory.
"""

from __future__ import annotations

import numpy as np
import pytest

from gfm_gfl_duality.devices import DeviceModel, GflParams, GfmParams, GridImpedance, infinite_bus_operating_point
from gfm_gfl_duality.network import Bus, Line, NetworkTopology
from gfm_gfl_duality.scenarios import smib_topology

# ============================================================================
# Device parameters
# ============================================================================


@pytest.fixture
def gfm_params() -> GfmParams:
    """Default grid-forming parameters (m 0.05, 15 Hz filter, 250 Hz loops)."""
    return GfmParams()


@pytest.fixture
def gfl_params() -> GflParams:
    """Default grid-following parameters (15 Hz PLL, 250 Hz current loop)."""
    return GflParams()


@pytest.fixture
def gfm_grid() -> GridImpedance:
    """Grid used by the GFM parameter sweeps, 0.2 (1/5 + j) pu."""
    return GridImpedance.from_scale(0.2)


@pytest.fixture
def gfl_grid() -> GridImpedance:
    """Grid used by the GFL parameter sweeps, 0.4 (1/5 + j) pu."""
    return GridImpedance.from_scale(0.4)


# ============================================================================
# Operating points and linearized devices
# ============================================================================


@pytest.fixture
def gfm_model(gfm_params, gfm_grid) -> DeviceModel:
    return DeviceModel.at_infinite_bus(gfm_params, gfm_grid)


@pytest.fixture
def gfl_model(gfl_params, gfl_grid) -> DeviceModel:
    return DeviceModel.at_infinite_bus(gfl_params, gfl_grid)


@pytest.fixture
def gfm_op(gfm_params, gfm_grid):
    return infinite_bus_operating_point(gfm_params, gfm_grid)


@pytest.fixture
def gfl_op(gfl_params, gfl_grid):
    return infinite_bus_operating_point(gfl_params, gfl_grid)


# ============================================================================
# Topologies
# ============================================================================


@pytest.fixture
def smib_gfm(gfm_params, gfm_grid) -> NetworkTopology:
    return smib_topology(gfm_params, gfm_grid)


@pytest.fixture
def smib_gfl(gfl_params, gfl_grid) -> NetworkTopology:
    return smib_topology(gfl_params, gfl_grid)


@pytest.fixture
def island_pair() -> NetworkTopology:
    """Two GFM inverters sharing an RL load at a passive middle bus."""
    return NetworkTopology(
        (Bus(1), Bus(2, load_r=1.0, load_x=0.2), Bus(3)),
        (Line(1, 2, 0.02, 0.1), Line(2, 3, 0.02, 0.1)),
        {1: GfmParams(p_ref=0.0), 3: GfmParams(p_ref=0.0)},
        name="island-pair",
    )


@pytest.fixture
def mixed_island() -> NetworkTopology:
    """One GFM and one GFL feeding a resistive load."""
    return NetworkTopology(
        (Bus(1), Bus(2, load_r=2.0), Bus(3)),
        (Line(1, 2, 0.02, 0.1), Line(2, 3, 0.02, 0.1)),
        {1: GfmParams(p_ref=0.0), 3: GflParams(i_d_ref=-0.2)},
        name="mixed-island",
    )


# ============================================================================
# Numerics and output
# ============================================================================


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(20240614)


@pytest.fixture
def out_dir(tmp_path, monkeypatch):
    """Fresh output directory, also set as the default through the environment."""
    path = tmp_path / "out"
    monkeypatch.setenv("GFM_GFL_DUALITY_OUTPUT_DIR", str(path))
    return path
