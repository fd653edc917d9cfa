"""Shared fixtures.

The expensive pieces (a full synthesized frame pushed through the whole
processing chain) are session scoped so the cost is paid once.
"""

import numpy as np
import pytest

from radarpose.config import RadarConfig
from radarpose.dsp import process_frame
from radarpose.geometry import TensorGeometry
from radarpose.scene import Scatterer, Scene
from radarpose.simulate import synthesize_frame


@pytest.fixture(scope="session")
def default_config():
    return RadarConfig()


@pytest.fixture(scope="session")
def small_config():
    # keeps DFT oracles and synthetic aperture checks cheap
    return RadarConfig(samples_per_chirp=32, chirps_per_frame=8, tx_count=2, rx_count=2)


@pytest.fixture
def small_geometry():
    return TensorGeometry(doppler_size=4, x_size=32, y_size=16, z_size=8)


@pytest.fixture(scope="session")
def single_target_frame(default_config):
    """One static scatterer, no noise, processed end to end.

    Returns (position, cube, tensor). The position sits off boresight so
    both angle axes carry signal.
    """
    position = (0.8, 4.0, 0.2)
    scene = Scene([Scatterer(position, (0.0, 0.0, 0.0), 1.5)])
    cube = synthesize_frame(scene, default_config, frame_index=0)
    tensor = process_frame(cube, window="none")
    return np.asarray(position), cube, tensor
