import numpy as np
import pytest

from evoch.config import load_config
from evoch.geometry import FlowField, build_reference_surface


def make_config(**overrides):
    base = dict(
        model="advected",
        surface=dict(preset="unit_sphere", refinement=2),
        flow=dict(preset="static"),
        theta=0.3,
        T=0.05,
        dt=0.01,
        u0=dict(preset="random_uniform", seed=7, amplitude=0.05, mean=0.0),
    )
    base.update(overrides)
    return load_config(base)


@pytest.fixture(scope="session")
def mesh2():
    return build_reference_surface("unit_sphere", 2)


@pytest.fixture(scope="session")
def mesh3():
    return build_reference_surface("unit_sphere", 3)


@pytest.fixture
def breathing():
    return FlowField("breathing_sphere", advective_kind="rigid_rotation")


@pytest.fixture
def rng():
    return np.random.Generator(np.random.PCG64(12345))
