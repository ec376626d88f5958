import numpy as np
import pytest

from minav.dipole import MomentSchedule, simulate_packet
from minav.geom import EulerAngles, NavState


@pytest.fixture
def truth():
    return NavState(np.array([1.0, 1.0, 1.0]), EulerAngles(0.0, 0.0, 0.0))


@pytest.fixture
def schedule():
    return MomentSchedule.axis_cycle(1.0, 30)


@pytest.fixture
def P():
    return 0.01 * np.eye(3)


@pytest.fixture
def noise_free_packet(truth, schedule, P):
    return simulate_packet(truth, schedule, 1.0, P, noise_free=True)


def random_state(rng, rmin=0.5, rmax=10.0, max_pitch=1.3):
    direction = rng.standard_normal(3)
    direction /= np.linalg.norm(direction)
    r = rng.uniform(rmin, rmax) * direction
    psi = EulerAngles(rng.uniform(-np.pi, np.pi), rng.uniform(-max_pitch, max_pitch),
                      rng.uniform(-np.pi, np.pi))
    return NavState(r, psi)
