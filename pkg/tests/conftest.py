import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from afpnav.acoustics import GridEnv
from afpnav.gridworld import OccupancyGrid
from afpnav.mapgen import open_room

settings.register_profile("default", deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


def grid_from_rows(rows, res=0.25):
    return OccupancyGrid.from_rows(rows, res)


@pytest.fixture
def room10():
    return open_room(10, 10, 0.5)


@pytest.fixture(scope="session")
def two_rooms():
    # 24x12 cells at 0.25 m split by a wall with a 2-cell door near the top
    occ = np.zeros((24, 12), dtype=bool)
    occ[0, :] = occ[-1, :] = occ[:, 0] = occ[:, -1] = True
    occ[12, :] = True
    occ[12, 8:10] = False
    return GridEnv(OccupancyGrid(occ, 0.25), name="two")
