import numpy as np
import pytest

from topostudio.model import GridDims, Load, ProblemSpec, Support


def make_cantilever(nelx, nely, volfrac=0.5, mask=None, loads=None, **kw):
    """Left edge fully fixed, unit downward load at the right mid edge."""
    dims = GridDims(nelx, nely)
    shape = np.ones(dims.num_elements, bool)
    if mask is None:
        mask = np.zeros(dims.num_elements, bool)
    supports = tuple(Support(dims.node_at(0, iy), True, True) for iy in range(nely + 1))
    if loads is None:
        loads = (Load(dims.node_at(nelx, nely // 2), 0.0, 1.0),)
    return ProblemSpec(dims, shape, mask, loads, supports, volfrac=volfrac, **kw)


@pytest.fixture
def small_cantilever():
    return make_cantilever(6, 4)
