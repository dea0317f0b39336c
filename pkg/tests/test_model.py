import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from topostudio.model import (
    DensityField,
    GridDims,
    Load,
    MaterialParams,
    ProblemSpec,
    Support,
    spec_from_dict,
    spec_from_json,
    spec_to_dict,
    spec_to_json,
    validate_problem,
)
from tests.conftest import make_cantilever


def test_node_at_origin():
    assert GridDims(4, 3).node_at(0, 0) == 0


def test_node_at_end_of_first_row():
    assert GridDims(4, 3).node_at(4, 0) == 4


def test_node_at_interior():
    # hand computation: iy*(nelx+1)+ix = 1*5+2
    assert GridDims(4, 3).node_at(2, 1) == 7


def test_node_at_rejects_out_of_range():
    dims = GridDims(4, 3)
    with pytest.raises(IndexError):
        dims.node_at(5, 0)
    with pytest.raises(IndexError):
        dims.node_at(0, 4)


@given(st.integers(1, 40), st.integers(1, 40), st.data())
def test_node_round_trip(nelx, nely, data):
    dims = GridDims(nelx, nely)
    ix = data.draw(st.integers(0, nelx))
    iy = data.draw(st.integers(0, nely))
    assert dims.node_xy(dims.node_at(ix, iy)) == (ix, iy)


@given(st.integers(1, 40), st.integers(1, 40), st.data())
def test_element_round_trip(nelx, nely, data):
    dims = GridDims(nelx, nely)
    ex = data.draw(st.integers(0, nelx - 1))
    ey = data.draw(st.integers(0, nely - 1))
    assert dims.element_xy(dims.element_at(ex, ey)) == (ex, ey)


def test_density_field_bounds():
    dims = GridDims(2, 2)
    with pytest.raises(ValueError):
        DensityField(dims, np.array([0.0, 0.5, 1.0, 1.5]))
    with pytest.raises(ValueError):
        DensityField(dims, np.array([0.0, 0.5, 1.0]))


def test_density_field_grid_view():
    dims = GridDims(3, 2)
    f = DensityField(dims, np.arange(6) / 10.0)
    assert f.as_grid().shape == (2, 3)
    assert f.as_grid()[1, 0] == pytest.approx(0.3)


def test_load_normalized_to_unit_magnitude():
    ld = Load(0, 3.0, 4.0)
    assert np.hypot(ld.fx, ld.fy) == pytest.approx(1.0)
    assert ld.fx == pytest.approx(0.6)
    with pytest.raises(ValueError):
        Load(0, 0.0, 0.0)


def test_support_needs_a_direction():
    with pytest.raises(ValueError):
        Support(0, False, False)


def test_material_defaults():
    m = MaterialParams()
    assert (m.e0, m.emin, m.nu, m.penal, m.rmin) == (1.0, 1e-9, 0.3, 3.0, 2.0)


def test_validate_clean_cantilever(small_cantilever):
    assert validate_problem(small_cantilever) == []


def test_validate_no_supports_is_rigid():
    spec = make_cantilever(4, 4).replace(supports=())
    assert "unconstrained rigid body motion" in validate_problem(spec)


def test_validate_single_axis_collinear_is_rigid():
    # three x-only constraints along one horizontal line cannot stop
    # y-translation or rotation about points on that line
    dims = GridDims(4, 4)
    spec = make_cantilever(4, 4).replace(
        supports=tuple(Support(dims.node_at(ix, 2), True, False) for ix in range(3))
    )
    assert "unconstrained rigid body motion" in validate_problem(spec)


def test_validate_three_well_placed_dofs_suffice():
    dims = GridDims(4, 4)
    spec = make_cantilever(4, 4).replace(
        supports=(
            Support(dims.node_at(0, 0), True, True),
            Support(dims.node_at(4, 0), False, True),
        )
    )
    assert validate_problem(spec) == []


def test_validate_mask_exceeds_shape():
    spec = make_cantilever(4, 4)
    shape = spec.shape.copy()
    shape[0] = False
    mask = np.zeros_like(spec.mask)
    mask[0] = True
    spec = spec.replace(shape=shape, mask=mask)
    assert "mask exceeds shape" in validate_problem(spec)


def test_validate_infeasible_mask_volume():
    spec = make_cantilever(4, 4, volfrac=0.3)
    mask = np.zeros_like(spec.mask)
    mask[:8] = True  # half of 16 elements
    spec = spec.replace(mask=mask)
    assert "infeasible volume: mask alone exceeds target" in validate_problem(spec)


def test_validate_empty_shape():
    spec = make_cantilever(4, 4)
    spec = spec.replace(shape=np.zeros_like(spec.shape))
    assert "empty shape" in validate_problem(spec)


def test_validate_volfrac_range():
    spec = make_cantilever(4, 4, volfrac=0.0)
    assert any("volume fraction" in i for i in validate_problem(spec))


def test_validate_load_off_grid():
    spec = make_cantilever(4, 4)
    spec = spec.replace(loads=(Load(9999, 0.0, 1.0),))
    assert any("outside grid" in i for i in validate_problem(spec))


def test_validate_load_not_adjacent_to_shape():
    spec = make_cantilever(4, 4)
    shape = spec.shape.copy().reshape(4, 4)
    shape[:, 2:] = False  # right half void; load node sits at the far right
    spec = spec.replace(shape=shape.ravel())
    assert any("not adjacent" in i for i in validate_problem(spec))


def test_json_round_trip(small_cantilever):
    text = spec_to_json(small_cantilever)
    back = spec_from_json(text)
    assert back.dims == small_cantilever.dims
    assert np.array_equal(back.shape, small_cantilever.shape)
    assert np.array_equal(back.mask, small_cantilever.mask)
    assert back.loads == small_cantilever.loads
    assert back.supports == small_cantilever.supports
    assert back.volfrac == small_cantilever.volfrac
    assert back.material == small_cantilever.material


def test_spec_from_dict_accepts_node_coordinates():
    d = spec_to_dict(make_cantilever(4, 3))
    d["loads"] = [{"node": [2, 1], "fx": 0.0, "fy": 1.0}]
    spec = spec_from_dict(d)
    assert spec.loads[0].node == 7


def test_spec_from_dict_restrict_mask_mode():
    d = spec_to_dict(make_cantilever(4, 4, volfrac=0.8))
    region = np.zeros(16, int)
    region[:4] = 1
    d["mask"] = region.tolist()
    d["mask_mode"] = "restrict"
    spec = spec_from_dict(d)
    # optimization restricted to the marked region: the rest is preserved
    assert spec.mask.sum() == 12
    assert not spec.mask[:4].any()


def test_spec_from_json_rejects_garbage():
    with pytest.raises(ValueError):
        spec_from_json("not json")
    with pytest.raises(ValueError):
        spec_from_json("[1,2,3]")
    with pytest.raises(ValueError):
        spec_from_json("{}")


def test_free_elements(small_cantilever):
    mask = np.zeros_like(small_cantilever.mask)
    mask[0] = True
    spec = small_cantilever.replace(mask=mask)
    free = spec.free_elements()
    assert not free[0]
    assert free.sum() == spec.dims.num_elements - 1
