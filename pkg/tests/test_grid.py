import numpy as np
import pytest
from hypothesis import given, strategies as st

from gfperc.grid import GridSpec


def test_square_shape_and_centres():
    g = GridSpec.square(4, 0.5)
    assert g.shape == (4, 4)
    assert np.allclose(g.centers_x(), [0.25, 0.75, 1.25, 1.75])


def test_rejects_bad_grids():
    with pytest.raises(ValueError):
        GridSpec(0.0, (0, 1, 0, 1))
    with pytest.raises(ValueError):
        GridSpec(0.3, (0, 1, 0, 1))
    with pytest.raises(ValueError):
        GridSpec(0.5, (0, 1, 1, 1))


@given(st.integers(1, 40), st.integers(1, 40), st.sampled_from([0.125, 0.25, 0.5, 1.0]),
       st.floats(0, 4))
def test_noise_range_covers_padding(nx, ny, eps, pad):
    g = GridSpec.rectangle(nx, ny, eps, padding=pad)
    ix, iy = g.noise_index_range()
    assert ix[0] * eps >= -pad - 1e-9 and ix[-1] * eps <= nx * eps + pad + 1e-9
    assert (ix[0] - 1) * eps < -pad and (ix[-1] + 1) * eps > nx * eps + pad


def test_pixel_slices():
    g = GridSpec.rectangle(8, 4, 1.0)
    rs, cs = g.pixel_slices((2.0, 5.0, 0.0, 4.0))
    assert (cs.start, cs.stop) == (2, 5)
    assert (rs.start, rs.stop) == (0, 4)
