import numpy as np
import pytest
from hypothesis import given, strategies as st

from vidbank.data.flow import preprocess_flow
from vidbank.errors import NonFiniteInput


def flow_of(u, v, size=4):
    field = np.zeros((size, size, 2))
    field[..., 0] = u
    field[..., 1] = v
    return field


def test_endpoints_map_to_0_and_255():
    assert preprocess_flow(flow_of(20.0, -20.0))[0, 0, 0] == 255
    assert preprocess_flow(flow_of(20.0, -20.0))[0, 0, 1] == 0


def test_large_motion_clamped():
    out = preprocess_flow(flow_of(35.0, -1000.0))
    assert out[0, 0, 0] == 255
    assert out[0, 0, 1] == 0


def test_zero_displacement_rounds_half_up_to_128():
    # (0+20)/40*255 = 127.5; half-up rounding pins 128
    assert preprocess_flow(flow_of(0.0, 0.0))[0, 0, 0] == 128


def test_third_channel_all_zero():
    rng = np.random.default_rng(3)
    out = preprocess_flow(rng.uniform(-30, 30, (5, 7, 2)))
    assert out.shape == (5, 7, 3)
    assert (out[..., 2] == 0).all()


def test_nonfinite_rejected():
    bad = flow_of(1.0, 2.0)
    bad[1, 1, 0] = np.nan
    with pytest.raises(NonFiniteInput):
        preprocess_flow(bad)
    bad[1, 1, 0] = np.inf
    with pytest.raises(NonFiniteInput):
        preprocess_flow(bad)


@given(st.lists(st.floats(min_value=-100, max_value=100, allow_nan=False),
                min_size=2, max_size=20))
def test_output_in_range_and_monotone(values):
    field = np.zeros((len(values), 1, 2))
    field[:, 0, 0] = values
    out = preprocess_flow(field)
    assert out.min() >= 0 and out.max() <= 255
    order = np.argsort(values, kind="stable")
    encoded = out[order, 0, 0].astype(int)
    assert (np.diff(encoded) >= 0).all()
