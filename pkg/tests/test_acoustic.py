import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from patrecon.acoustic import (AcousticOperator, WaveState, adjoint, assemble_dense, forward,
                               propagate, propagate_state)
from patrecon.errors import InvalidInput, MemoryBudgetExceeded
from patrecon.grid import Field, GridSpec
from patrecon.sensors import SensorData, TimeAxis, sensor_layout

from .oracles import fd_leapfrog


def test_zero_time_is_identity():
    rng = np.random.default_rng(0)
    f = Field(GridSpec(16), rng.standard_normal((16, 16)))
    assert np.max(np.abs(propagate(f, 0.0).values - f.values)) < 1e-13
    with pytest.raises(InvalidInput):
        propagate(f, -1e-6)


def test_energy_conserved_per_mode():
    rng = np.random.default_rng(1)
    st0 = WaveState.from_field(Field(GridSpec(16), rng.standard_normal((16, 16))))
    st1 = propagate_state(st0, 2.7e-6)
    e0 = np.abs(st0.p_hat) ** 2 + np.abs(st0.q_hat) ** 2
    e1 = np.abs(st1.p_hat) ** 2 + np.abs(st1.q_hat) ** 2
    assert np.max(np.abs(e1 - e0)) < 1e-10 * np.max(e0)


def test_forward_matches_repeated_propagation():
    g = GridSpec(16)
    rng = np.random.default_rng(2)
    f = Field(g, rng.standard_normal((16, 16)))
    s = sensor_layout(g, "full_view", 10)
    t = TimeAxis(6, 1e-7)
    d = forward(f, s, t)
    for j, tj in enumerate(t.times):
        p = propagate(f, tj).values
        assert np.allclose(d.values[:, j], p[s.rows, s.cols], atol=1e-12)


def test_fd_oracle_small_grid():
    g = GridSpec(32)
    c = np.arange(32) - 15.5
    X, Y = np.meshgrid(c, c)
    blob = np.exp(-(X**2 + Y**2) / 18.0)
    T = 6 * g.pixel_size / g.sound_speed
    ref = fd_leapfrog(g, blob, T)
    got = propagate(Field(g, blob), T).values
    assert np.linalg.norm(got - ref) / np.linalg.norm(ref) < 1e-3


@settings(max_examples=15, deadline=None)
@given(st.sampled_from([8, 16, 32]), st.sampled_from(["one_sided", "two_sided", "full_view"]),
       st.integers(1, 7), st.integers(1, 30), st.integers(0, 2**31))
def test_dot_test_property(n, geom, count, nt, seed):
    g = GridSpec(n)
    s = sensor_layout(g, geom, count)
    op = AcousticOperator(s, TimeAxis(nt, 0.4 * g.pixel_size / g.sound_speed))
    rng = np.random.default_rng(seed)
    x = rng.standard_normal((n, n))
    y = rng.standard_normal((count, nt))
    kx = op.forward_array(x)
    gap = abs(np.sum(kx * y) - np.sum(x * op.adjoint_array(y)))
    assert gap <= 1e-10 * np.linalg.norm(kx) * np.linalg.norm(y) + 1e-300


def test_batched_equals_single():
    g = GridSpec(16)
    op = AcousticOperator(sensor_layout(g, "two_sided", 6), TimeAxis(9, 1e-7))
    rng = np.random.default_rng(3)
    xs = rng.standard_normal((3, 16, 16))
    batched = op.forward_array(xs)
    for i in range(3):
        assert np.allclose(batched[i], op.forward_array(xs[i]), atol=1e-14)


def test_dense_assembly_and_budget():
    g = GridSpec(8)
    s = sensor_layout(g, "one_sided", 3)
    t = TimeAxis(5, 1e-7)
    K = assemble_dense(g, s, t)
    assert K.shape == (15, 64)
    x = np.random.default_rng(4).standard_normal((8, 8))
    assert np.allclose(K @ x.ravel(), AcousticOperator(s, t).forward_array(x).ravel(), atol=1e-13)
    with pytest.raises(MemoryBudgetExceeded):
        assemble_dense(g, s, t, memory_budget=100)


def test_adjoint_needs_sensors():
    with pytest.raises(InvalidInput):
        adjoint(SensorData(None, TimeAxis(3, 1e-7), np.zeros((2, 3))))
