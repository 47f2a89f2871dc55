import numpy as np
import pytest
from hypothesis import given, strategies as st

from twotime.errors import GridMismatch, NonCommensurate, NonPositive
from twotime.grid import (Trajectory, bind_constants, make_grid, random_endpoints, sample_collocation,
                          sample_collocation_sets, straight_line)


@pytest.mark.parametrize("T1,T2,eps,N1,N2", [(1, 2, 0.5, 2, 4), (1, 1, 1, 1, 1), (2, 3, 0.25, 8, 12),
                                             (1, 1, 0.1, 10, 10)])
def test_make_grid_counts(T1, T2, eps, N1, N2):
    g = make_grid(T1, T2, eps)
    assert (g.N1, g.N2) == (N1, N2)
    assert g.t1[-1] == pytest.approx(T1)
    assert g.node_shape == (N1 + 1, N2 + 1)


def test_make_grid_rejects_non_integral():
    with pytest.raises(NonCommensurate):
        make_grid(1, 1, 0.3)


@pytest.mark.parametrize("args", [(0, 1, 0.5), (1, -1, 0.5), (1, 1, 0)])
def test_make_grid_rejects_non_positive(args):
    with pytest.raises(NonPositive):
        make_grid(*args)


@pytest.mark.parametrize("eps,hbar,expected", [(0.1, 1, 0.1), (1, 1, 1), (0.01, 2, 0.02)])
def test_hbar_tilde(eps, hbar, expected):
    c = bind_constants(make_grid(1, 1, eps), hbar=hbar)
    assert c.hbar_tilde == pytest.approx(expected)


def test_bind_constants_rejects_mass():
    with pytest.raises(NonPositive):
        bind_constants(make_grid(1, 1, 1), m1=0)


@given(k1=st.integers(1, 20), k2=st.integers(1, 20), eps=st.sampled_from([0.1, 0.25, 0.5, 1.0, 0.05]))
def test_commensurate_grids_round_trip(k1, k2, eps):
    g = make_grid(k1 * eps, k2 * eps, eps)
    assert (g.N1, g.N2) == (k1, k2)
    assert g.refine().N1 == 2 * k1
    assert g.swapped().N1 == k2


def test_degenerate_sampler_gives_zero_line():
    g = make_grid(1, 1, 0.25)
    (t,) = sample_collocation(g, [np.zeros(3)] * 4, 1, seed=0, amplitude=0.0, noise=0.0)
    assert np.all(t.x1 == 0) and np.all(t.x2 == 0)


def test_sampler_determinism_and_endpoints():
    g = make_grid(1, 2, 0.25)
    ends = random_endpoints(1, seed=42)[0]
    a = sample_collocation(g, ends, 8, seed=42)
    b = sample_collocation(g, ends, 8, seed=42)
    assert len(a) == 8
    for s, t in zip(a, b):
        assert np.array_equal(s.x1, t.x1) and np.array_equal(s.x2, t.x2)
        for e_traj, e_fixed in zip(s.endpoints, ends):
            assert np.array_equal(e_traj, e_fixed)
    c = sample_collocation(g, ends, 8, seed=43)
    assert not np.array_equal(a[0].x1, c[0].x1)


def test_sample_sets_concatenate():
    g = make_grid(1, 1, 0.5)
    trajs = sample_collocation_sets(g, random_endpoints(3, seed=1), 2, seed=1)
    assert len(trajs) == 6
    assert np.array_equal(trajs[0].x1[0], trajs[1].x1[0])
    assert not np.array_equal(trajs[0].x1[0], trajs[2].x1[0])


def test_trajectory_immutable_and_checked():
    g = make_grid(1, 1, 0.5)
    t = straight_line(g, [0, 0, 0], [1, 0, 0], [0, 1, 0], [0, 0, 1])
    with pytest.raises(ValueError):
        t.x1[0, 0] = 5.0
    t.check(g)
    with pytest.raises(GridMismatch):
        t.check(make_grid(1, 1, 0.25))
    with pytest.raises(ValueError):
        Trajectory(np.zeros((3, 2)), np.zeros((3, 3)))


def test_reference_keeps_endpoints():
    g = make_grid(1, 1, 0.25)
    t = sample_collocation(g, random_endpoints(1, seed=0)[0], 1)[0]
    ref = t.reference()
    assert np.all(ref.x1[1:-1] == 0) and np.all(ref.x2[1:-1] == 0)
    assert all(np.array_equal(a, b) for a, b in zip(ref.endpoints, t.endpoints))
