import numpy as np
import pytest
from hypothesis import given, strategies as st

from twotime import chi
from twotime.energy import energy_at_corner, estimate_energy
from twotime.errors import EndpointDependent
from twotime.grid import bind_constants, make_grid, random_endpoints


def free_solver(p1, p2, const):
    return lambda T: chi.free_particle_chi(make_grid(T, T, T / 8), p1, p2, const)


def sample(n=10, seed=0):
    return [(e[1], e[3]) for e in random_endpoints(n, seed=seed)]


def test_energy_value():
    const = bind_constants(make_grid(1, 1, 1), m1=1.0, m2=2.0)
    est = estimate_energy(free_solver([1, 0, 0], [2, 0, 0], const), [4, 8, 16, 32], sample(), const)
    assert est.W == pytest.approx(1.5, abs=1e-10)
    assert est.endpoint_spread <= 1e-12
    assert abs(est.slope) <= 1e-12
    assert est.table().shape == (4, 3)


def test_energy_zero_momentum():
    const = bind_constants(make_grid(1, 1, 1))
    est = estimate_energy(free_solver([0, 0, 0], [0, 0, 0], const), [2, 4, 8], sample(3), const)
    assert est.W == 0


@given(p=st.lists(st.floats(-2, 2), min_size=6, max_size=6), m1=st.floats(0.5, 3), m2=st.floats(0.5, 3))
def test_corner_energy_matches_free_value(p, m1, m2):
    g = make_grid(2, 2, 0.5)
    const = bind_constants(g, m1=m1, m2=m2)
    c = chi.free_particle_chi(g, p[:3], p[3:], const)
    x1, x2 = np.random.default_rng(0).normal(size=(2, 3))
    W = energy_at_corner(c, x1, x2, const)
    assert W.real == pytest.approx(chi.free_particle_energy(p[:3], p[3:], const), abs=1e-10)


def test_endpoint_dependence_is_reported():
    const = bind_constants(make_grid(1, 1, 1))

    def solve_at(T):
        g = make_grid(T, T, T / 4)
        c = chi.free_particle_chi(g, [1, 0, 0], [0, 0, 0], const)
        # an x-dependent time derivative makes the corner energy end-point dependent
        s10 = c.s10 + g.t1[:, None, None] * np.array([1.0, 0, 0])
        return c.replace(s10=s10)

    with pytest.raises(EndpointDependent) as info:
        estimate_energy(solve_at, [2, 4, 8], sample(5), const)
    assert info.value.spread > 0


@pytest.mark.parametrize("seq", [[1, 2], [4, 2, 8], [1, 1, 2]])
def test_t_sequence_validation(seq):
    const = bind_constants(make_grid(1, 1, 1))
    with pytest.raises(ValueError):
        estimate_energy(free_solver([1, 0, 0], [0, 0, 0], const), seq, sample(2), const)


def test_save(tmp_path):
    const = bind_constants(make_grid(1, 1, 1), m1=1.0, m2=2.0)
    est = estimate_energy(free_solver([1, 0, 0], [2, 0, 0], const), [4, 8, 16], sample(2), const)
    est.save(tmp_path / "e.tsv", header="x")
    assert np.loadtxt(tmp_path / "e.tsv").shape == (3, 3)
