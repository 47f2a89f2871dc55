import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy import integrate

from twotime.errors import NonPositiveSeparation, NonPositiveSigma
from twotime.grid import Trajectory, make_grid, straight_line
from twotime.kernel import (KernelConfig, coulomb_action_term, coulomb_time_integral, interval_squared,
                            light_cone_roots, regularized_delta, sharp_time_integral, sigma_sequence)


@pytest.mark.parametrize("t1,t2,x1,x2,expected", [
    (1, 0, [0, 0, 0], [0, 0, 0], 1.0),
    (0.5, 0.5, [1, 0, 0], [0, 0, 0], -1.0),
    (2, 0, [0, 2, 0], [0, 0, 0], 0.0),
])
def test_interval_squared(t1, t2, x1, x2, expected):
    assert interval_squared(t1, t2, np.array(x1, float), np.array(x2, float)) == pytest.approx(expected)


def test_regularized_delta_peak_and_tail():
    assert regularized_delta(0.0, 1.0) == pytest.approx(1 / math.sqrt(2 * math.pi))
    assert regularized_delta(10.0, 1e-2) < 1e-300
    with pytest.raises(NonPositiveSigma):
        regularized_delta(0.0, 0.0)


@given(s2=st.floats(-5, 5), sigma=st.floats(1e-4, 10))
def test_regularized_delta_even_and_positive(s2, sigma):
    assert regularized_delta(s2, sigma) == regularized_delta(-s2, sigma)
    assert regularized_delta(s2, sigma) >= 0


@given(sigma=st.floats(1e-3, 1.0))
def test_regularized_delta_unit_mass_in_s2(sigma):
    val, _ = integrate.quad(lambda u: regularized_delta(u, sigma), -np.inf, np.inf)
    assert val == pytest.approx(1.0, rel=1e-6)


@pytest.mark.parametrize("t1,r,T2,expected,tol", [
    (5.0, 0.5, 10.0, 2.0, 1e-3),
    (0.1, 0.5, 10.0, 1.0, 1e-3),
    (5.0, 20.0, 10.0, 0.0, 1e-6),
])
def test_time_integral_sharp_limit(t1, r, T2, expected, tol):
    assert sharp_time_integral(t1, r, T2) == pytest.approx(expected)
    assert coulomb_time_integral(t1, r, T2, KernelConfig(sigma=1e-6)) == pytest.approx(expected, abs=tol)


def test_time_integral_matches_brute_force():
    cfg = KernelConfig(sigma=1e-2)
    t2 = np.linspace(0, 10, 400001)
    brute = integrate.trapezoid(regularized_delta((5.0 - t2) ** 2 - 0.25, 1e-2), t2)
    assert coulomb_time_integral(5.0, 0.5, 10.0, cfg) == pytest.approx(brute, rel=1e-6)


def test_time_integral_rejects_zero_separation():
    with pytest.raises(NonPositiveSeparation):
        coulomb_time_integral(1.0, 0.0, 2.0, KernelConfig())


def test_light_cone_roots_interior_only():
    assert light_cone_roots(5.0, 0.5, 10.0) == [4.5, 5.5]
    assert light_cone_roots(0.1, 0.5, 10.0) == [0.6]


def test_kernel_config_validation():
    with pytest.raises(NonPositiveSigma):
        KernelConfig(sigma=-1)
    with pytest.raises(ValueError):
        KernelConfig(coupling_prefactor=2.0)


def test_sigma_sequence():
    assert sigma_sequence(1e-2, 1e-6) == pytest.approx([1e-2, 1e-3, 1e-4, 1e-5, 1e-6])


def test_action_term_zero_without_charge():
    g = make_grid(1, 1, 0.25)
    t = straight_line(g, [0, 0, 0], [1, 0, 0], [0, 1, 0], [1, 1, 0])
    assert coulomb_action_term(t, g, KernelConfig(e1e2=0.0)) == 0.0


def test_action_term_static_pair_matches_outer_integral():
    # static separation 0.5: each interior light-cone root contributes 1/(2r) * 2r = 1,
    # so the outer integral over t1 in [0, 10] is 2*10 - 2*0.5 = 19
    eps = 0.0025
    g = make_grid(10, 10, eps)
    x1 = np.zeros((g.N1 + 1, 3))
    x2 = np.zeros((g.N2 + 1, 3))
    x2[:, 0] = 0.5
    cfg = KernelConfig(sigma=1e-3, coupling_prefactor=1.0, e1e2=1.0)
    oracle, _ = integrate.quad(lambda t: sharp_time_integral(t, 0.5, 10.0), 0, 10, points=[0.5, 9.5])
    assert oracle == pytest.approx(19.0)
    assert coulomb_action_term(Trajectory(x1, x2), g, cfg) == pytest.approx(oracle, rel=0.02)


def test_action_term_sigma_sensitivity_is_small():
    g = make_grid(4, 4, 0.01)
    s = np.linspace(0, 1, g.N1 + 1)[:, None]
    x1 = s * np.array([0.3, 0.1, 0.0])
    x2 = np.array([0.6, 0.0, 0.0]) + s * np.array([0.0, 0.2, 0.1])
    t = Trajectory(x1, x2)
    a = coulomb_action_term(t, g, KernelConfig(sigma=1e-2, e1e2=1.0))
    b = coulomb_action_term(t, g, KernelConfig(sigma=2e-2, e1e2=1.0))
    assert abs(a - b) < 0.1 * abs(a)
