import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from rydberg_dtc.errors import ConfigError
from rydberg_dtc.model import BasisDescriptor, ModelParams, population_difference_diagonal
from rydberg_dtc.observables import (
    Trajectory,
    beating_period_detuning,
    beating_period_epsilon,
    critical_cycle_number,
    flip_cycles,
    fourier_spectrum,
    order_parameter,
    population_imbalance,
)


def alternating(n_f):
    n = np.arange(n_f + 1)
    return (-1.0) ** (n + 1)


def test_imbalance_limits():
    diag = population_difference_diagonal(BasisDescriptor(2))
    assert population_imbalance(np.array([1, 0, 0, 0]), diag) == -1.0
    assert population_imbalance(np.array([0, 0, 0, 1]), diag) == 1.0
    bell = np.array([1, 0, 0, 1]) / math.sqrt(2)
    assert population_imbalance(bell, diag) == pytest.approx(0.0, abs=1e-15)
    with pytest.raises(ConfigError):
        population_imbalance(np.ones(8), diag)


def test_pure_subharmonic_spectrum():
    s = fourier_spectrum(alternating(100)[1:])
    k = int(np.argmax(s.magnitude))
    assert s.nu[k] == 0.5
    assert s.magnitude[k] == pytest.approx(1.0, abs=1e-12)
    others = np.delete(s.magnitude, k)
    assert np.max(others) < 1e-12


def test_beating_spectrum_has_two_peaks():
    n = np.arange(1, 2001)
    p = (-1.0) ** (n + 1) * np.cos(0.2 * n)
    peaks = fourier_spectrum(p).peaks(2)
    nus = sorted(nu for nu, _ in peaks)
    assert nus[0] == pytest.approx(0.5 - 0.1 / math.pi, abs=1e-3)
    assert nus[1] == pytest.approx(0.5 + 0.1 / math.pi, abs=1e-3)


def test_constant_spectrum():
    s = fourier_spectrum(np.full(64, 0.3))
    assert s.magnitude[0] == pytest.approx(0.3)
    assert np.max(s.magnitude[1:]) < 1e-12


def test_spectrum_matches_definition_with_padding():
    rng = np.random.default_rng(1)
    p = rng.uniform(-1, 1, 37)
    s = fourier_spectrum(p, grid_size=50)
    n = np.arange(1, 38)
    direct = np.array([np.sum(p * np.exp(2j * np.pi * n * nu)) / 37 for nu in s.nu])
    np.testing.assert_allclose(s.values, direct, atol=1e-13)


@pytest.mark.parametrize("p, grid", [([], None), ([0.5], None), ([0.1, 0.2, 0.3], 2)])
def test_spectrum_rejects(p, grid):
    with pytest.raises(ConfigError):
        fourier_spectrum(p, grid)


def test_order_parameter_examples():
    assert np.all(order_parameter(alternating(50)) == -1)
    q = order_parameter(np.ones(11))
    np.testing.assert_array_equal(q, [(-1) ** n for n in range(1, 11)])
    n = np.arange(0, 30)
    q = order_parameter((-1.0) ** (n + 1) * np.cos(0.2 * n))
    assert np.all(q[:7] == -1) and q[7] == 1


def test_order_parameter_deadband_carries_previous():
    p = np.array([-1.0, 1.0, 0.0, 1e-13, -0.5])
    # Q(1) = -1, Q(2), Q(3) carried, Q(4) = sgn(-0.5) = -1
    np.testing.assert_array_equal(order_parameter(p), [-1, -1, -1, -1])
    np.testing.assert_array_equal(order_parameter([-1.0, 0.0, 0.0]), [-1, -1])


def test_critical_cycle_number():
    c = critical_cycle_number(-np.ones(500, dtype=int))
    assert (c.n_c, c.censored) == (500, True)
    q = -np.ones(300, dtype=int)
    q[100:] = 1
    c = critical_cycle_number(q)
    assert (c.n_c, c.censored) == (100, False)
    with pytest.raises(ConfigError):
        critical_cycle_number([])


def test_flip_cycles():
    np.testing.assert_array_equal(flip_cycles([-1, -1, 1, 1, -1]), [3, 5])


def test_beating_periods():
    assert beating_period_epsilon(0.1) == pytest.approx(15.70796, abs=1e-5)
    assert beating_period_detuning(ModelParams(L=1, delta=0.6)) == pytest.approx(56.6, abs=0.2)
    small = beating_period_detuning(ModelParams(L=1, delta=1e-4))
    assert small > 1e7
    with pytest.raises(ConfigError):
        beating_period_epsilon(0.0)
    with pytest.raises(ConfigError):
        beating_period_detuning(ModelParams(L=1))


def test_trajectory_properties():
    t = Trajectory(None, alternating(20))
    assert t.n_f == 20
    assert (t.n_c, t.censored) == (20, True)
    assert t.spectrum().magnitude.max() == pytest.approx(1.0)


finite_p = arrays(np.float64, st.integers(3, 80), elements=st.floats(-1, 1, allow_nan=False))


@given(p=finite_p)
def test_parseval(p):
    s = fourier_spectrum(p)
    assert np.sum(s.magnitude**2) == pytest.approx(np.sum(p**2) / p.size, abs=1e-9)


@given(p=finite_p)
def test_conjugate_symmetry(p):
    mag = fourier_spectrum(p).magnitude
    np.testing.assert_allclose(mag[1:], mag[1:][::-1], atol=1e-12)


@given(p=finite_p, scale=st.floats(1e-6, 1e6))
def test_q_scale_invariant(p, scale):
    np.testing.assert_array_equal(order_parameter(p * scale, deadband=0.0), order_parameter(p, deadband=0.0))


@given(p=finite_p, extra=st.integers(0, 20))
def test_nc_stable_under_prefix(p, extra):
    q = order_parameter(p)
    full = critical_cycle_number(q)
    m = min(q.size, full.n_c + 1 + extra)
    assert critical_cycle_number(q[:m]).n_c == full.n_c


@pytest.mark.parametrize("eps", [0.05, 0.1, 0.2, -0.13])
def test_single_atom_first_flip_matches_cosine_zero(eps):
    n = np.arange(0, 400)
    p = (-1.0) ** (n + 1) * np.cos(2 * n * eps)
    first = critical_cycle_number(order_parameter(p)).n_c + 1
    assert abs(first - math.ceil(math.pi / (4 * abs(eps)))) <= 1
