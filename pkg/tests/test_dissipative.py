import math

import numpy as np
import pytest

from rydberg_dtc import dissipative
from rydberg_dtc.dissipative import (
    DensityState,
    StagePropagatorSuper,
    build_liouvillian,
    compile_stages,
    envelope,
    evolve_density,
    fit_decay,
    stage_propagator,
)
from rydberg_dtc.errors import DimensionCapError, NoSignalError, TraceDriftError
from rydberg_dtc.floquet import Mode, compile_cycle, evolve
from rydberg_dtc.model import ModelParams, Stage

FIG_SET = dict(epsilon=-0.1, v=0.1, delta=0.0, t2=15.0)


@pytest.mark.parametrize(
    "params",
    [
        ModelParams(L=1, epsilon=0.2, delta=0.3),
        ModelParams(L=2, epsilon=0.1, delta=-0.4, v=0.2, t2=7, variant="improved"),
        ModelParams(L=3, epsilon=-0.3, delta=0.2, v=0.1, t2=12, variant="simplified"),
        ModelParams(L=4, epsilon=0.1, v=0.1, t2=10),
    ],
)
def test_no_decay_reproduces_unitary(params):
    lind = evolve_density(params, 200).trajectory.p
    unitary = evolve(compile_cycle(params, spectral=True), 200, mode=Mode.SPECTRAL).p
    assert np.max(np.abs(lind - unitary)) < 1e-8


def test_commutator_superoperator_on_pure_state():
    p = ModelParams(L=2, epsilon=0.3, delta=0.1, v=0.2)
    prop = stage_propagator(build_liouvillian(p, Stage.ONE), p.t1)
    u1 = compile_cycle(p).u1
    psi = np.array([0.6, 0.0, 0.8j, 0.0])
    rho = DensityState.pure(psi)
    np.testing.assert_allclose(
        (prop.matrix @ rho.rho_vec).reshape(4, 4), np.outer(u1 @ psi, (u1 @ psi).conj()), atol=1e-12
    )


@pytest.mark.parametrize("gamma, t", [(0.05, 3.0), (0.01, 16.0), (1.0, 0.7)])
def test_single_atom_amplitude_damping(gamma, t):
    # omega = pi/2 + epsilon = 0 switches the drive off
    p = ModelParams(L=1, epsilon=-math.pi / 2, gamma=gamma)
    prop = stage_propagator(build_liouvillian(p, Stage.ONE), t)
    rho = DensityState.from_matrix(np.array([[0.3, 0.2 - 0.1j], [0.2 + 0.1j, 0.7]]))
    out = DensityState(prop.matrix @ rho.rho_vec).matrix()
    assert out[1, 1].real == pytest.approx(0.7 * math.exp(-gamma * t), abs=1e-12)
    assert abs(out[0, 1]) == pytest.approx(abs(0.2 - 0.1j) * math.exp(-gamma * t / 2), abs=1e-12)


@pytest.mark.parametrize("L", [1, 2, 3])
@pytest.mark.parametrize("stage", [Stage.ONE, Stage.TWO])
def test_liouvillian_structure(L, stage):
    p = ModelParams(L=L, epsilon=0.2, delta=0.3, v=0.1, gamma=0.05)
    liou = build_liouvillian(p, stage)
    identity = np.eye(p.dim).ravel()
    assert np.max(np.abs(identity @ liou)) < 1e-12
    eig = np.linalg.eigvals(liou)
    assert eig.real.max() <= 1e-9
    assert np.min(np.abs(eig)) < 1e-10


def test_trace_and_hermiticity_preserved():
    res = evolve_density(ModelParams(L=3, gamma=0.01, **FIG_SET), 150, check_every=25)
    assert res.max_trace_drift < 1e-8
    assert res.max_hermiticity_error < 1e-8
    assert res.min_eigenvalue > -1e-8
    assert res.final_state.trace() == pytest.approx(1.0, abs=1e-8)


def test_small_decay_continuity():
    base = ModelParams(L=3, **FIG_SET)
    p0 = evolve_density(base, 20).trajectory.p
    d4 = np.max(np.abs(evolve_density(base.replace(gamma=1e-4), 20).trajectory.p - p0))
    d5 = np.max(np.abs(evolve_density(base.replace(gamma=1e-5), 20).trajectory.p - p0))
    assert d4 / d5 == pytest.approx(10.0, rel=0.05)


@pytest.mark.parametrize("gamma, cycles", [(0.01, 14), (0.001, 100)])
def test_oscillation_persists_under_decay(gamma, cycles):
    p = evolve_density(ModelParams(L=4, gamma=gamma, **FIG_SET), cycles).trajectory.p
    n = np.arange(p.size)
    assert np.all((-1.0) ** (n[1:] + 1) * p[1:] > 0)
    _, env = envelope(p, (0, 14))
    assert np.all(np.diff(env) < 0)


def test_expm_fallback_agrees(monkeypatch):
    p = ModelParams(L=2, epsilon=0.1, delta=0.2, v=0.1, gamma=0.02)
    eig = compile_stages(p)
    monkeypatch.setattr(dissipative, "EIG_COND_LIMIT", 0.0)
    fallback = compile_stages(p)
    assert {s.method for s in eig} == {"eig"}
    assert {s.method for s in fallback} == {"expm"}
    for a, b in zip(eig, fallback):
        np.testing.assert_allclose(a.matrix, b.matrix, atol=1e-10)


def test_trace_drift_aborts():
    p = ModelParams(L=1, epsilon=0.1, gamma=0.01)
    one, two = compile_stages(p)
    leaky = StagePropagatorSuper(Stage.TWO, two.matrix * 0.999, "eig")
    with pytest.raises(TraceDriftError):
        evolve_density(p, 5, stages=(one, leaky))


def test_negative_state_warns():
    rho = DensityState.from_matrix(np.diag([1.5, -0.5]).astype(complex))
    with pytest.warns(RuntimeWarning):
        res = evolve_density(ModelParams(L=1, epsilon=0.1), 3, rho)
    assert res.warnings


def test_dimension_cap():
    with pytest.raises(DimensionCapError):
        build_liouvillian(ModelParams(L=8, gamma=0.01), Stage.ONE)
    with pytest.raises(DimensionCapError):
        evolve_density(ModelParams(L=4), 5, max_atoms=3)


def test_density_state_helpers():
    s = DensityState.ground(2)
    assert s.dim == 4 and s.trace() == 1
    np.testing.assert_array_equal(s.populations(), [1, 0, 0, 0])
    assert s.hermiticity_error() == 0
    with pytest.raises(ValueError):
        DensityState(np.ones(5))


def test_fit_exact_exponential():
    n = np.arange(0, 300)
    p = (-1.0) ** (n + 1) * np.exp(-0.01 * n)
    fit = fit_decay(p)
    assert fit.alpha == pytest.approx(0.01, abs=1e-6)
    assert fit.window == (10, 299)
    assert fit.n_points >= 5


def test_fit_window_and_block_maxima():
    n = np.arange(0, 101)
    p = 0.5 * np.exp(-0.03 * n) * np.cos(np.pi * n)
    fit = fit_decay(p, window=(0, 60))
    assert fit.alpha == pytest.approx(0.03, abs=1e-9)
    assert fit.log_amplitude == pytest.approx(math.log(0.5), abs=1e-9)
    assert fit.to_dict()["window"] == [0, 60]


def test_fit_no_signal():
    with pytest.raises(NoSignalError):
        fit_decay(np.zeros(100))
    with pytest.raises(NoSignalError):
        fit_decay(np.full(100, 1e-12))


def test_fit_window_validation():
    with pytest.raises(ValueError):
        fit_decay(np.ones(20), window=(15, 40))
