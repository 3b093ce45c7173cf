import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qtrates.errors import ConvergenceError, NotHermitianError, QtrError
from qtrates.evolution import (HamiltonianSchedule, KrausFamily, LindbladGenerator,
                               ZenoSchedule, adaptive_propagator, dephasing_family,
                               dilation_family, heisenberg_observable, kraus_apply,
                               lindblad_heisenberg_step, propagator, unitary_family,
                               zeno_state)
from qtrates.models.tls import driven_tls_schedule
from qtrates.operators import pauli, pure_state, random_density_matrix, random_hermitian


def test_static_propagator_is_exact():
    sx, _, _ = pauli()
    u = propagator(HamiltonianSchedule.static(sx), 0.0, 0.3, 1)
    np.testing.assert_allclose(u, np.cos(0.3) * np.eye(2) - 1j * np.sin(0.3) * sx, atol=1e-15)


def test_magnus4_converges_at_fourth_order():
    sched = driven_tls_schedule(-1.0, 2.0, 0.5)
    ref = propagator(sched, 0.0, 1.0, 2048, order=4)
    e1 = np.abs(propagator(sched, 0.0, 1.0, 8, order=4) - ref).max()
    e2 = np.abs(propagator(sched, 0.0, 1.0, 16, order=4) - ref).max()
    assert 12 < e1 / e2 < 20
    m1 = np.abs(propagator(sched, 0.0, 1.0, 16, order=2) - ref).max()
    m2 = np.abs(propagator(sched, 0.0, 1.0, 32, order=2) - ref).max()
    assert 3 < m1 / m2 < 5


def test_adaptive_propagator_and_failure():
    sched = driven_tls_schedule(0.0, 3.0, 1.0)
    u, steps = adaptive_propagator(sched, 0.0, 1.0, tol=1e-10, order=4)
    np.testing.assert_allclose(u @ u.conj().T, np.eye(2), atol=1e-12)
    assert steps >= 16
    with pytest.raises(ConvergenceError):
        adaptive_propagator(sched, 0.0, 1.0, tol=1e-30, max_steps=64)


def test_schedule_rejects_non_hermitian():
    with pytest.raises(NotHermitianError):
        HamiltonianSchedule(lambda t: np.array([[0, 1], [0, 0]], complex))
    with pytest.raises(QtrError):
        driven_tls_schedule(0, 1, 1).eigensystem


def test_numeric_derivative_matches_analytic():
    h0, h1 = random_hermitian(np.random.default_rng(1), 3), random_hermitian(np.random.default_rng(2), 3)
    numeric = HamiltonianSchedule(lambda t: h0 + t * t * h1)
    np.testing.assert_allclose(numeric.derivative(0.7), 1.4 * h1, atol=1e-8)


def test_heisenberg_observable_equals_evolved_expectation():
    rng = np.random.default_rng(4)
    sched = driven_tls_schedule(0.2, 1.0, 0.7)
    rho = random_density_matrix(rng, 2)
    _, _, sz = pauli()
    u = propagator(sched, 0.0, 0.8, 200, order=4)
    lhs = np.trace(rho @ heisenberg_observable(sched, sz, 0.8, 200, order=4))
    rhs = np.trace(u @ rho @ u.conj().T @ sz)
    assert lhs == pytest.approx(rhs, abs=1e-12)


def test_zeno_selective_and_nonselective():
    sx, _, _ = pauli()
    sched = HamiltonianSchedule.static(sx)
    p0 = np.diag([1.0, 0.0]).astype(complex)
    rho0 = pure_state([1, 0])
    rho, w = zeno_state(sched, ZenoSchedule(p0, 100, 1.0), rho0)
    assert w == pytest.approx(np.cos(0.01) ** 200, rel=1e-12)
    rho, w = zeno_state(sched, ZenoSchedule(p0, 100, 1.0, selective=False), rho0)
    assert w == pytest.approx(1.0)
    with pytest.raises(ValueError):
        ZenoSchedule(p0, 0, 1.0)


def test_lindblad_forms_agree():
    rng = np.random.default_rng(5)
    h = random_hermitian(rng, 3)
    jumps = [rng.normal(size=(3, 3)) + 1j * rng.normal(size=(3, 3)) for _ in range(2)]
    gen = LindbladGenerator(h, jumps, [0.3, 0.1])
    rho = random_density_matrix(rng, 3)
    obs = random_hermitian(rng, 3)
    np.testing.assert_allclose(gen.superoperator @ rho.reshape(-1), gen.apply(rho).reshape(-1),
                               atol=1e-12)
    # duality tr(O L[rho]) = tr(L^dag[O] rho)
    assert np.trace(obs @ gen.apply(rho)) == pytest.approx(np.trace(gen.adjoint(obs) @ rho))
    t = 0.4
    lhs = np.trace(obs @ gen.evolve_state(rho, t))
    rhs = np.trace(gen.evolve_observable(obs, t) @ rho)
    assert lhs == pytest.approx(rhs, abs=1e-12)
    o = obs.copy()
    for _ in range(400):
        o = lindblad_heisenberg_step(gen, o, t / 400)
    np.testing.assert_allclose(o, gen.evolve_observable(obs, t), atol=1e-9)
    with pytest.raises(ValueError):
        LindbladGenerator(h, jumps, [0.3, -0.1])


def test_kraus_families():
    fam = dephasing_family(0.2)
    rho = pure_state([1, 1])
    out = kraus_apply(fam, rho, 0.0)
    assert out[0, 1] == pytest.approx(0.5 * 0.6)
    bad = KrausFamily(lambda t: [np.eye(2) * 1.1])
    with pytest.raises(QtrError):
        kraus_apply(bad, rho, 0.0)
    sx, _, _ = pauli()
    uf = unitary_family(HamiltonianSchedule.static(sx))
    np.testing.assert_allclose(uf.operators(0.5)[0], propagator(HamiltonianSchedule.static(sx),
                                                               0.0, 0.5, 1))


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2 ** 32 - 1), st.floats(0.0, 3.0))
def test_dilation_family_is_trace_preserving(seed, t):
    rng = np.random.default_rng(seed)
    fam = dilation_family(random_hermitian(rng, 6), 3, 2)
    assert fam.completeness_error(t) < 1e-12
    rho = random_density_matrix(rng, 3)
    out = kraus_apply(fam, rho, t)
    assert np.trace(out).real == pytest.approx(1.0, abs=1e-12)
    assert np.linalg.eigvalsh(0.5 * (out + out.conj().T)).min() > -1e-12


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2 ** 32 - 1), st.floats(0.0, 2.0))
def test_lindblad_preserves_trace_and_positivity(seed, t):
    rng = np.random.default_rng(seed)
    gen = LindbladGenerator(random_hermitian(rng, 3),
                            [rng.normal(size=(3, 3)) for _ in range(2)], [0.5, 0.2])
    out = gen.evolve_state(random_density_matrix(rng, 3), t)
    assert np.trace(out).real == pytest.approx(1.0, abs=1e-10)
    assert np.linalg.eigvalsh(0.5 * (out + out.conj().T)).min() > -1e-10
