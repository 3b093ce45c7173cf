import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qtrates.counterdiabatic import (ParametricPath, build_spectral_path, cd_hamiltonian,
                                     cd_propagator, geometric_bound, geometric_tensor,
                                     qtr_under_cd)
from qtrates.errors import DegeneracyError, QtrError
from qtrates.evolution import HamiltonianSchedule, propagator
from qtrates.operators import TimeGrid, pauli, variance

SX, SY, SZ = pauli()


def tls_family(w=1.0):
    return lambda lam: lam[0] * SZ + w * SX


def tls_path(lam0=-2.0, rate=2.0, w=1.0):
    return ParametricPath(tls_family(w), lambda t: [lam0 + rate * t], lambda t: [rate])


def test_geometric_tensor_tls_closed_form():
    lam, w = 0.7, 1.3
    q = geometric_tensor(tls_family(w), [lam])
    # Bloch angle theta = atan2(w, lam): g = (d theta / d lam)^2 / 4
    expected = (w / (lam * lam + w * w)) ** 2 / 4
    np.testing.assert_allclose(q.g[:, 0, 0], [expected, expected], rtol=1e-6)
    np.testing.assert_allclose(q.curvature, 0.0, atol=1e-8)


def test_cd_hamiltonian_tls_closed_form():
    # H1 = (1/2) (d theta/dt) sigma_y up to sign convention of the eigenbasis
    path = build_spectral_path(tls_path(), TimeGrid(0.0, 2.0, 400))
    t = 0.6
    lam = -2.0 + 2.0 * t
    theta_dot = -2.0 * 1.0 / (lam * lam + 1.0)
    h1 = cd_hamiltonian(path, t)
    assert abs(np.trace(h1 @ SY).real / 2) == pytest.approx(abs(theta_dot) / 2, rel=1e-6)
    assert abs(np.trace(h1 @ SX)) < 1e-8 and abs(np.trace(h1 @ SZ)) < 1e-8


def test_transitionless_and_propagation():
    grid = TimeGrid(0.0, 2.0, 800)
    path = build_spectral_path(tls_path(), grid)
    sched = HamiltonianSchedule(lambda t: path.schedule(t) + cd_hamiltonian(path, t))
    for t in (0.5, 1.0, 2.0):
        u_cd = cd_propagator(path, t)
        _, vt = path.eig(t)
        overlaps = np.abs(np.einsum("in,ij,jn->n", vt.conj(), u_cd, path.vectors[0]))
        np.testing.assert_allclose(overlaps, 1.0, atol=1e-12)
        u_num = propagator(sched, 0.0, t, 400, order=4)
        np.testing.assert_allclose(u_num, u_cd, atol=1e-5)


def test_qtr_under_cd_matches_finite_difference():
    path = build_spectral_path(tls_path(), TimeGrid(0.0, 2.0, 2000))
    rho = np.diag([1.0, 0.0]).astype(complex)
    pi_b = np.diag([0.0, 1.0]).astype(complex)
    t, h = 0.9, 1e-4
    p, k = qtr_under_cd(path, rho, pi_b, t)
    fd = (qtr_under_cd(path, rho, pi_b, t + h)[0] - qtr_under_cd(path, rho, pi_b, t - h)[0]) / (2 * h)
    assert k == pytest.approx(fd, abs=1e-6)
    assert 0.0 <= p <= 1.0


def test_geometric_bound_and_variance_identity():
    path = build_spectral_path(tls_path(), TimeGrid(0.0, 2.0, 400))
    rho = path.vectors[0][:, [0]] @ path.vectors[0][:, [0]].conj().T
    pi_b = np.diag([0.0, 1.0]).astype(complex)
    for t in np.linspace(0.1, 1.9, 7):
        rep = geometric_bound(path, rho, pi_b, t)
        assert rep.satisfied
        assert rep.extras["diagonal"]
        assert rep.extras["variance_identity"] < 1e-7
        assert rep.lhs <= rep.extras["intermediate"] + 1e-9


def test_degenerate_crossing_raises():
    sched = HamiltonianSchedule(lambda t: (t - 0.5) * SZ)
    with pytest.raises(DegeneracyError):
        build_spectral_path(sched, TimeGrid(0.0, 1.0, 4))


def test_geometric_bound_needs_parametric_path():
    path = build_spectral_path(HamiltonianSchedule(lambda t: t * SZ + SX), TimeGrid(0, 1, 10))
    with pytest.raises(QtrError):
        geometric_bound(path, np.diag([1.0, 0]), np.diag([0, 1.0]), 0.5)


@settings(max_examples=15, deadline=None)
@given(st.floats(-3, -0.5), st.floats(0.5, 3), st.floats(0.3, 2), st.floats(0.05, 1.0))
def test_variance_identity_property(lam0, rate, w, frac):
    path = build_spectral_path(tls_path(lam0, rate, w), TimeGrid(0.0, 1.0, 100))
    t = frac
    h1 = cd_hamiltonian(path, t)
    hcd = path.schedule(t) + h1
    _, vt = path.eig(t)
    for n in range(2):
        state = np.outer(vt[:, n], vt[:, n].conj())
        assert variance(state, hcd) == pytest.approx(np.trace(state @ h1 @ h1).real, abs=1e-7)
    assert math.isfinite(float(np.linalg.norm(h1)))
