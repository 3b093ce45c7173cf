import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qtrates.errors import DensityMatrixError, DimensionError, NotHermitianError, ProjectorError
from qtrates.operators import (TimeGrid, anticommutator, as_density_matrix, as_projector,
                               commutator, expm, format_matrix, hermitian_expm, mixedness,
                               parse_matrix, pauli, projector_onto, projector_rank, pure_state,
                               random_density_matrix, random_hermitian, random_state_in,
                               random_unitary, range_factor, taylor_expm, uhlmann_fidelity,
                               variance)


def test_pauli_algebra():
    sx, sy, sz = pauli()
    np.testing.assert_allclose(commutator(sx, sy), 2j * sz)
    np.testing.assert_allclose(anticommutator(sx, sx), 2 * np.eye(2))


def test_commutator_dimension_mismatch():
    with pytest.raises(DimensionError):
        commutator(np.eye(2), np.eye(3))


def test_hermitian_expm_matches_taylor_and_scipy():
    rng = np.random.default_rng(0)
    h = random_hermitian(rng, 4, 0.3)
    u = hermitian_expm(h, -1j * 0.7)
    np.testing.assert_allclose(u, taylor_expm(-0.7j * h, 30), atol=1e-13)
    np.testing.assert_allclose(u, expm(-0.7j * h), atol=1e-13)
    with pytest.raises(NotHermitianError):
        hermitian_expm(np.array([[0, 1], [0, 0]], complex), -1j)


def test_projector_validation():
    p = projector_onto([0, 2], dim=3)
    assert projector_rank(as_projector(p)) == 2
    with pytest.raises(ProjectorError):
        as_projector(np.diag([1.0, 0.5]))
    with pytest.raises(ProjectorError):
        as_projector(np.array([[1, 1], [0, 0]], complex))
    q = projector_onto(np.array([1.0, 1j, 0.0]))
    np.testing.assert_allclose(q @ q, q, atol=1e-14)


def test_density_matrix_validation():
    with pytest.raises(DensityMatrixError):
        as_density_matrix(np.diag([0.6, 0.6]))
    with pytest.raises(DensityMatrixError):
        as_density_matrix(np.diag([1.5, -0.5]))
    as_density_matrix(pure_state([1, 1j]))


def test_fidelity_known_values():
    a = pure_state([1, 0])
    b = pure_state([1, 1])
    assert uhlmann_fidelity(a, b) == pytest.approx(0.5, abs=1e-14)
    assert uhlmann_fidelity(a, np.eye(2) / 2) == pytest.approx(0.5, abs=1e-14)
    assert uhlmann_fidelity(a, pure_state([0, 1])) == 0.0


def test_mixedness_and_variance():
    assert mixedness(pure_state([1, 2])) == pytest.approx(0.0, abs=1e-7)
    assert mixedness(np.eye(2) / 2) == pytest.approx(np.sqrt(0.5))
    _, _, sz = pauli()
    assert variance(pure_state([1, 1]), sz) == pytest.approx(1.0)


def test_matrix_text_round_trip(tmp_path):
    rng = np.random.default_rng(3)
    m = random_hermitian(rng, 3)
    back = parse_matrix(format_matrix(m))
    np.testing.assert_array_equal(back, m)
    with pytest.raises(DimensionError):
        parse_matrix("dim 2\n1 2 3")


def test_time_grid():
    g = TimeGrid(0.0, 1.0, 4)
    np.testing.assert_allclose(g.samples, [0, 0.25, 0.5, 0.75, 1.0])
    with pytest.raises(ValueError):
        TimeGrid(1.0, 1.0, 3)


# -- properties ------------------------------------------------------------

seeds = st.integers(0, 2 ** 32 - 1)
dims = st.integers(2, 6)


@settings(max_examples=40, deadline=None)
@given(seeds, dims)
def test_fidelity_symmetric_and_bounded(seed, d):
    rng = np.random.default_rng(seed)
    rho = random_density_matrix(rng, d, rank=int(rng.integers(1, d + 1)))
    sigma = random_density_matrix(rng, d)
    f = uhlmann_fidelity(rho, sigma)
    assert 0.0 <= f <= 1.0
    assert f == pytest.approx(uhlmann_fidelity(sigma, rho), abs=1e-10)
    # super-fidelity upper bound tr(rho sigma) + sqrt(1-tr rho^2) sqrt(1-tr sigma^2)
    sf = np.trace(rho @ sigma).real + mixedness(rho) * mixedness(sigma)
    assert f <= sf + 1e-10


@settings(max_examples=40, deadline=None)
@given(seeds, dims)
def test_unitary_invariance_of_fidelity(seed, d):
    rng = np.random.default_rng(seed)
    rho, sigma = random_density_matrix(rng, d), random_density_matrix(rng, d)
    u = random_unitary(rng, d)
    f = uhlmann_fidelity(u @ rho @ u.conj().T, u @ sigma @ u.conj().T)
    assert f == pytest.approx(uhlmann_fidelity(rho, sigma), abs=1e-10)


@settings(max_examples=40, deadline=None)
@given(seeds, dims)
def test_range_factor_reconstructs(seed, d):
    rng = np.random.default_rng(seed)
    rho = random_density_matrix(rng, d, rank=int(rng.integers(1, d + 1)))
    f = range_factor(rho)
    np.testing.assert_allclose(f @ f.conj().T, rho, atol=1e-12)


@settings(max_examples=30, deadline=None)
@given(seeds, dims)
def test_random_state_in_projector_range(seed, d):
    rng = np.random.default_rng(seed)
    p = projector_onto(rng.normal(size=(d, 1)) + 1j * rng.normal(size=(d, 1)))
    rho = random_state_in(rng, p)
    np.testing.assert_allclose(p @ rho @ p, rho, atol=1e-12)
    assert np.trace(rho).real == pytest.approx(1.0)
