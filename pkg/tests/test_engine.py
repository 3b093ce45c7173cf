import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qtrates import engine
from qtrates.engine import (TransitionSetup, ZenoDynamics, channel_qtr,
                            check_flux_flux_preconditions, compute_series, condition_state,
                            flux_flux_correlator, qtr, qtr_direct, qtr_finite_difference,
                            qtr_from_flux_flux, qtr_general_fluxflux, survival_probability,
                            transition_probability, zeno_quadratic_coefficient)
from qtrates.errors import (BoundaryError, EmptyConditioningError, PreconditionError,
                            QtrError)
from qtrates.evolution import HamiltonianSchedule, LindbladGenerator, dephasing_family
from qtrates.models.tls import TlsModel, driven_tls_schedule, tls_closed_forms, tls_setup
from qtrates.operators import TimeGrid, pauli, pure_state
from qtrates.sweeps import KINDS, make_rng, oracle_deviations, random_setup

GRID = TimeGrid(0.0, 2.0, 20)
P0 = np.diag([1.0, 0.0]).astype(complex)
P1 = np.diag([0.0, 1.0]).astype(complex)


def test_conditioning():
    rho = np.diag([0.25, 0.75]).astype(complex)
    rho_a, p_a = condition_state(rho, P0)
    assert p_a == pytest.approx(0.25)
    np.testing.assert_allclose(rho_a, P0)
    with pytest.raises(EmptyConditioningError):
        condition_state(pure_state([0, 1]), P0)


def test_overlapping_projectors_rejected():
    sx, _, _ = pauli()
    with pytest.raises(PreconditionError) as exc:
        TransitionSetup(P0, P0, np.eye(2), HamiltonianSchedule.static(sx), GRID)
    assert exc.value.flag == "disjoint"


@pytest.mark.parametrize("path", ["direct", "finite_difference", "flux_flux", "general"])
def test_tls_routes_match_closed_form(path):
    m = TlsModel(0.4, 0.9)
    s = tls_setup(m, t_end=3.0, n_steps=6)
    for t in (0.3, 1.1, 2.5):
        _, p, k = tls_closed_forms(m, t)
        assert transition_probability(s, t) == pytest.approx(p, abs=1e-13)
        assert survival_probability(s, t) == pytest.approx(1 - p, abs=1e-13)
        assert qtr(s, t, path) == pytest.approx(k, abs=1e-7 if path == "finite_difference" else 1e-9)


def test_unknown_path():
    with pytest.raises(ValueError):
        qtr(tls_setup(TlsModel(0, 1)), 0.5, "bogus")


def test_finite_difference_boundary():
    s = tls_setup(TlsModel(0.0, 1.0))
    with pytest.raises(BoundaryError):
        qtr_finite_difference(s, 0.0)
    # the series helper falls back to a one-sided stencil at t0
    series = compute_series(s, "finite_difference", [0.0, 0.1])
    assert series.k[0] == pytest.approx(0.0, abs=1e-7)


def test_flux_flux_preconditions():
    sx, _, sz = pauli()
    h = np.kron(sx, np.eye(2)) + 0.3 * np.kron(sz, sz)
    pa = np.diag([1, 0, 0, 0]).astype(complex)
    pb = np.diag([0, 0, 1, 0]).astype(complex)
    s = TransitionSetup(pa, pa, pb, HamiltonianSchedule.static(h), GRID)
    with pytest.raises(PreconditionError) as exc:
        check_flux_flux_preconditions(s)
    assert exc.value.flag == "complementary"
    # the general four-term route has no such restriction
    assert qtr_general_fluxflux(s, 0.8) == pytest.approx(qtr_finite_difference(s, 0.8), abs=1e-7)


def test_flux_flux_correlator_at_equal_times_is_positive():
    s = tls_setup(TlsModel(0.3, 1.0))
    assert flux_flux_correlator(s, 0.0, 0.0) > 0


def test_driven_routes_agree():
    s = TransitionSetup(P0, P0, P1, driven_tls_schedule(-1.0, 2.0, 0.6), GRID)
    for t in (0.4, 1.3):
        fd = qtr_finite_difference(s, t)
        assert qtr_direct(s, t) == pytest.approx(fd, abs=1e-7)
        assert qtr_general_fluxflux(s, t) == pytest.approx(fd, abs=1e-7)


def test_lindblad_and_kraus_channel_rates():
    sx, _, sz = pauli()
    lind = TransitionSetup(P0, P0, P1, LindbladGenerator(sx, [sz], [0.3]), GRID)
    assert channel_qtr(lind, 0.7) == pytest.approx(qtr_finite_difference(lind, 0.7), abs=1e-7)
    # pure dephasing of a population never moves it
    kr = TransitionSetup(P0, P0, P1, dephasing_family(lambda t: 0.5 * math.sin(t) ** 2), GRID)
    assert channel_qtr(kr, 0.7) == pytest.approx(0.0, abs=1e-12)
    with pytest.raises(QtrError):
        qtr_direct(kr, 0.7)


def test_zeno_dynamics_probability_and_coefficient():
    sx, _, _ = pauli()
    sched = HamiltonianSchedule.static(sx)
    s = TransitionSetup(P0, P0, P1, ZenoDynamics(sched, P1, 1000), TimeGrid(0, 1, 1))
    assert transition_probability(s, 1.0) < 1e-3 * math.sin(1.0) ** 2
    assert zeno_quadratic_coefficient(s) == pytest.approx(1.0)
    with pytest.raises(QtrError):
        channel_qtr(s, 0.5)


def test_driven_quadratic_coefficient_double_integral():
    sched = driven_tls_schedule(0.0, 0.0, 1.0)  # static in disguise
    s = TransitionSetup(P0, P0, P1, sched, TimeGrid(0, 1e-3, 1))
    assert zeno_quadratic_coefficient(s, 1e-3) == pytest.approx(1.0, rel=1e-12)
    t = 1e-3
    assert transition_probability(s, t) / t ** 2 == pytest.approx(1.0, rel=1e-5)


def test_series_csv(tmp_path):
    s = tls_setup(TlsModel(0.0, 1.0), t_end=1.0, n_steps=4)
    series = compute_series(s)
    text = series.to_csv(tmp_path / "s.csv")
    assert text.splitlines()[0] == "t,P_AB,k_AB"
    assert len(text.splitlines()) == 6


def test_characteristic_time_cached():
    s = tls_setup(TlsModel(0.0, 1.0))
    assert engine.characteristic_time(s) == pytest.approx(math.pi)
    assert engine.characteristic_time(s) is engine.characteristic_time(s)


# -- property: every applicable route matches finite differences -----------------

@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2 ** 63 - 1), st.sampled_from(KINDS), st.integers(2, 5),
       st.floats(0.2, 1.0))
def test_routes_match_finite_difference(seed, kind, dim, t):
    setup = random_setup(make_rng(seed), kind, dim)
    p = transition_probability(setup, t)
    assert -1e-12 <= p <= 1 + 1e-12
    for route, dev in oracle_deviations(setup, t).items():
        assert dev <= 1e-5, route


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2 ** 63 - 1), st.integers(2, 6), st.floats(0.0, 3.0))
def test_complementary_probabilities_sum_to_one(seed, dim, t):
    setup = random_setup(make_rng(seed), "stationary", dim)
    assert transition_probability(setup, t) + survival_probability(setup, t) == pytest.approx(1.0)
    assert qtr_from_flux_flux(setup, t) == pytest.approx(qtr_direct(setup, t), abs=1e-7)
