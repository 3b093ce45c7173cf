"""Speed limits for conditioned transitions.

* :func:`mt_rate_bound` -- ``|k| <= 2 dH sqrt(P (1 - P))``.
* :func:`superfidelity_qsl` -- super-fidelity upper bound on the fidelity
  between ``rho_A(tau)`` and the normalised target ``Pi_B / d_B`` and the
  resulting lower bound on the transition time.
* :func:`tightness_condition` -- when the target-based bound beats the
  Mandelstam--Tamm one.
* :func:`rate_change_bound` -- Robertson bound on ``dk/dt``.
* :func:`tau_qtr`, :func:`tau_mt` -- characteristic times.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from .engine import (_require_hamiltonian, qtr_direct, schrodinger_flux,
                     survival_probability, transition_probability)
from .errors import QtrError
from .operators import commutator, mixedness, uhlmann_fidelity, variance

SLACK_TOL = 1e-9


@dataclass
class BoundReport:
    """One instance of an inequality ``lhs <= rhs``.

    Attributes:
        t: evaluation time.
        lhs, rhs: the two sides.
        tag: which inequality.
        extras: auxiliary quantities (alternative right-hand sides, times).
    """

    t: float
    lhs: float
    rhs: float
    tag: str
    extras: dict = field(default_factory=dict)

    @property
    def slack(self):
        return self.rhs - self.lhs

    @property
    def satisfied(self):
        return self.slack >= -SLACK_TOL


def _clamped_arccos_sqrt(x, what):
    if x < -SLACK_TOL or x > 1 + SLACK_TOL:
        raise QtrError(f"arccos argument {what} = {x!r} outside [0, 1]")
    return math.acos(math.sqrt(min(max(x, 0.0), 1.0)))


def energy_dispersion(setup, t):
    """``Delta_{rho_A} H(t)`` = standard deviation of ``H_S(t)`` in ``rho_A(t)``."""
    rho = setup.evolved_state(t)
    return math.sqrt(variance(rho, setup.hamiltonian(t)))


def mean_energy_dispersion(setup, tau, steps=200):
    """Time average ``(1/tau) int_0^tau Delta H dt`` by composite Simpson."""
    span = tau - setup.t0
    if span <= 0:
        return energy_dispersion(setup, setup.t0)
    m = max(2, steps + steps % 2)
    ts = setup.t0 + np.linspace(0.0, span, m + 1)
    vals = np.array([energy_dispersion(setup, s) for s in ts])
    h = span / m
    integral = h / 3 * (vals[0] + vals[-1] + 4 * vals[1:-1:2].sum() + 2 * vals[2:-1:2].sum())
    return integral / span


def mt_rate_bound(setup, t):
    """Mandelstam--Tamm type rate bound ``|k| <= 2 dH sqrt(P(1-P))``."""
    _require_hamiltonian(setup)
    k = qtr_direct(setup, t)
    p = transition_probability(setup, t)
    dh = energy_dispersion(setup, t)
    rhs = 2.0 * dh * math.sqrt(max(p * (1.0 - p), 0.0))
    return BoundReport(t, abs(k), rhs, "mt_rate", {"P": p, "dH": dh})


def superfidelity_value(p, d_b, m_rho):
    """``P / d_B + M_rho sqrt(1 - 1/d_B)``."""
    return p / d_b + m_rho * math.sqrt(max(1.0 - 1.0 / d_b, 0.0))


def superfidelity_qsl(setup, tau, steps=200):
    """Super-fidelity speed limit at time ``tau``.

    The report's ``lhs``/``rhs`` are the exact Uhlmann fidelity
    ``F(rho_A(tau), Pi_B/d_B)`` and its super-fidelity bound.  The time bound
    ``arccos sqrt(SF) / <dH>`` is stored in ``extras['tau_bound']``.
    """
    _require_hamiltonian(setup)
    d_b = setup.d_b
    rho = setup.evolved_state(tau)
    p = transition_probability(setup, tau)
    m_rho = mixedness(rho)
    sf = superfidelity_value(p, d_b, m_rho)
    target = setup.pi_b / d_b
    fid = uhlmann_fidelity(rho, target)
    avg = mean_energy_dispersion(setup, tau, steps)
    angle = _clamped_arccos_sqrt(sf, "super-fidelity")
    if avg > 0:
        tau_bound = angle / avg
    else:
        tau_bound = 0.0 if angle == 0 else math.inf
    return BoundReport(tau, fid, sf, "superfidelity",
                       {"tau_bound": tau_bound, "avg_dH": avg, "P": p, "mixedness": m_rho,
                        "angle": angle})


def tau_mt(setup, tau, steps=200):
    """Mandelstam--Tamm time ``arccos sqrt(P(A,tau|A)) / <dH>``."""
    _require_hamiltonian(setup)
    if tau - setup.t0 <= 0:
        return 0.0
    angle = _clamped_arccos_sqrt(survival_probability(setup, tau), "survival")
    avg = mean_energy_dispersion(setup, tau, steps)
    if avg <= 0:
        return 0.0 if angle == 0 else math.inf
    return angle / avg


def tightness_condition(setup, t):
    """Whether the target-based angle exceeds the survival (MT) angle.

    Checks ``P(B,t|A) + d_B M_{rho_A(t)} sqrt(1 - 1/d_B) <= d_B P(A,t|A)``,
    which is equivalent to ``arccos sqrt(SF) >= arccos sqrt(P(A,t|A))``; both
    angles are reported and their ordering is asserted when satisfied.
    """
    _require_hamiltonian(setup)
    d_b = setup.d_b
    rho = setup.evolved_state(t)
    p_b = transition_probability(setup, t)
    p_a = survival_probability(setup, t)
    m_rho = mixedness(rho)
    lhs = p_b + d_b * m_rho * math.sqrt(max(1.0 - 1.0 / d_b, 0.0))
    rhs = d_b * p_a
    qtr_angle = _clamped_arccos_sqrt(lhs / d_b, "super-fidelity")
    mt_angle = _clamped_arccos_sqrt(p_a, "survival")
    rep = BoundReport(t, lhs, rhs, "tightness",
                      {"qtr_angle": qtr_angle, "mt_angle": mt_angle, "P_AA": p_a, "P_AB": p_b})
    if rep.slack > SLACK_TOL and qtr_angle < mt_angle - SLACK_TOL:
        raise QtrError("tightness reported but the target-based angle is smaller")
    return rep


def qtr_derivative(setup, t):
    """``dk/dt = tr[rho_A(-i[J_B(t), H(t)] - i[Pi_B(t), dH(t)/dt])]``.

    Evaluated in the Schrodinger picture with the evolved state; exact for the
    propagated state, no differencing of ``k`` needed.
    """
    _require_hamiltonian(setup)
    rho = setup.evolved_state(t)
    h = setup.hamiltonian(t)
    hdot = setup.dynamics.derivative(t)
    j = schrodinger_flux(setup, t)
    op = -1j * commutator(j, h) - 1j * commutator(setup.pi_b, hdot)
    return float(np.einsum("ij,ji->", rho, op).real)


def rate_change_bound(setup, t):
    """Robertson bound on the rate of change of the QTR.

    ``|dk/dt| <= 2 (dJ dH + dPi dHdot)``; the half-size right-hand side is
    reported in ``extras['rhs_factor1']`` for comparison.
    """
    _require_hamiltonian(setup)
    rho = setup.evolved_state(t)
    h = setup.hamiltonian(t)
    hdot = setup.dynamics.derivative(t)
    j = schrodinger_flux(setup, t)
    d_j = math.sqrt(variance(rho, j))
    d_h = math.sqrt(variance(rho, h))
    d_pi = math.sqrt(variance(rho, setup.pi_b))
    d_hdot = math.sqrt(variance(rho, hdot))
    kdot = qtr_derivative(setup, t)
    rhs1 = d_j * d_h + d_pi * d_hdot
    return BoundReport(t, abs(kdot), 2.0 * rhs1, "rate_change",
                       {"rhs_factor1": rhs1, "kdot": kdot, "dJ": d_j, "dH": d_h})


def tau_qtr(setup, t, threshold=1e-12):
    """Characteristic time ``Delta J_B / |dk/dt|``.

    Raises:
        QtrError: "stationary rate" when ``|dk/dt| <= threshold``.
    """
    kdot = qtr_derivative(setup, t)
    if abs(kdot) <= threshold:
        raise QtrError(f"stationary rate at t={t}: |dk/dt| = {abs(kdot):.3e}")
    rho = setup.evolved_state(t)
    d_j = math.sqrt(variance(rho, schrodinger_flux(setup, t)))
    return d_j / abs(kdot)
