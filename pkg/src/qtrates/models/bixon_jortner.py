"""Isolated level coupled uniformly to an equidistant quasi-continuum.

In the continuum limit the isolated amplitude decays as ``exp(-gamma t)``
with ``gamma = pi W^2 / Delta`` and the population of a continuum energy
window ``[E0, E1]`` has a closed form in terms of the exponential integral.
"""

import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import quad

from ..engine import TransitionSetup
from ..errors import EmptyConditioningError, QtrError
from ..evolution import HamiltonianSchedule
from ..operators import TimeGrid
from ..special import ei_entire_part, exp_integral_ei

LAYOUTS = ("symmetric", "skip_zero")


@dataclass(frozen=True)
class BixonJortnerModel:
    """Parameters of the quasi-continuum model.

    Attributes:
        delta: level spacing ``Delta > 0``.
        w: uniform coupling ``W``.
        n: number of quasi-continuum levels (even) for the discrete variant.
        e0, e1: target energy window, ``e0 < e1``.
        layout: ``"symmetric"`` puts continuum levels at ``n Delta`` for every
            integer ``|n| <= N/2`` (including ``n = 0``, so ``N + 1`` levels);
            ``"skip_zero"`` omits ``n = 0`` (``N`` levels).
    """

    delta: float
    w: float
    e0: float
    e1: float
    n: int = 2000
    layout: str = "symmetric"

    def __post_init__(self):
        if not self.delta > 0:
            raise ValueError("level spacing must be positive")
        if not self.e0 < self.e1:
            raise ValueError("energy window needs e0 < e1")
        if self.n < 2 or self.n % 2:
            raise ValueError("N must be an even integer >= 2")
        if self.layout not in LAYOUTS:
            raise ValueError(f"layout must be one of {LAYOUTS}")

    @property
    def gamma(self):
        return math.pi * self.w ** 2 / self.delta

    def continuum_levels(self):
        idx = np.arange(-self.n // 2, self.n // 2 + 1)
        if self.layout == "skip_zero":
            idx = idx[idx != 0]
        return idx * self.delta

    def window_mask(self):
        e = self.continuum_levels()
        return (e >= self.e0) & (e <= self.e1)

    def effective_window(self):
        """Continuum window matching the discrete target: each included level
        stands for a cell of width ``Delta`` centred on it."""
        e = self.continuum_levels()[self.window_mask()]
        if e.size == 0:
            raise EmptyConditioningError("no quasi-continuum level inside the window")
        return float(e.min() - self.delta / 2), float(e.max() + self.delta / 2)

    def with_window(self, e0, e1):
        return BixonJortnerModel(self.delta, self.w, e0, e1, self.n, self.layout)


def bj_hamiltonian(m):
    """Dense Hamiltonian; index 0 is the isolated level at energy 0."""
    lev = m.continuum_levels()
    d = lev.size + 1
    h = np.zeros((d, d))
    h[np.arange(1, d), np.arange(1, d)] = lev
    h[0, 1:] = m.w
    h[1:, 0] = m.w
    return h


def bj_discrete_setup(m, t_end=1.0, n_steps=100, schedule=None):
    """Generic-engine setup: ``rho0 = |0><0|``, ``Pi_B`` onto window levels.

    Passing the ``schedule`` of an earlier setup with the same ``Delta, W, N``
    reuses its cached eigendecomposition (windows differ only in ``Pi_B``).
    """
    if schedule is None:
        schedule = HamiltonianSchedule.static(bj_hamiltonian(m))
    d = schedule.dim
    mask = m.window_mask()
    if not mask.any():
        raise EmptyConditioningError("no quasi-continuum level inside the window")
    rho0 = np.zeros((d, d), dtype=complex)
    rho0[0, 0] = 1.0
    pi_b = np.zeros((d, d), dtype=complex)
    idx = 1 + np.flatnonzero(mask)
    pi_b[idx, idx] = 1.0
    return TransitionSetup(rho0, rho0.copy(), pi_b, schedule, TimeGrid(0.0, t_end, n_steps))


def _arctan_window(m, e0, e1):
    g = m.gamma
    return math.atan(e1 / g) - math.atan(e0 / g)


def _window(m, window):
    return (m.e0, m.e1) if window is None else (float(window[0]), float(window[1]))


def bj_closed_P(m, t, window=None):
    """Closed-form window population ``P(B,t|A)`` in the continuum limit.

    With ``D = arctan(E1/g) - arctan(E0/g)``::

        pi P = (1 + e^{-2gt}) D - Im[e^{-2gt} F+ - F-],
        F+ = Ei(t(g + iE1)) - Ei(t(g + iE0)),
        F- = Ei(t(-g + iE1)) - Ei(t(-g + iE0))

    where ``F-`` is continued along the path ``Re = -g t`` (it crosses the
    branch cut of ``Ei`` when the window contains ``E = 0``).

    Args:
        window: optional ``(E0, E1)`` overriding the model's window.
    """
    e0, e1 = _window(m, window)
    t = float(t)
    if t < 0:
        raise ValueError("t must be non-negative")
    if t == 0.0 or m.w == 0.0:
        return 0.0
    g = m.gamma
    d = _arctan_window(m, e0, e1)
    fp = exp_integral_ei(t * complex(g, e1)) - exp_integral_ei(t * complex(g, e0))
    im_fm = (ei_entire_part(t * complex(-g, e1)).imag
             - ei_entire_part(t * complex(-g, e0)).imag - d)
    decay = math.exp(-2.0 * g * t)
    return ((1.0 + decay) * d - (decay * fp.imag - im_fm)) / math.pi


def bj_closed_k(m, t, window=None):
    """Closed-form QTR ``dP/dt = (2g/pi) e^{-2gt} [Im F+ - D]``."""
    e0, e1 = _window(m, window)
    t = float(t)
    if t < 0:
        raise ValueError("t must be non-negative")
    if t == 0.0 or m.w == 0.0:
        return 0.0
    g = m.gamma
    d = _arctan_window(m, e0, e1)
    fp = exp_integral_ei(t * complex(g, e1)) - exp_integral_ei(t * complex(g, e0))
    return 2.0 * g / math.pi * math.exp(-2.0 * g * t) * (fp.imag - d)


def bj_quadrature_P(m, t, window=None):
    """Oracle: ``int |c_f(t)|^2 dE / Delta`` by adaptive quadrature.

    ``|c_f|^2 = W^2 (1 - 2 e^{-gt} cos(Et) + e^{-2gt}) / (g^2 + E^2)``; the
    oscillatory part uses QUADPACK's cosine weight.
    """
    e0, e1 = _window(m, window)
    t = float(t)
    g = m.gamma
    pref = m.w ** 2 / m.delta
    base = (1.0 + math.exp(-2.0 * g * t)) * _arctan_window(m, e0, e1) / g
    if t == 0.0:
        osc = 2.0 * _arctan_window(m, e0, e1) / g
    else:
        osc, _ = quad(lambda x: 1.0 / (g * g + x * x), e0, e1, weight="cos", wvar=t,
                      epsabs=1e-14, epsrel=1e-13, limit=500)
        osc *= 2.0 * math.exp(-g * t)
    return pref * (base - osc)


def bj_survival(m, t):
    """Continuum-limit survival ``|b(t)|^2 = e^{-2 g t}``."""
    return math.exp(-2.0 * m.gamma * float(t))


def bj_threshold_time(m):
    """Time ``t* = Delta/(2 pi W^2) log[(E1 - E0)/Delta]`` below which the
    target-based speed limit is the tighter one."""
    width = m.e1 - m.e0
    if width < m.delta:
        raise QtrError("degenerate window: E1 - E0 must be at least Delta")
    if m.w == 0:
        raise QtrError("threshold time undefined for W = 0")
    return m.delta / (2.0 * math.pi * m.w ** 2) * math.log(width / m.delta)


def bj_tightness_holds(m, t):
    """``e^{2 pi W^2 t/Delta} <= pi (E1-E0) / (Delta D)``."""
    d = _arctan_window(m, m.e0, m.e1)
    lhs = math.exp(2.0 * math.pi * m.w ** 2 * t / m.delta)
    return lhs <= math.pi * (m.e1 - m.e0) / (m.delta * d)


def bj_min_rate(m, times, window=None):
    """Smallest closed-form QTR on a time grid, and where it occurs."""
    ks = np.array([bj_closed_k(m, t, window) for t in times])
    i = int(np.argmin(ks))
    return float(ks[i]), float(times[i])
