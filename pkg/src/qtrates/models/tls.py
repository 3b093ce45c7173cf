"""Single two-level system with on-site energies +-Delta and coupling W."""

import math
from dataclasses import dataclass

import numpy as np

from ..engine import TransitionSetup
from ..evolution import HamiltonianSchedule
from ..operators import TimeGrid


@dataclass(frozen=True)
class TlsModel:
    """``H = [[delta, w], [w, -delta]]``; reactant ``|0>``, target ``|1>``."""

    delta: float
    w: float

    def __post_init__(self):
        if not (math.isfinite(self.delta) and math.isfinite(self.w)):
            raise ValueError("TLS parameters must be finite")

    @property
    def omega(self):
        return math.hypot(self.delta, self.w)

    def hamiltonian(self):
        return np.array([[self.delta, self.w], [self.w, -self.delta]], dtype=complex)


def tls_setup(m, t_end=10.0, n_steps=1000, t_start=0.0):
    """Generic-engine setup for the TLS (static Hamiltonian)."""
    rho0 = np.diag([1.0, 0.0]).astype(complex)
    pi_a = np.diag([1.0, 0.0]).astype(complex)
    pi_b = np.diag([0.0, 1.0]).astype(complex)
    return TransitionSetup(rho0, pi_a, pi_b, HamiltonianSchedule.static(m.hamiltonian()),
                           TimeGrid(t_start, t_end, n_steps))


def tls_closed_forms(m, t):
    """Closed-form ``(P_AA, P_AB, k)`` at time ``t``.

    ``P_AB = (W/Omega)^2 sin^2(Omega t)`` and ``k = (W^2/Omega) sin(2 Omega t)``.
    """
    t = float(t)
    if not math.isfinite(t):
        raise ValueError("t must be finite")
    om = m.omega
    if om == 0.0:
        return 1.0, 0.0, 0.0
    s = math.sin(om * t)
    p_ab = (m.w / om) ** 2 * s * s
    p_aa = math.cos(om * t) ** 2 + (m.delta / om) ** 2 * s * s
    k = m.w ** 2 / om * math.sin(2.0 * om * t)
    return p_aa, p_ab, k


def driven_tls_schedule(delta0, delta1, w):
    """Linearly swept TLS ``H(t) = [[d0 + d1 t, w], [w, -(d0 + d1 t)]]``."""
    sz = np.diag([1.0, -1.0]).astype(complex)
    sx = np.array([[0, 1], [1, 0]], dtype=complex)
    return HamiltonianSchedule.linear(delta0 * sz + w * sx, delta1 * sz)
