"""Conditioned transition probabilities and quantum transition rates (QTRs).

Given an initial state ``rho0``, a reactant projector ``Pi_A`` and a target
projector ``Pi_B``, the conditioned state is ``rho_A = Pi_A rho0 Pi_A / P_A``
and

    P(B, t | A) = tr[rho_A Pi_B(t)],      k_{A->B}(t) = dP/dt.

Several equivalent routes to ``k`` are provided and cross-validated against
the centred finite difference of ``P``:

* :func:`qtr_direct` -- expectation of the flux operator
  ``J_B(t) = -i [Pi_B(t), H(t)]`` (Heisenberg picture).
* :func:`qtr_general_fluxflux` -- time integral of the four-term rate
  derivative (reactant flux, double commutator, projected commutator and the
  explicit drive term).
* :func:`qtr_from_flux_flux` -- single flux-flux correlator integral, valid
  for complementary partitions and time-independent Hamiltonians.
* :func:`channel_qtr` -- Lindblad and Kraus forms.
"""

import logging
import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from . import csvio
from .errors import (BoundaryError, ConvergenceError, DimensionError,
                     EmptyConditioningError, PreconditionError, QtrError)
from .evolution import (HamiltonianSchedule, KrausFamily, LindbladGenerator,
                        ZenoSchedule, kraus_apply, propagator, zeno_state)
from .operators import (as_density_matrix, as_operator, as_projector, commutator,
                        dagger, hermitize, is_diagonal, projector_rank, range_factor)

log = logging.getLogger(__name__)

DISJOINT_TOL = 1e-10
PRECONDITION_TOL = 1e-10
SIMPSON_TOL = 1e-8
SIMPSON_MAX_PANELS = 2 ** 14


def condition_state(rho0, pi_a):
    """Conditioned state ``rho_A = Pi_A rho0 Pi_A / P_A``.

    Returns:
        tuple: ``(rho_A, P_A)``.

    Raises:
        EmptyConditioningError: if ``P_A <= 1e-12``.
    """
    rho0 = np.asarray(rho0, dtype=complex)
    pi_a = np.asarray(pi_a, dtype=complex)
    if rho0.shape != pi_a.shape:
        raise DimensionError("rho0 and Pi_A dimensions differ")
    p_a = float(np.einsum("ij,ji->", rho0, pi_a).real)
    if p_a <= 1e-12:
        raise EmptyConditioningError(f"conditioning probability P_A = {p_a:.3e} is zero")
    if is_diagonal(pi_a):
        d = np.diag(pi_a)
        rho_a = rho0 * np.outer(d, d.conj()) / p_a
    else:
        rho_a = pi_a @ rho0 @ pi_a / p_a
    return hermitize(rho_a), p_a


@dataclass(frozen=True)
class ZenoDynamics:
    """Hamiltonian evolution interrupted by ``n`` measurements of ``projector``.

    For an elapsed time ``t`` the measurements happen at ``j t / n``.
    """

    schedule: HamiltonianSchedule
    projector: np.ndarray
    n: int
    selective: bool = True
    substeps: int = 4

    def schedule_for(self, t):
        return ZenoSchedule(self.projector, self.n, t, self.selective)


class TransitionSetup:
    """Everything needed to evaluate ``P(B,t|A)`` and the QTR.

    Args:
        rho0: initial density matrix.
        pi_a, pi_b: reactant and target projectors.
        dynamics: a :class:`HamiltonianSchedule`, :class:`LindbladGenerator`,
            :class:`KrausFamily` or :class:`ZenoDynamics`.
        grid: :class:`~qtrates.operators.TimeGrid`; ``grid.t_start`` is the
            preparation time.
        max_dt: largest propagation step for driven Hamiltonians.  The step
            count is fixed per setup (``ceil(span / max_dt)``) so that
            ``P(t)`` is a smooth function of ``t``.
        order: propagation order for driven Hamiltonians (2 or 4).
        require_disjoint: enforce ``Pi_A Pi_B = 0``.  Models whose
            reactant and target subspaces overlap (e.g. a product target
            acting on a subset of modes) switch this off.
    """

    def __init__(self, rho0, pi_a, pi_b, dynamics, grid, max_dt=0.01, order=4,
                 require_disjoint=True):
        self.rho0 = as_density_matrix(rho0)
        d = self.rho0.shape[0]
        self.pi_a = as_projector(as_operator(pi_a, d))
        self.pi_b = as_projector(as_operator(pi_b, d))
        if require_disjoint:
            overlap = float(np.max(np.abs(self.pi_a @ self.pi_b)))
            if overlap > DISJOINT_TOL:
                raise PreconditionError(
                    f"Pi_A Pi_B != 0 (max entry {overlap:.3e})", flag="disjoint")
        self.require_disjoint = require_disjoint
        self.dynamics = dynamics
        if getattr(dynamics, "dim", None) is None and isinstance(dynamics, ZenoDynamics):
            ddim = dynamics.schedule.dim
        else:
            ddim = getattr(dynamics, "dim", None)
        if ddim is not None and ddim != d:
            raise DimensionError(f"dynamics dimension {ddim} != state dimension {d}")
        self.grid = grid
        self.max_dt = float(max_dt)
        self.order = int(order)
        self.rho_a, self.p_a = condition_state(self.rho0, self.pi_a)
        self.dim = d

    # -- classification ----------------------------------------------------
    @property
    def kind(self):
        dyn = self.dynamics
        if isinstance(dyn, HamiltonianSchedule):
            return "hamiltonian"
        if isinstance(dyn, LindbladGenerator):
            return "lindblad"
        if isinstance(dyn, KrausFamily):
            return "kraus"
        if isinstance(dyn, ZenoDynamics):
            return "zeno"
        raise QtrError(f"unsupported dynamics type {type(dyn).__name__}")

    @property
    def t0(self):
        return float(self.grid.t_start)

    @property
    def d_b(self):
        return projector_rank(self.pi_b)

    @property
    def is_static(self):
        return self.kind == "hamiltonian" and self.dynamics.time_independent

    @cached_property
    def steps(self):
        return max(1, int(math.ceil(self.grid.span / self.max_dt - 1e-9)))

    def hamiltonian(self, t):
        """Schrodinger-picture Hamiltonian ``H_S(t)`` for Hamiltonian-type dynamics."""
        kind = self.kind
        if kind == "hamiltonian":
            return self.dynamics(t)
        if kind == "zeno":
            return self.dynamics.schedule(t)
        if kind == "lindblad":
            return self.dynamics.hamiltonian
        raise QtrError("Kraus dynamics carry no Hamiltonian")

    # -- spectral caches for time-independent Hamiltonians ------------------
    @cached_property
    def _eig(self):
        e, v = self.dynamics.eigensystem
        fa, gb = self._factors
        r = fa @ dagger(fa)
        q = dagger(gb) @ gb
        return e, v, r, q

    @cached_property
    def _factors(self):
        """Low-rank eigenbasis factors ``(C, G)`` with ``V^dag rho_A V = C C^dag``
        and ``V^dag Pi_B V = G^dag G``."""
        _, v = self.dynamics.eigensystem
        fa = range_factor(self.rho_a)
        fb = range_factor(self.pi_b)
        return dagger(v) @ fa, dagger(fb) @ v

    @cached_property
    def _factor_a(self):
        """``F_A^dag V`` with ``Pi_A = F_A F_A^dag`` (eigenbasis factor of ``Pi_A``)."""
        _, v = self.dynamics.eigensystem
        return dagger(range_factor(self.pi_a)) @ v

    def _phase(self, tau):
        e = self._eig[0]
        return np.exp(-1j * np.subtract.outer(e, e) * tau)

    # -- evolution ------------------------------------------------------------
    def unitary(self, t):
        """``U(t, t0)`` for Hamiltonian dynamics."""
        if self.kind != "hamiltonian":
            raise QtrError("unitary() requires Hamiltonian dynamics")
        return propagator(self.dynamics, self.t0, t, self.steps, self.order)

    def evolved_state(self, t):
        """Schrodinger-picture conditioned state ``rho_A(t)`` (unnormalised for
        selective Zeno dynamics)."""
        tau = t - self.t0
        if tau < -1e-12:
            raise BoundaryError(f"t = {t} precedes the preparation time {self.t0}")
        tau = max(tau, 0.0)
        kind = self.kind
        if kind == "hamiltonian":
            if self.is_static:
                e, v, r, _ = self._eig
                return v @ (self._phase(tau) * r) @ dagger(v)
            u = self.unitary(t)
            return u @ self.rho_a @ dagger(u)
        if kind == "lindblad":
            return self.dynamics.evolve_state(self.rho_a, tau)
        if kind == "kraus":
            return kraus_apply(self.dynamics, self.rho_a, tau)
        dyn = self.dynamics
        rho, _ = zeno_state(dyn.schedule, dyn.schedule_for(tau), self.rho_a,
                            t0=self.t0, substeps=dyn.substeps, order=self.order)
        return rho


def _clamp_probability(p, what="P"):
    if -1e-9 <= p < 0.0 or 1.0 < p <= 1.0 + 1e-9:
        log.warning("%s = %.3e clamped into [0, 1]", what, p)
        return min(max(p, 0.0), 1.0)
    if p < -1e-9 or p > 1.0 + 1e-9:
        raise QtrError(f"{what} = {p!r} outside [0, 1]; propagation failure")
    return p


def transition_probability(setup, t):
    """Conditioned transition probability ``P(B, t | A)``."""
    if setup.is_static:
        tau = t - setup.t0
        if tau < -1e-12:
            raise BoundaryError(f"t = {t} precedes the preparation time")
        e = setup.dynamics.eigensystem[0]
        c, g = setup._factors
        amp = g @ (np.exp(-1j * e * max(tau, 0.0))[:, None] * c)
        p = float(np.sum(amp.real ** 2 + amp.imag ** 2))
    else:
        rho = setup.evolved_state(t)
        p = float(np.einsum("ij,ji->", rho, setup.pi_b).real)
    return _clamp_probability(p)


def survival_probability(setup, t):
    """``P(A, t | A) = tr[rho_A Pi_A(t)]``."""
    if setup.is_static:
        tau = t - setup.t0
        if tau < -1e-12:
            raise BoundaryError(f"t = {t} precedes the preparation time")
        e = setup.dynamics.eigensystem[0]
        c, _ = setup._factors
        amp = setup._factor_a @ (np.exp(-1j * e * max(tau, 0.0))[:, None] * c)
        p = float(np.sum(amp.real ** 2 + amp.imag ** 2))
    else:
        rho = setup.evolved_state(t)
        p = float(np.einsum("ij,ji->", rho, setup.pi_a).real)
    return _clamp_probability(p, "P(A|A)")


def _require_hamiltonian(setup):
    if setup.kind != "hamiltonian":
        raise QtrError(f"operation requires Hamiltonian dynamics, setup has {setup.kind!r}")


def schrodinger_flux(setup, t):
    """Schrodinger-picture flux ``-i [Pi_B, H_S(t)]``."""
    return -1j * commutator(setup.pi_b, setup.hamiltonian(t))


def flux_operator(setup, t):
    """Heisenberg-picture flux ``J_B(t) = -i [Pi_B(t), H(t)]`` (Hermitian)."""
    _require_hamiltonian(setup)
    u = setup.unitary(t)
    return hermitize(dagger(u) @ schrodinger_flux(setup, t) @ u)


def qtr_direct(setup, t):
    """QTR as the flux expectation ``k = tr[rho_A J_B(t)]``."""
    _require_hamiltonian(setup)
    if setup.is_static:
        e = setup.dynamics.eigensystem[0]
        c, g = setup._factors
        tau = max(t - setup.t0, 0.0)
        # <psi|-i[Pi_B, H]|psi> = 2 Im <psi|Pi_B H|psi> for each column psi
        psi = np.exp(-1j * e * tau)[:, None] * c
        k = complex(2.0 * np.sum(np.conj(g @ psi) * (g @ (e[:, None] * psi))).imag)
    else:
        rho = setup.evolved_state(t)
        k = complex(np.einsum("ij,ji->", rho, schrodinger_flux(setup, t)))
    if abs(k.imag) > 1e-9 * max(1.0, abs(k.real)):
        raise QtrError(f"flux expectation has imaginary part {k.imag:.3e}")
    return k.real


def characteristic_time(setup):
    """A natural time scale ``2 pi / omega`` of the dynamics (cached per setup)."""
    cached = setup.__dict__.get("_characteristic_time")
    if cached is not None:
        return cached
    kind = setup.kind
    if kind == "kraus":
        value = 2 * math.pi
    else:
        if setup.is_static:
            w = setup.dynamics.eigensystem[0]
        else:
            w = np.linalg.eigvalsh(hermitize(setup.hamiltonian(setup.t0)))
        omega = float(w[-1] - w[0])
        if kind == "lindblad":
            omega += sum(g * float(np.linalg.norm(l, 2)) ** 2
                         for l, g in zip(setup.dynamics.jumps, setup.dynamics.rates))
        if kind == "zeno":
            omega = max(omega, 1.0)
        value = max(setup.grid.span, 1.0) if omega < 1e-12 else 2 * math.pi / omega
    setup.__dict__["_characteristic_time"] = value
    return value


def default_fd_step(setup):
    return 1e-4 * characteristic_time(setup)


def qtr_finite_difference(setup, t, dt=None):
    """Centred finite difference ``[P(t+dt) - P(t-dt)] / (2 dt)``.

    The reference against which every analytic QTR route is validated.

    Raises:
        BoundaryError: if ``t - dt`` precedes the preparation time.
    """
    dt = default_fd_step(setup) if dt is None else float(dt)
    if dt <= 0:
        raise ValueError("dt must be positive")
    if t - dt < setup.t0 - 1e-15:
        raise BoundaryError(f"stencil t - dt = {t - dt} precedes t_start = {setup.t0}")
    return (transition_probability(setup, t + dt) - transition_probability(setup, t - dt)) / (2 * dt)


def _fd_rate(setup, t, dt=None):
    """Centred difference where possible, second-order one-sided at ``t0``."""
    dt = default_fd_step(setup) if dt is None else dt
    if t - dt >= setup.t0:
        return qtr_finite_difference(setup, t, dt)
    p0 = transition_probability(setup, t)
    p1 = transition_probability(setup, t + dt)
    p2 = transition_probability(setup, t + 2 * dt)
    return (-3 * p0 + 4 * p1 - p2) / (2 * dt)


# ---------------------------------------------------------------------------
# Flux-flux forms
# ---------------------------------------------------------------------------

def _flux_flux_flags(setup, times):
    """Return the name of the first failed flux-flux precondition, or None."""
    d = setup.dim
    if np.max(np.abs(setup.pi_a + setup.pi_b - np.eye(d))) > PRECONDITION_TOL:
        return "complementary"
    for s in times:
        h = setup.hamiltonian(s)
        block = setup.pi_a @ h @ setup.pi_a
        if np.max(np.abs(commutator(setup.rho_a, block))) > PRECONDITION_TOL:
            return "stationary_reactant"
    return None


def check_flux_flux_preconditions(setup, times=None):
    """Validate the conditions under which the single-correlator form holds.

    * ``complementary``: ``Pi_A + Pi_B = 1``;
    * ``stationary_reactant``: ``[rho_A, Pi_A H_S Pi_A] = 0`` -- the
      conditioned state is stationary under the reactant-block Hamiltonian.

    Raises:
        PreconditionError: naming the failed flag.
    """
    _require_hamiltonian(setup)
    times = [setup.t0] if times is None else times
    flag = _flux_flux_flags(setup, times)
    if flag is not None:
        raise PreconditionError(f"flux-flux precondition '{flag}' violated", flag=flag)


def flux_flux_correlator(setup, tprime, t, check=True):
    """Flux-flux correlator ``C = 2 Re tr[rho_A J_B(t') J_{B,t}]``.

    ``J_{B,t} = -i [Pi_B, H(t)]`` with ``H(t)`` the Heisenberg-picture
    Hamiltonian at time ``t``.
    """
    _require_hamiltonian(setup)
    if check:
        check_flux_flux_preconditions(setup, [tprime, t])
    jb_p = flux_operator(setup, tprime)
    u = setup.unitary(t)
    h_t = dagger(u) @ setup.hamiltonian(t) @ u
    jb_t = -1j * commutator(setup.pi_b, h_t)
    return 2.0 * float(np.einsum("ij,jk,ki->", setup.rho_a, jb_p, jb_t).real)


def _simpson(values, h):
    return h / 3.0 * (values[0] + values[-1] + 4 * values[1:-1:2].sum() + 2 * values[2:-1:2].sum())


def _adaptive_simpson(f_nodes, start_panels, tol=SIMPSON_TOL, max_panels=SIMPSON_MAX_PANELS):
    """Composite Simpson with panel doubling.

    ``f_nodes(m)`` returns the integrand on ``m + 1`` equispaced nodes and the
    node spacing.  Returns ``(integral, panels)``.
    """
    m = max(2, int(start_panels) + (int(start_panels) % 2))
    vals, h = f_nodes(m)
    prev = _simpson(vals, h)
    while m < max_panels:
        m *= 2
        vals, h = f_nodes(m)
        cur = _simpson(vals, h)
        if abs(cur - prev) < tol:
            return cur, m
        prev = cur
    raise ConvergenceError(f"Simpson quadrature did not converge within {max_panels} panels")


def qtr_from_flux_flux(setup, t, quad_steps=200):
    """QTR from the single flux-flux correlator integral.

    ``k(t) = k(t0) + int_{t0}^{t} C(t', t) dt'`` for a time-independent
    Hamiltonian, complementary partition and stationary reactant block.
    """
    _require_hamiltonian(setup)
    if not setup.is_static:
        raise PreconditionError("flux-flux form requires a time-independent Hamiltonian",
                                flag="time_independent")
    check_flux_flux_preconditions(setup)
    tau = t - setup.t0
    if tau <= 0:
        return qtr_direct(setup, setup.t0)
    e, v, r, q = setup._eig
    h_eig = np.diag(e)
    jb = -1j * (q @ h_eig - h_eig @ q)
    x = jb @ r                      # C(s) = 2 Re sum_ij e^{i w_ij s} jb_ij x_ji
    coef = jb * x.T
    w = np.subtract.outer(e, e)

    def nodes(m):
        s = np.linspace(0.0, tau, m + 1)
        ph = np.exp(1j * w[None, :, :] * s[:, None, None])
        return 2.0 * np.sum(ph * coef[None], axis=(1, 2)).real, tau / m

    integral, _ = _adaptive_simpson(nodes, quad_steps)
    return qtr_direct(setup, setup.t0) + integral


def rate_derivative_terms(setup, u, s, outer_h=None):
    """The four contributions to ``dk/ds`` at time ``s``.

    Args:
        setup: Hamiltonian setup.
        u: propagator ``U(s, t0)``.
        s: time.
        outer_h: optional Heisenberg Hamiltonian to use inside the reactant
            flux instead of ``H(s)`` (two-time variant).

    Returns:
        ndarray: complex ``[T1, T2, T3, T4]``; ``dk/ds = Re sum``.
    """
    ud = dagger(u)
    h = ud @ setup.hamiltonian(s) @ u
    hdot = ud @ setup.dynamics.derivative(s) @ u
    pib = ud @ setup.pi_b @ u
    jb = -1j * commutator(pib, h)
    ha = h if outer_h is None else outer_h
    ja = -1j * commutator(setup.pi_a, ha)
    rho = setup.rho_a
    pia = setup.pi_a
    hr = commutator(h, rho)
    t1 = -2.0 * np.trace(jb @ ja @ rho)
    t2 = 1j * np.trace(jb @ commutator(hr, pia))
    t3 = -1j * np.trace(jb @ pia @ hr @ pia)
    t4 = -1j * np.trace(rho @ commutator(pib, hdot))
    return np.array([t1, t2, t3, t4])


def _tr(a, b):
    """Batched ``tr(a_n b_n)``."""
    return np.einsum("nij,nji->n", a, b)


def _rate_derivative_sum(setup, us, s, outer_h=None):
    """``Re sum(T1..T4)`` of :func:`rate_derivative_terms` on a stack of nodes."""
    u = np.asarray(us)
    ud = np.conj(np.swapaxes(u, 1, 2))
    if setup.is_static:
        hs = setup.hamiltonian(s[0])[None]
        hdots = None
    else:
        hs = np.array([setup.hamiltonian(sj) for sj in s])
        hdots = np.array([setup.dynamics.derivative(sj) for sj in s])
    h = ud @ hs @ u
    pib = ud @ setup.pi_b @ u
    jb = -1j * (pib @ h - h @ pib)
    ha = h if outer_h is None else outer_h[None]
    pia, rho = setup.pi_a, setup.rho_a
    ja = -1j * (pia @ ha - ha @ pia)
    hr = h @ rho - rho @ h
    total = -2.0 * _tr(jb @ ja, np.broadcast_to(rho, jb.shape))
    total = total + 1j * _tr(jb, hr @ pia - pia @ hr)
    total = total - 1j * _tr(jb, pia @ hr @ pia)
    if hdots is not None:
        hdot = ud @ hdots @ u
        total = total - 1j * _tr(np.broadcast_to(rho, jb.shape), pib @ hdot - hdot @ pib)
    return total.real


def _unitaries_on_nodes(setup, tau, m):
    """``U(t0 + j tau/m, t0)`` for ``j = 0..m``."""
    if setup.is_static:
        e, v, _, _ = setup._eig
        ph = np.exp(-1j * np.outer(np.linspace(0, tau, m + 1), e))
        return (v[None] * ph[:, None, :]) @ dagger(v)
    h = tau / m
    sub = max(1, int(math.ceil(h / setup.max_dt - 1e-9)))
    us = [np.eye(setup.dim, dtype=complex)]
    for j in range(m):
        a = setup.t0 + j * h
        us.append(propagator(setup.dynamics, a, a + h, sub, setup.order) @ us[-1])
    return us


def qtr_general_fluxflux(setup, t, quad_steps=None, literal_outer_time=False):
    """QTR from the time integral of the four-term rate derivative.

    ``k(t) = k(t0) + int_{t0}^{t} Re[T1 + T2 + T3 + T4](s) ds`` where, with
    all Heisenberg operators at the integration time ``s``,

    * ``T1 = -2 tr[J_B(s) J_{A,s} rho_A]``, ``J_{A,s} = -i[Pi_A, H(s)]``;
    * ``T2 = i tr[J_B(s) [[H(s), rho_A], Pi_A]]``;
    * ``T3 = -i tr[J_B(s) Pi_A [H(s), rho_A] Pi_A]``;
    * ``T4 = -i tr[rho_A [Pi_B(s), dH(s)/ds]]``.

    Valid for arbitrary ``rho_A``, non-complementary projectors and driven
    Hamiltonians.

    Args:
        setup: Hamiltonian setup.
        t: final time.
        quad_steps: initial Simpson panel count (default 16).
        literal_outer_time: evaluate the reactant flux with ``H(t)`` at the
            *outer* time instead of ``H(s)``.  Identical for time-independent
            Hamiltonians; for driven ones this two-time variant does not
            reproduce ``dP/dt`` and is kept for comparison only.

    Raises:
        ConvergenceError: if successive Simpson refinements disagree.
    """
    _require_hamiltonian(setup)
    tau = t - setup.t0
    k0 = qtr_direct(setup, setup.t0)
    if tau <= 0:
        return k0
    outer = None
    if literal_outer_time:
        u_t = setup.unitary(t)
        outer = dagger(u_t) @ setup.hamiltonian(t) @ u_t

    def nodes(m):
        us = _unitaries_on_nodes(setup, tau, m)
        s = setup.t0 + np.linspace(0, tau, m + 1)
        return _rate_derivative_sum(setup, us, s, outer), tau / m

    integral, _ = _adaptive_simpson(nodes, quad_steps or 16, tol=SIMPSON_TOL)
    return k0 + integral


# ---------------------------------------------------------------------------
# Channels and Zeno
# ---------------------------------------------------------------------------

def channel_qtr(setup, t):
    """QTR for open-system dynamics.

    * Lindblad: ``k = tr[rho_A L^dagger[Pi_B(t)]]`` with
      ``Pi_B(t) = exp(L^dagger t)[Pi_B]``;
    * Kraus: ``k = 2 Re sum_k tr[rho_A dM_k^dagger/dt Pi_B M_k]``;
    * Hamiltonian: reduces to :func:`qtr_direct`.
    """
    kind = setup.kind
    tau = t - setup.t0
    if kind == "hamiltonian":
        return qtr_direct(setup, t)
    if kind == "lindblad":
        gen = setup.dynamics
        pib_t = gen.evolve_observable(setup.pi_b, tau)
        return float(np.einsum("ij,ji->", setup.rho_a, gen.adjoint(pib_t)).real)
    if kind == "kraus":
        fam = setup.dynamics
        err = fam.completeness_error(tau)
        if err > fam.tol:
            raise QtrError(f"Kraus completeness violated (error {err:.3e})")
        ms = fam.operators(tau)
        dms = fam.derivatives(tau)
        total = 0.0
        for m, dm in zip(ms, dms):
            total += np.einsum("ij,jk,kl,li->", setup.rho_a, dagger(dm), setup.pi_b, m).real
        return 2.0 * float(total)
    raise QtrError("channel_qtr does not apply to Zeno dynamics; use finite differences")


def zeno_quadratic_coefficient(setup, t=None, nodes=24):
    """Short-time coefficient ``c`` in ``P(B, t|A) = c t^2 + O(t^3)``.

    Time-independent ``H``: ``tr[rho_A H Pi_B H]``.  Driven ``H``: the
    double-integral coefficient
    ``t^{-2} int int tr[rho_A H_S(t1) Pi_B H_S(t2)] dt1 dt2
    = t^{-2} tr[rho_A X Pi_B X]``, ``X = int_0^t H_S``, evaluated by
    Gauss--Legendre quadrature; ``t=None`` gives the ``t -> 0`` limit.
    """
    if setup.kind == "zeno":
        sched = setup.dynamics.schedule
    elif setup.kind == "hamiltonian":
        sched = setup.dynamics
    else:
        raise QtrError("quadratic coefficient requires Hamiltonian dynamics")
    rho, pib = setup.rho_a, setup.pi_b
    if sched.time_independent or t is None or t - setup.t0 <= 0:
        h = sched(setup.t0)
        return float(np.einsum("ij,jk,kl,li->", rho, h, pib, h).real)
    tau = t - setup.t0
    x, w = np.polynomial.legendre.leggauss(nodes)
    s = setup.t0 + 0.5 * tau * (x + 1)
    big_x = sum(wi * sched(si) for wi, si in zip(w, s)) * (0.5 * tau)
    return float(np.einsum("ij,jk,kl,li->", rho, big_x, pib, big_x).real) / tau ** 2


# ---------------------------------------------------------------------------
# Series
# ---------------------------------------------------------------------------

PATHS = ("direct", "finite_difference", "flux_flux", "general", "channel")


@dataclass
class QtrSeries:
    """Sampled ``P(B,t|A)`` and ``k(t)`` plus optional extra columns.

    Attributes:
        t, p, k: 1-d arrays.
        path: name of the computation route for ``k``.
        extras: ordered mapping of additional column name -> array.
    """

    t: np.ndarray
    p: np.ndarray
    k: np.ndarray
    path: str
    extras: dict = field(default_factory=dict)

    def columns(self):
        cols = {"t": self.t, "P_AB": self.p, "k_AB": self.k}
        cols.update(self.extras)
        return cols

    def to_csv_text(self):
        return csvio.format_csv(self.columns())

    def to_csv(self, path):
        return csvio.write_csv(path, self.columns())


def qtr(setup, t, path="direct", **kw):
    """Dispatch to a QTR route by name."""
    if path == "direct":
        return qtr_direct(setup, t)
    if path == "finite_difference":
        return _fd_rate(setup, t, kw.get("dt"))
    if path == "flux_flux":
        return qtr_from_flux_flux(setup, t, kw.get("quad_steps", 200))
    if path == "general":
        return qtr_general_fluxflux(setup, t, kw.get("quad_steps"))
    if path == "channel":
        return channel_qtr(setup, t)
    raise ValueError(f"unknown QTR path {path!r}; choose from {PATHS}")


def compute_series(setup, path="direct", times=None, **kw):
    """Evaluate ``P`` and ``k`` on the setup's grid (or the given times)."""
    times = setup.grid.samples if times is None else np.asarray(times, dtype=float)
    p = np.array([transition_probability(setup, t) for t in times])
    k = np.array([qtr(setup, t, path, **kw) for t in times])
    return QtrSeries(times, p, k, path)
