"""Transverse-field Ising chain as a product of independent momentum modes.

Each positive momentum ``k = pi (2j - 1)/L`` carries a two-level problem in
the even-parity pair ``(|0>_k|0>_-k, |1>_k|1>_-k)`` with amplitudes
``(v_k, u_k)`` and Hamiltonian::

    H_k(g) = 2 [[-(g - cos k), sin k], [sin k, g - cos k]]

so ``|00>`` is the ground state deep in the paramagnet and
``b_k = (sin(k/2), -cos(k/2))`` is the ground state at ``g = 0``.  The
target projector keeps ``b_k`` for every mode with ``k < k_B`` and leaves
the other modes unrestricted.
"""

import math
from dataclasses import dataclass

import numpy as np

from ..engine import TransitionSetup
from ..errors import ConvergenceError, QtrError
from ..evolution import HamiltonianSchedule
from ..operators import TimeGrid
from ..special import sine_integral

NORM_TOL = 1e-9
SELF_CONVERGENCE_TOL = 1e-8
INITIAL_STATES = ("paramagnet", "ground")


@dataclass(frozen=True)
class TfimModel:
    """Linear ramp ``g(t) = g0 (1 - t/tau)`` (or constant field).

    Attributes:
        L: even number of sites.
        tau: ramp duration.
        g0: initial transverse field.
        k_b: target cutoff momentum, ``0 < k_b <= pi``.
        ramp: ``False`` keeps ``g = g0`` for all times.
        initial: ``"paramagnet"`` starts every mode in ``|00>``; ``"ground"``
            in the instantaneous ground state at ``g0``.
    """

    L: int
    tau: float
    g0: float = 2.0
    k_b: float = math.pi / 2
    ramp: bool = True
    initial: str = "paramagnet"

    def __post_init__(self):
        if self.L < 2 or self.L % 2:
            raise ValueError("L must be an even integer >= 2")
        if not self.tau > 0:
            raise ValueError("tau must be positive")
        if not 0 < self.k_b <= math.pi:
            raise ValueError("k_b must lie in (0, pi]")
        if self.initial not in INITIAL_STATES:
            raise ValueError(f"initial must be one of {INITIAL_STATES}")

    @property
    def momenta(self):
        j = np.arange(1, self.L // 2 + 1)
        return np.pi * (2 * j - 1) / self.L

    @property
    def target_mask(self):
        return self.momenta < self.k_b

    @property
    def log2_d_b(self):
        """``log2`` of the target rank: two states per unrestricted mode."""
        return int(np.count_nonzero(~self.target_mask))

    @property
    def sweep_time(self):
        """Inverse sweep rate ``1/|dg/dt| = tau/g0`` (the Landau--Zener time)."""
        return self.tau / abs(self.g0)

    def field(self, t):
        return self.g0 * (1.0 - t / self.tau) if self.ramp else self.g0

    def field_rate(self, t=None):
        return -self.g0 / self.tau if self.ramp else 0.0


def mode_hamiltonians(k, g):
    """``(n, 2, 2)`` stack of ``H_k(g)``."""
    a = g - np.cos(k)
    s = np.sin(k)
    h = np.empty((k.size, 2, 2))
    h[:, 0, 0] = -2 * a
    h[:, 1, 1] = 2 * a
    h[:, 0, 1] = h[:, 1, 0] = 2 * s
    return h


def target_vectors(k):
    """``b_k = (sin(k/2), -cos(k/2))``."""
    return np.sin(k / 2), -np.cos(k / 2)


def ground_amplitudes(k, g):
    """Ground state ``(v, u)`` of ``H_k(g)``: ``(cos(th/2), -sin(th/2))``
    with ``th = atan2(sin k, g - cos k)``."""
    th = np.arctan2(np.sin(k), g - np.cos(k))
    return np.cos(th / 2).astype(complex), (-np.sin(th / 2)).astype(complex)


@dataclass
class ModeSolution:
    """Amplitudes ``v[i, j], u[i, j]`` of mode ``k[j]`` at ``times[i]``."""

    model: TfimModel
    k: np.ndarray
    times: np.ndarray
    v: np.ndarray
    u: np.ndarray
    dt: float

    def at(self, t):
        i = int(np.argmin(np.abs(self.times - t)))
        if abs(self.times[i] - t) > 1e-9 * max(1.0, abs(t)):
            raise QtrError(f"t = {t} is not a stored sample")
        return self.v[i], self.u[i]

    def norm_error(self):
        return float(np.max(np.abs(np.abs(self.v) ** 2 + np.abs(self.u) ** 2 - 1.0)))

    def to_csv_columns(self, t):
        v, u = self.at(t)
        return {"k": self.k, "u_re": u.real, "u_im": u.imag, "v_re": v.real, "v_im": v.imag}


def default_dt(m):
    return m.tau / max(1e4, 100.0 * m.L)


def _rk4_segment(k, v, u, t, t1, dt, field):
    cosk, s2 = np.cos(k), 2 * np.sin(k)
    n = max(1, int(math.ceil((t1 - t) / dt - 1e-9)))
    h = (t1 - t) / n

    def rhs(tt, v, u):
        a2 = 2 * (field(tt) - cosk)
        return -1j * (-a2 * v + s2 * u), -1j * (s2 * v + a2 * u)

    for _ in range(n):
        k1v, k1u = rhs(t, v, u)
        k2v, k2u = rhs(t + h / 2, v + h / 2 * k1v, u + h / 2 * k1u)
        k3v, k3u = rhs(t + h / 2, v + h / 2 * k2v, u + h / 2 * k2u)
        k4v, k4u = rhs(t + h, v + h * k3v, u + h * k3u)
        v = v + h / 6 * (k1v + 2 * k2v + 2 * k3v + k4v)
        u = u + h / 6 * (k1u + 2 * k2u + 2 * k3u + k4u)
        t = t + h
    return v, u


def tfim_mode_solver(m, times=None, dt=None, k=None):
    """Integrate every mode with classical RK4 and store the samples.

    Args:
        m: :class:`TfimModel`.
        times: increasing sample times in ``[0, tau]`` (default ``[0, tau]``).
        dt: step size (default ``tau / max(1e4, 100 L)``).
        k: optional subset of momenta.

    Raises:
        ConvergenceError: if the normalisation drifts by more than 1e-9.
    """
    k = m.momenta if k is None else np.asarray(k, dtype=float)
    times = np.array([0.0, m.tau] if times is None else times, dtype=float)
    if np.any(np.diff(times) < 0) or times[0] < 0:
        raise ValueError("sample times must be non-negative and increasing")
    dt = default_dt(m) if dt is None else float(dt)
    if m.initial == "ground":
        v, u = ground_amplitudes(k, m.field(0.0))
    else:
        v, u = np.ones(k.size, complex), np.zeros(k.size, complex)
    vs = np.empty((times.size, k.size), complex)
    us = np.empty_like(vs)
    t = 0.0
    for i, ti in enumerate(times):
        if ti > t:
            v, u = _rk4_segment(k, v, u, t, ti, dt, m.field)
            t = ti
        vs[i], us[i] = v, u
    sol = ModeSolution(m, k, times, vs, us, dt)
    err = sol.norm_error()
    if err > NORM_TOL:
        raise ConvergenceError(f"mode normalisation drift {err:.3e} exceeds {NORM_TOL}")
    return sol


def self_convergence(m, t=None, dt=None, k=None):
    """Largest change of ``|v_k(t)|^2`` when the step is halved."""
    t = m.tau if t is None else t
    dt = default_dt(m) if dt is None else dt
    a = tfim_mode_solver(m, [t], dt, k)
    b = tfim_mode_solver(m, [t], dt / 2, k)
    return float(np.max(np.abs(np.abs(a.v[0]) ** 2 - np.abs(b.v[0]) ** 2)))


def check_self_convergence(m, t=None, dt=None, k=None, tol=SELF_CONVERGENCE_TOL):
    err = self_convergence(m, t, dt, k)
    if err >= tol:
        raise ConvergenceError(f"halving dt changes |v|^2 by {err:.3e} >= {tol}")
    return err


# -- per-mode Heisenberg-frame quantities --------------------------------------

def _frame(k, v, u, g, gdot):
    """Per-mode ``beta``, ``p_ij = conj(beta_i) beta_j`` and the Heisenberg
    matrices of ``H_k`` and ``dH_k/dt`` in the initial basis.

    The evolution operator has columns ``(v, u)`` and ``(-u*, v*)``.
    """
    sb, cb = target_vectors(k)
    a = g - np.cos(k)
    s = np.sin(k)
    b0 = sb * v + cb * u
    b1 = -sb * np.conj(u) + cb * np.conj(v)
    vc, uc = np.conj(v), np.conj(u)
    n_u, n_v = np.abs(u) ** 2, np.abs(v) ** 2
    h00 = 2 * (a * (n_u - n_v) + 2 * s * (vc * u).real)
    h01 = 2 * (2 * a * uc * vc + s * (vc ** 2 - uc ** 2))
    x00 = 2 * gdot * (n_u - n_v)
    x01 = 4 * gdot * uc * vc
    p00 = np.abs(b0) ** 2
    p11 = np.abs(b1) ** 2
    p01 = np.conj(b0) * b1
    return {"beta0": b0, "beta1": b1, "p00": p00, "p11": p11, "p01": p01,
            "h00": h00, "h01": h01, "h10": np.conj(h01), "x01": x01,
            "x10": np.conj(x01), "x00": x00}


def mode_frame(sol, t):
    v, u = sol.at(t)
    m = sol.model
    return _frame(sol.k, v, u, m.field(t), m.field_rate(t))


def mode_probabilities(sol, t):
    """Per-mode target overlaps ``|v sin(k/2) - u cos(k/2)|^2``."""
    return mode_frame(sol, t)["p00"]


def mode_rates(sol, t):
    """Per-mode ``dP_k/dt = 2 Im(p_01 h_10)``."""
    f = mode_frame(sol, t)
    return 2.0 * (f["p01"] * f["h10"]).imag


def mode_correlators(sol, t):
    """Per-mode flux-flux correlator ``tr[rho_A J_B(t) J_{A,t}]``.

    ``C_k = h10 [h01 (p00 - p11) - 2 p01 h00]`` (complex).
    """
    f = mode_frame(sol, t)
    return f["h10"] * (f["h01"] * (f["p00"] - f["p11"]) - 2 * f["p01"] * f["h00"])


def mode_drive_terms(sol, t):
    """Explicit-driving contribution ``-i tr[rho_A [Pi_B(t), dH/dt(t)]]``."""
    f = mode_frame(sol, t)
    return 2.0 * (f["p01"] * f["x10"]).imag


def mode_correlators_oracle(sol, t):
    """Brute-force per-mode correlator from explicit 2x2 matrices."""
    v, u = sol.at(t)
    m = sol.model
    h = mode_hamiltonians(sol.k, m.field(t))
    sb, cb = target_vectors(sol.k)
    out = np.empty(sol.k.size, complex)
    pa = np.diag([1.0, 0.0])
    for j in range(sol.k.size):
        U = np.array([[v[j], -np.conj(u[j])], [u[j], np.conj(v[j])]])
        b = np.array([sb[j], cb[j]])
        pb = U.conj().T @ np.outer(b, b) @ U
        hh = U.conj().T @ h[j] @ U
        jb = -1j * (pb @ hh - hh @ pb)
        ja = -1j * (pa @ hh - hh @ pa)
        out[j] = np.trace(pa @ jb @ ja)
    return out


# -- global quantities ---------------------------------------------------------

def _log_product(p):
    with np.errstate(divide="ignore"):
        return float(np.sum(np.log(p)))


def tfim_transition_probability(sol, t):
    """``P(B,t|A) = prod_{k < k_B} |v sin(k/2) - u cos(k/2)|^2`` (log-space)."""
    mask = sol.model.target_mask if sol.k.size == sol.model.L // 2 else sol.k < sol.model.k_b
    p = mode_probabilities(sol, t)[mask]
    return math.exp(_log_product(p)) if p.size else 1.0


def mode_survivals(sol, t):
    """Per-mode overlap with the initial amplitudes (``|v_k|^2`` from ``|00>``)."""
    v, u = sol.at(t)
    return np.abs(np.conj(sol.v[0]) * v + np.conj(sol.u[0]) * u) ** 2


def tfim_survival_probability(sol, t, k_max=None):
    """``P(A,t|A)``: product of per-mode survivals over ``k < k_max`` (all
    modes by default).  ``sol`` must include the sample ``t = 0``."""
    if sol.times[0] != 0.0:
        raise QtrError("survival needs the t = 0 sample in the solution")
    mask = np.ones(sol.k.size, bool) if k_max is None else sol.k < k_max
    return math.exp(_log_product(mode_survivals(sol, t)[mask])) if mask.any() else 1.0


def _combine_rates(p, r):
    """``d/dt prod p = sum_k r_k prod_{k' != k} p_k'`` without dividing by p."""
    if p.size == 0:
        return 0.0
    logs = np.log(np.where(p > 0, p, 1.0))
    zeros = p <= 0
    nz = int(np.count_nonzero(zeros))
    if nz > 1:
        return 0.0
    if nz == 1:
        return float(r[zeros][0] * math.exp(logs[~zeros].sum()))
    total = logs.sum()
    return float(np.sum(r * np.exp(total - logs)))


def tfim_qtr(sol, t):
    """Global QTR ``dP(B,t|A)/dt`` from the per-mode rates."""
    mask = sol.k < sol.model.k_b
    return _combine_rates(mode_probabilities(sol, t)[mask], mode_rates(sol, t)[mask])


def tfim_flux_flux_closed(sol, t):
    """Closed-form correlator summed over target modes, ``sum_k C_k`` (complex)."""
    mask = sol.k < sol.model.k_b
    return complex(np.sum(mode_correlators(sol, t)[mask]))


def tfim_rate_from_correlators(sol):
    """Reconstruct the QTR at every stored sample by integrating
    ``dk_k/ds = -2 Re C_k(s) + drive_k(s)`` (trapezoid on the stored grid,
    Simpson where the spacing is uniform) and recombining the modes.

    Returns:
        tuple: ``(k_total, k_total_correlator_only)`` arrays over
        ``sol.times``; the second omits the explicit-driving term.
    """
    from scipy.integrate import cumulative_simpson

    mask = sol.k < sol.model.k_b
    ts = sol.times
    dens = np.array([(-2.0 * mode_correlators(sol, t).real)[mask] for t in ts])
    drive = np.array([mode_drive_terms(sol, t)[mask] for t in ts])
    kk = cumulative_simpson(dens + drive, x=ts, axis=0, initial=0.0)
    kc = cumulative_simpson(dens, x=ts, axis=0, initial=0.0)
    out, out_c = np.empty(ts.size), np.empty(ts.size)
    for i, t in enumerate(ts):
        p = mode_probabilities(sol, t)[mask]
        out[i] = _combine_rates(p, kk[i])
        out_c[i] = _combine_rates(p, kc[i])
    return out, out_c


def mode_variances(sol, t):
    """Per-mode energy variance ``eps_k^2 - <H_k>^2`` at time ``t``."""
    v, u = sol.at(t)
    g = sol.model.field(t)
    a = g - np.cos(sol.k)
    s = np.sin(sol.k)
    mean = 2 * (a * (np.abs(u) ** 2 - np.abs(v) ** 2) + 2 * s * (np.conj(v) * u).real)
    eps2 = 4 * (a * a + s * s)
    return np.maximum(eps2 - mean ** 2, 0.0)


def tfim_energy_variance(sol, t):
    return float(np.sum(mode_variances(sol, t)))


def tfim_variance_estimate(m, tau=None):
    """Slow-driving estimate ``L (1 + (sqrt 8 - 2)/sqrt(pi tau))``."""
    tau = m.tau if tau is None else tau
    return m.L * (1.0 + (math.sqrt(8.0) - 2.0) / math.sqrt(math.pi * tau))


def tfim_qsl_estimate(m, tau=None):
    """Closed-form speed-limit estimate for the ramp (hbar = 1)::

        tau_QSL ~ arccos[exp(-1.16 L / sqrt(8 pi^3 tau)) 2^{-(L/2)(1 - k_B/pi)}]
                  / (sqrt(L) sqrt(1 + (sqrt 8 - 2)/sqrt(pi tau)))
    """
    tau = m.tau if tau is None else tau
    log_arg = (-1.16 * m.L / math.sqrt(8 * math.pi ** 3 * tau)
               - (m.L / 2) * (1 - m.k_b / math.pi) * math.log(2.0))
    return math.acos(math.exp(log_arg)) / math.sqrt(tfim_variance_estimate(m, tau))


def tfim_qsl_pair(sol, tau=None):
    """Exact target-based and survival-based speed limits at ``tau``.

    Both share the time-averaged dispersion ``<Delta H>`` (Simpson over the
    stored samples); the angles are ``arccos sqrt(P(B|A)/d_B)`` and
    ``arccos sqrt(P(A|A))``.
    """
    from scipy.integrate import simpson

    m = sol.model
    tau = m.tau if tau is None else tau
    ts = sol.times[sol.times <= tau + 1e-12]
    disp = np.sqrt([tfim_energy_variance(sol, t) for t in ts])
    avg = simpson(disp, x=ts) / tau if ts.size > 2 else disp[-1]
    log_f = math.log(max(tfim_transition_probability(sol, tau), 1e-300)) - m.log2_d_b * math.log(2)
    angle_qtr = math.acos(math.sqrt(math.exp(log_f)))
    angle_mt = math.acos(math.sqrt(min(tfim_survival_probability(sol, tau), 1.0)))
    return {"tau_qtr": angle_qtr / avg, "tau_mt": angle_mt / avg, "avg_dH": avg,
            "angle_qtr": angle_qtr, "angle_mt": angle_mt}


def tfim_tightness(sol, tau=None, k_max=None):
    """``P(B,tau|A) <= d_B P(A,tau|A)`` evaluated in log space; survival is
    taken over the target modes (``k < k_B``) unless ``k_max`` is given."""
    m = sol.model
    tau = m.tau if tau is None else tau
    k_max = m.k_b if k_max is None else k_max
    lhs = math.log(max(tfim_transition_probability(sol, tau), 1e-300))
    rhs = m.log2_d_b * math.log(2) + math.log(max(tfim_survival_probability(sol, tau, k_max), 1e-300))
    return lhs <= rhs, lhs, rhs


# -- Landau--Zener -------------------------------------------------------------

def lz_excitation(k, sweep_time):
    """Landau--Zener excitation ``exp(-2 pi tau_Q sin^2 k)`` of mode ``k``."""
    return np.exp(-2 * np.pi * sweep_time * np.sin(k) ** 2)


def lz_excitation_small_k(k, sweep_time):
    """Small-momentum form ``exp(-2 pi tau_Q k^2)``."""
    return np.exp(-2 * np.pi * sweep_time * np.asarray(k) ** 2)


def mode_excitation(sol, t=None):
    """Population outside the instantaneous ground state at ``t``."""
    m = sol.model
    t = m.tau if t is None else t
    v, u = sol.at(t)
    gv, gu = ground_amplitudes(sol.k, m.field(t))
    return 1.0 - np.abs(np.conj(gv) * v + np.conj(gu) * u) ** 2


def lz_survival_estimate(m, k_b=None):
    """``exp(-(L/2pi) int_0^{k_B} 2 pi tau_Q k^2 dk) = exp(-L tau_Q k_B^3 / 3)``."""
    k_b = m.k_b if k_b is None else k_b
    return math.exp(-m.L * m.sweep_time * k_b ** 3 / 3.0)


def lz_survival_reference(m, k_b=None):
    """Reference closed form ``exp(-2 L tau k_B^3 / 3)``."""
    k_b = m.k_b if k_b is None else k_b
    return math.exp(-2.0 * m.L * m.tau * k_b ** 3 / 3.0)


# -- counterdiabatic Krylov expansion -------------------------------------------

KRYLOV_MAX_TERMS = 10_000


def krylov_weight(m_idx, g, L):
    """``c_m(g) = (g^{2m} + g^L) / (g^{m+1} (1 + g^L))``, evaluated in logs.

    It tends to ``g^{m-1}`` for ``g < 1`` and ``g^{-m-1}`` for ``g > 1``.
    """
    g = float(g)
    if g <= 0:
        return 1.0 if m_idx == 1 else 0.0
    lg = math.log(g)
    num = np.logaddexp(2 * m_idx * lg, L * lg)
    den = (m_idx + 1) * lg + np.logaddexp(0.0, L * lg)
    return float(np.exp(num - den))


def tfim_cd_coefficients(m, n, t):
    """Krylov CD coefficients ``q_k^(n)(t) = -(1/tau) sum_m sin(k m)/2 c_m(g)``."""
    if n < 1:
        raise ValueError("Krylov order must be >= 1")
    if n > KRYLOV_MAX_TERMS:
        raise QtrError(f"Krylov order {n} exceeds the {KRYLOV_MAX_TERMS}-term cap")
    g = m.field(t)
    k = m.momenta
    w = np.array([krylov_weight(j, g, m.L) for j in range(1, n + 1)])
    return -(1.0 / m.tau) * (np.sin(np.outer(k, np.arange(1, n + 1))) / 2) @ w


def _partial_sine_sum(k, n):
    """``sum_{m=1}^n sin(m k)/m`` for every ``k``."""
    if n > KRYLOV_MAX_TERMS:
        raise QtrError(f"Krylov order {n} exceeds the {KRYLOV_MAX_TERMS}-term cap")
    k = np.atleast_1d(np.asarray(k, dtype=float))
    mm = np.arange(1, n + 1)
    return np.sin(np.outer(k, mm)) @ (1.0 / mm)


def cd_sudden_amplitudes(k, n):
    """Sudden-limit amplitudes ``(v, u)`` after a full Krylov-CD sweep from
    the paramagnet: ``v = cos(phi)``, ``u = -sin(phi)`` with
    ``phi = sum_{m<=n} sin(mk)/m`` (which tends to ``(pi - k)/2``)."""
    phi = _partial_sine_sum(k, n)
    return np.cos(phi), -np.sin(phi)


def cd_sudden_amplitudes_asymptotic(k, n):
    """Large-``n`` form with ``phi ~ Si(nk) - k/2``."""
    k = np.atleast_1d(np.asarray(k, dtype=float))
    phi = sine_integral(n * k) - k / 2
    return np.cos(phi), -np.sin(phi)


def cd_residual_angles(k, n):
    """``R_n(k) = (pi - k)/2 - sum_{m<=n} sin(mk)/m``; the target overlap of
    mode ``k`` is ``cos^2 R_n``."""
    k = np.atleast_1d(np.asarray(k, dtype=float))
    return (np.pi - k) / 2 - _partial_sine_sum(k, n)


def cd_sudden_log_probability(m, n):
    """``ln P(B,n|A) = sum_{k<k_B} ln cos^2 R_n(k)``."""
    k = m.momenta[m.target_mask]
    return _log_product(np.cos(cd_residual_angles(k, n)) ** 2)


def cd_sudden_rate(m, n):
    """End-of-sweep QTR in the sudden limit at unit sweep rate ``1/tau``.

    At ``g = 0`` only the ``m = 1`` Krylov term survives, so every mode
    rotates at ``sin(k)/tau`` and ``dP_k/dt = P_k sin k tan(R_n)/tau``.
    """
    k = m.momenta[m.target_mask]
    r = cd_residual_angles(k, n)
    p = np.cos(r) ** 2
    rates = np.sin(k) * np.sin(2 * r) / m.tau
    return _combine_rates(p, rates)


def cd_sudden_log_probability_reference(m, n):
    """Reference estimate ``-2.48 L/(pi n)``."""
    return -2.48 * m.L / (math.pi * n)


SIN_SI_INTEGRAL = -1.2340
"""``int_0^inf ln|sin Si(x)| dx`` (numerical value)."""


def cd_sudden_log_probability_continuum(m, n):
    """Continuum estimate ``(L/2pi) (1/n) int_0^inf ln sin^2 Si(x) dx``
    ``= (L/(pi n)) int_0^inf ln|sin Si(x)| dx`` using the mode density
    ``L/(2 pi)`` of the grid ``k = pi(2j-1)/L``."""
    return m.L / (math.pi * n) * SIN_SI_INTEGRAL


# -- explicit small-L construction ---------------------------------------------

def tfim_explicit_setup(m, k=None, max_dt=0.002):
    """Generic-engine instance for a few modes (each a 4-dim pair space).

    Mode ``k`` acts on ``(|00>, |01>, |10>, |11>)``; the odd-parity states
    carry zero energy.  ``Pi_A = rho_A = |00...0><00...0|`` and ``Pi_B`` is
    ``|b_k><b_k|`` on target modes and the identity elsewhere.
    """
    k = m.momenta if k is None else np.asarray(k, dtype=float)
    if k.size > 3:
        raise ValueError("explicit construction is limited to 3 modes")
    nm = k.size

    def embed(mat2):
        e = np.zeros((4, 4), dtype=complex)
        e[np.ix_([0, 3], [0, 3])] = mat2
        return e

    def kron_all(ops):
        out = np.ones((1, 1), dtype=complex)
        for o in ops:
            out = np.kron(out, o)
        return out

    eye = np.eye(4, dtype=complex)

    def local(j, op):
        return kron_all([op if i == j else eye for i in range(nm)])

    sz_parts = [local(j, embed(np.diag([-2.0, 2.0]))) for j in range(nm)]
    const_parts = [local(j, embed(2 * np.array([[np.cos(kj), np.sin(kj)],
                                                 [np.sin(kj), -np.cos(kj)]])))
                   for j, kj in enumerate(k)]
    hz = sum(sz_parts)
    hc = sum(const_parts)
    g0, rate = m.g0, m.field_rate()
    schedule = HamiltonianSchedule(lambda t: hc + m.field(t) * hz,
                                   derivative=lambda t: rate * hz,
                                   time_independent=not m.ramp)
    zero = np.zeros(4, complex)
    zero[0] = 1.0
    psi0 = kron_all([zero[:, None] for _ in range(nm)])[:, 0]
    rho0 = np.outer(psi0, psi0.conj())
    if m.initial == "ground":
        gv, gu = ground_amplitudes(k, g0)
        vecs = []
        for j in range(nm):
            w = np.zeros(4, complex)
            w[0], w[3] = gv[j], gu[j]
            vecs.append(w[:, None])
        psi0 = kron_all(vecs)[:, 0]
        rho0 = np.outer(psi0, psi0.conj())
    sb, cb = target_vectors(k)
    factors = []
    for j in range(nm):
        if k[j] < m.k_b:
            b = np.array([sb[j], cb[j]])
            factors.append(embed(np.outer(b, b)))
        else:
            factors.append(eye)
    pi_b = kron_all(factors)
    return TransitionSetup(rho0, rho0.copy(), pi_b, schedule, TimeGrid(0.0, m.tau, 100),
                           max_dt=max_dt, require_disjoint=False)


def write_mode_dump(path, sol, t):
    """Per-mode CSV ``k,u_re,u_im,v_re,v_im`` at time ``t``."""
    from ..csvio import write_csv

    return write_csv(path, sol.to_csv_columns(t))
