"""Counterdiabatic (transitionless) driving along a nondegenerate spectral path.

For ``H_0(t) = sum_n E_n(t) |n_t><n_t|`` the counterdiabatic term

    H_1 = i sum_n (|d_t n><n| - <n|d_t n> |n><n|)

makes ``H_0 + H_1`` drive every instantaneous eigenstate exactly,
``U_CD = sum_n e^{i phi_n(t)} |n_t><n_0|`` with
``phi_n = -int E_n + i int <n|d_t n>``.

Eigenvector derivatives are central finite differences in a maximal-overlap
gauge; phases are accumulated on the sample grid by the trapezoidal rule.
"""

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .bounds import BoundReport
from .errors import DegeneracyError, QtrError
from .evolution import HamiltonianSchedule
from .operators import as_projector, commutator, dagger, hermitize

GAP_TOL = 1e-8
OVERLAP_MIN = 0.9


@dataclass
class ParametricPath:
    """A Hamiltonian family ``H(lambda)`` together with a protocol ``t -> lambda_t``.

    Attributes:
        hamiltonian: callable mapping a parameter vector to a Hermitian matrix.
        lam: callable ``t -> lambda_t`` (array of shape ``(p,)``).
        lam_dot: optional analytic ``t -> d lambda/dt``.
    """

    hamiltonian: Callable
    lam: Callable
    lam_dot: Optional[Callable] = None

    def parameters(self, t):
        return np.atleast_1d(np.asarray(self.lam(t), dtype=float))

    def velocity(self, t):
        if self.lam_dot is not None:
            return np.atleast_1d(np.asarray(self.lam_dot(t), dtype=float))
        h = 1e-5 * max(1.0, abs(t))
        return (self.parameters(t + h) - self.parameters(t - h)) / (2 * h)

    def schedule(self):
        return HamiltonianSchedule(lambda t: self.hamiltonian(self.parameters(t)))


def _fix_initial_gauge(v):
    """Make the largest-magnitude component of every column real positive."""
    idx = np.argmax(np.abs(v), axis=0)
    ph = v[idx, np.arange(v.shape[1])]
    return v * (np.abs(ph) / ph)[None, :]


def _align(v, ref, check=True):
    """Rephase columns of ``v`` so that ``<ref_n|v_n>`` is real and >= 0."""
    ov = np.einsum("in,in->n", ref.conj(), v)
    mag = np.abs(ov)
    if check and np.any(mag < OVERLAP_MIN):
        raise QtrError(f"eigenvector continuity lost (min overlap {mag.min():.3f}); "
                       "refine the grid or check for a level crossing")
    return v * (np.conj(ov) / np.where(mag == 0, 1, mag))[None, :]


def _eigh_checked(h, where):
    e, v = np.linalg.eigh(hermitize(h))
    if e.size > 1 and np.min(np.diff(e)) < GAP_TOL:
        raise DegeneracyError(f"degenerate spectrum at {where} (gap {np.min(np.diff(e)):.2e})")
    return e, v


class SpectralPath:
    """Gauge-fixed instantaneous eigensystem of ``H_0(t)`` on a time grid.

    Use :func:`build_spectral_path` to construct.

    Attributes:
        times: sample times.
        energies: ``(T, d)`` ascending eigenvalues.
        vectors: ``(T, d, d)`` eigenvectors (columns), parallel-transported.
        phases: ``(T, d)`` accumulated phases ``phi_n``.
        schedule: the Hamiltonian schedule ``H_0``.
        param: the :class:`ParametricPath` if available.
    """

    def __init__(self, times, energies, vectors, phases, berry, schedule, param=None):
        self.times = times
        self.energies = energies
        self.vectors = vectors
        self.phases = phases
        self.berry = berry
        self.schedule = schedule
        self.param = param
        self.dim = energies.shape[1]

    @property
    def t0(self):
        return float(self.times[0])

    def _nearest(self, t):
        dt = self.times[1] - self.times[0]
        j = int(round((t - self.t0) / dt))
        return min(max(j, 0), len(self.times) - 1)

    def _lower(self, t):
        dt = self.times[1] - self.times[0]
        j = int(math.floor((t - self.t0) / dt + 1e-9))
        return min(max(j, 0), len(self.times) - 1)

    def eig(self, t):
        """Eigenvalues and gauge-aligned eigenvectors at an arbitrary ``t``."""
        j = self._nearest(t)
        if abs(t - self.times[j]) < 1e-14:
            return self.energies[j], self.vectors[j]
        e, v = _eigh_checked(self.schedule(t), f"t={t}")
        return e, _align(v, self.vectors[j])

    def eigvec_derivative(self, t, h=None):
        """Central difference ``d|n_t>/dt`` in the parallel-transport gauge."""
        h = 1e-5 * (1.0 + abs(t)) if h is None else h
        _, v = self.eig(t)
        _, vp = _eigh_checked(self.schedule(t + h), f"t={t + h}")
        _, vm = _eigh_checked(self.schedule(t - h), f"t={t - h}")
        vp = _align(vp, v)
        vm = _align(vm, v)
        return v, (vp - vm) / (2 * h)

    def berry_connection(self, t):
        """``A_n(t) = i <n_t|d_t n_t>`` (real)."""
        v, dv = self.eigvec_derivative(t)
        return (1j * np.einsum("in,in->n", v.conj(), dv)).real

    def phase(self, t):
        """Accumulated phases ``phi_n(t)``."""
        if t < self.t0 - 1e-12 or t > self.times[-1] + 1e-9:
            raise QtrError(f"t = {t} outside the spectral path")
        j = self._lower(t)
        tj = self.times[j]
        if abs(t - tj) < 1e-14:
            return self.phases[j]
        e_t, _ = self.eig(t)
        a_t = self.berry_connection(t)
        return self.phases[j] + (t - tj) * (-(self.energies[j] + e_t) / 2
                                            + (self.berry[j] + a_t) / 2)


def build_spectral_path(schedule, grid, param=None):
    """Instantaneous eigensystem along the grid with continuous phases.

    Args:
        schedule: :class:`HamiltonianSchedule` or :class:`ParametricPath`.
        grid: :class:`~qtrates.operators.TimeGrid`.
        param: optional :class:`ParametricPath` (set automatically when
            ``schedule`` is one).

    Raises:
        DegeneracyError: spectral gap below ``1e-8`` at a sample.
        QtrError: eigenvector overlap between neighbours below 0.9.
    """
    if isinstance(schedule, ParametricPath):
        param = schedule
        schedule = schedule.schedule()
    times = grid.samples
    n_t = len(times)
    d = schedule.dim
    energies = np.empty((n_t, d))
    vectors = np.empty((n_t, d, d), dtype=complex)
    for j, t in enumerate(times):
        e, v = _eigh_checked(schedule(t), f"t={t}")
        v = _fix_initial_gauge(v) if j == 0 else _align(v, vectors[j - 1])
        energies[j] = e
        vectors[j] = v
    dt = grid.dt
    # Berry connection A = i <n|dn/dt> by central differences on the grid.
    dv = np.empty_like(vectors)
    dv[1:-1] = (vectors[2:] - vectors[:-2]) / (2 * dt)
    dv[0] = (-3 * vectors[0] + 4 * vectors[1] - vectors[2]) / (2 * dt) if n_t > 2 else (vectors[1] - vectors[0]) / dt
    dv[-1] = (3 * vectors[-1] - 4 * vectors[-2] + vectors[-3]) / (2 * dt) if n_t > 2 else (vectors[-1] - vectors[-2]) / dt
    berry = (1j * np.einsum("tin,tin->tn", vectors.conj(), dv)).real
    rate = -energies + berry
    phases = np.zeros((n_t, d))
    phases[1:] = np.cumsum(0.5 * dt * (rate[1:] + rate[:-1]), axis=0)
    return SpectralPath(times, energies, vectors, phases, berry, schedule, param)


def cd_hamiltonian(path, t):
    """Counterdiabatic term ``H_1(t)`` (Hermitian, zero diagonal in ``|n_t>``)."""
    v, dv = path.eigvec_derivative(t)
    diag = np.einsum("in,in->n", v.conj(), dv)
    h1 = 1j * (dv @ dagger(v) - (v * diag[None, :]) @ dagger(v))
    return hermitize(h1)


def cd_propagator(path, t):
    """``U_CD(t) = sum_n e^{i phi_n(t)} |n_t><n_0|``."""
    _, v = path.eig(t)
    ph = path.phase(t)
    return (v * np.exp(1j * ph)[None, :]) @ dagger(path.vectors[0])


def qtr_under_cd(path, rho_a, pi_b, t):
    """Transition probability and rate under counterdiabatic driving.

    ``P = sum_{mn} <m_0|rho_A|n_0> <n_t|Pi_B|m_t> e^{i(phi_m - phi_n)}`` and
    ``k = tr[rho(t) (-i)[Pi_B, H_0 + H_1]]``.

    Returns:
        tuple: ``(P, k)``.
    """
    pi_b = as_projector(pi_b)
    rho_a = np.asarray(rho_a, dtype=complex)
    v0 = path.vectors[0]
    _, vt = path.eig(t)
    ph = path.phase(t)
    r0 = dagger(v0) @ rho_a @ v0          # r0[m, n] = <m_0|rho|n_0>
    qt = dagger(vt) @ pi_b @ vt           # qt[n, m] = <n_t|Pi_B|m_t>
    phase = np.exp(1j * np.subtract.outer(ph, ph))   # [m, n] -> e^{i(phi_m - phi_n)}
    p = float(np.sum(r0 * qt.T * phase).real)
    u = (vt * np.exp(1j * ph)[None, :]) @ dagger(v0)
    rho_t = u @ rho_a @ dagger(u)
    h = path.schedule(t) + cd_hamiltonian(path, t)
    k = float(np.einsum("ij,ji->", rho_t, -1j * commutator(pi_b, h)).real)
    return p, k


@dataclass
class GeometricTensor:
    """Quantum geometric tensor ``Q[n, mu, nu]`` for every eigenstate ``n``."""

    q: np.ndarray

    @property
    def g(self):
        """Fubini--Study metric (real part)."""
        return self.q.real

    @property
    def curvature(self):
        """Berry curvature ``-2 Im Q``."""
        return -2.0 * self.q.imag

    def metric_norm(self, n, lam_dot):
        """``sqrt(g^{(n)}_{mu nu} dlam^mu dlam^nu)``."""
        ld = np.atleast_1d(lam_dot)
        return math.sqrt(max(float(ld @ self.g[n] @ ld), 0.0))


def geometric_tensor(hamiltonian, lam, dlam=None):
    """Quantum geometric tensor of ``H(lambda)`` at ``lambda``.

    Args:
        hamiltonian: callable parameter vector -> Hermitian matrix.
        lam: parameter vector.
        dlam: finite-difference step (default ``1e-5 (1 + ||lambda||)``).
    """
    lam = np.atleast_1d(np.asarray(lam, dtype=float))
    p = lam.size
    step = 1e-5 * (1.0 + np.linalg.norm(lam)) if dlam is None else float(dlam)
    _, v = _eigh_checked(hamiltonian(lam), f"lambda={lam}")
    v = _fix_initial_gauge(v)
    d = v.shape[0]
    derivs = []
    for mu in range(p):
        e_mu = np.zeros(p)
        e_mu[mu] = step
        _, vp = _eigh_checked(hamiltonian(lam + e_mu), f"lambda={lam + e_mu}")
        _, vm = _eigh_checked(hamiltonian(lam - e_mu), f"lambda={lam - e_mu}")
        derivs.append((_align(vp, v) - _align(vm, v)) / (2 * step))
    q = np.empty((d, p, p), dtype=complex)
    eye = np.eye(d)
    for n in range(d):
        proj = eye - np.outer(v[:, n], v[:, n].conj())
        dn = np.stack([dm[:, n] for dm in derivs], axis=1)    # (d, p)
        q[n] = dn.conj().T @ proj @ dn
    return GeometricTensor(q)


def geometric_bound(path, rho_a, pi_b, t):
    """Geometric bound on the QTR under counterdiabatic driving.

    With ``rho_{nm} = <n_0|rho_A|m_0>`` and the metric ``g^{(m)}`` at
    ``lambda_t``:

    * ``rhs`` (Robertson form): ``sum_{nm} |rho_nm| sqrt(g^{(m)} dlam dlam)``,
      valid whenever ``rho_A`` is diagonal in the initial eigenbasis;
    * ``extras['rhs_half']``: the same sum with an extra factor 1/2;
    * ``extras['intermediate']``: ``sum_n rho_nn 2 Delta_n Pi_B Delta_n H_CD +
      sum_{n != m} |rho_nm| |<m_t|J|n_t>|`` with exact variances -- a bound
      for arbitrary ``rho_A``;
    * ``extras['variance_identity']``: max over n of
      ``|Delta^2_{n_t}(H_0+H_1) - <n_t|H_1^2|n_t>|``.
    """
    if path.param is None:
        raise QtrError("geometric_bound needs a ParametricPath (lambda_t and H(lambda))")
    pi_b = as_projector(pi_b)
    _, k = qtr_under_cd(path, rho_a, pi_b, t)
    lam = path.param.parameters(t)
    lam_dot = path.param.velocity(t)
    qgt = geometric_tensor(path.param.hamiltonian, lam)
    v0 = path.vectors[0]
    rho = dagger(v0) @ np.asarray(rho_a, dtype=complex) @ v0
    _, vt = path.eig(t)
    h0 = path.schedule(t)
    h1 = cd_hamiltonian(path, t)
    hcd = h0 + h1
    d = path.dim
    norms = np.array([qgt.metric_norm(m, lam_dot) for m in range(d)])
    absrho = np.abs(rho)
    rhs = float(np.sum(absrho * norms[None, :]))
    j_op = -1j * commutator(pi_b, hcd)
    j_eig = dagger(vt) @ j_op @ vt
    inter = 0.0
    ident = 0.0
    h1_sq = []
    for n in range(d):
        vn = vt[:, n]
        mean_pi = float((vn.conj() @ pi_b @ vn).real)
        d_pi = math.sqrt(max(mean_pi - mean_pi ** 2, 0.0))
        mean_h = float((vn.conj() @ hcd @ vn).real)
        var_h = float((vn.conj() @ hcd @ hcd @ vn).real) - mean_h ** 2
        h1n = float((vn.conj() @ h1 @ h1 @ vn).real)
        h1_sq.append(h1n)
        ident = max(ident, abs(var_h - h1n))
        inter += absrho[n, n] * 2 * d_pi * math.sqrt(max(var_h, 0.0))
        for m in range(d):
            if m != n:
                inter += absrho[n, m] * abs(j_eig[m, n])
    diagonal = bool(np.max(np.abs(rho - np.diag(np.diag(rho)))) < 1e-10)
    return BoundReport(t, abs(k), rhs, "geometric",
                       {"rhs_half": 0.5 * rhs, "intermediate": inter,
                        "variance_identity": ident, "h1_sq": np.array(h1_sq),
                        "metric_speed": norms, "diagonal": diagonal})
