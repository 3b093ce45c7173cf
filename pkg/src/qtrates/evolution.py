"""Propagators and quantum channels.

* :class:`HamiltonianSchedule` -- ``t -> H_S(t)`` with optional derivative.
* :func:`propagator` -- time-ordered exponential by midpoint (order 2) or
  two-point Gauss--Magnus (order 4) stepping.
* :class:`ZenoSchedule` / :func:`zeno_state` -- repeated projective
  measurements interleaved with unitary evolution.
* :class:`LindbladGenerator` -- Markovian generator with Schrodinger and
  Heisenberg (adjoint) flows.
* :class:`KrausFamily` -- time-dependent operator-sum channels.
"""

import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy import linalg

from .errors import ConvergenceError, DimensionError, NotHermitianError, QtrError
from .operators import (as_operator, as_projector, check_hermitian, commutator,
                        dagger, hermitian_expm, hermiticity_error, hermitize)

SQRT3 = math.sqrt(3.0)


def derivative_step(t):
    """Central-difference step ``1e-5 * max(1, |t|)`` used for time derivatives."""
    return 1e-5 * max(1.0, abs(t))


class HamiltonianSchedule:
    """A time-dependent Hamiltonian ``t -> H_S(t)``.

    Args:
        evaluator: callable returning a Hermitian ``(d, d)`` array.
        dim: Hilbert-space dimension (inferred from ``evaluator(0)`` if omitted).
        derivative: optional analytic ``t -> dH_S/dt``.
        time_independent: set when ``evaluator`` is constant; enables
            exact exponentials and cached spectral data.
        tol: Hermiticity tolerance applied to every evaluation.
    """

    def __init__(self, evaluator, dim=None, derivative=None, time_independent=False,
                 tol=1e-10):
        self._evaluator = evaluator
        self._derivative = derivative
        self.time_independent = bool(time_independent)
        self.tol = tol
        h0 = self(0.0)
        if dim is not None and h0.shape[0] != dim:
            raise DimensionError(f"schedule returns dim {h0.shape[0]}, declared {dim}")
        self.dim = h0.shape[0]

    @classmethod
    def static(cls, h):
        """Time-independent schedule ``H_S(t) = h``."""
        h = check_hermitian(h, name="Hamiltonian")
        h = hermitize(h)
        zero = np.zeros_like(h)
        return cls(lambda t: h, derivative=lambda t: zero, time_independent=True)

    @classmethod
    def linear(cls, h0, h1):
        """Linear ramp ``H_S(t) = h0 + t h1``."""
        h0 = hermitize(check_hermitian(h0, name="h0"))
        h1 = hermitize(check_hermitian(h1, name="h1"))
        return cls(lambda t: h0 + t * h1, derivative=lambda t: h1)

    def __call__(self, t):
        h = np.asarray(self._evaluator(float(t)), dtype=complex)
        if hermiticity_error(h) > self.tol:
            raise NotHermitianError(f"H_S({t}) is not Hermitian")
        return h

    @property
    def has_analytic_derivative(self):
        return self._derivative is not None

    def derivative(self, t):
        """``dH_S/dt`` -- analytic if supplied, else a central difference."""
        if self._derivative is not None:
            return np.asarray(self._derivative(float(t)), dtype=complex)
        h = derivative_step(t)
        return (self(t + h) - self(t - h)) / (2.0 * h)

    @cached_property
    def eigensystem(self):
        """``(E, V)`` of a time-independent Hamiltonian (cached)."""
        if not self.time_independent:
            raise QtrError("eigensystem is only cached for time-independent schedules")
        h = hermitize(self(0.0))
        if not np.any(h.imag):
            # Real symmetric: several times cheaper than the complex solver.
            return np.linalg.eigh(h.real)
        return np.linalg.eigh(h)

    def spectral_width(self, t=0.0):
        w = np.linalg.eigvalsh(hermitize(self(t)))
        return float(w[-1] - w[0])


def _step_midpoint(schedule, t, h):
    return hermitian_expm(schedule(t + 0.5 * h), -1j * h, tol=schedule.tol)


def _step_magnus4(schedule, t, h):
    c = SQRT3 / 6.0
    h1 = schedule(t + (0.5 - c) * h)
    h2 = schedule(t + (0.5 + c) * h)
    k = 0.5 * h * (h1 + h2) - 1j * (SQRT3 * h * h / 12.0) * commutator(h2, h1)
    return hermitian_expm(hermitize(k), -1j, tol=1e-8)


_STEPPERS = {2: _step_midpoint, 4: _step_magnus4}


def propagator(schedule, t0, t1, steps, order=2):
    """Time-ordered propagator ``U(t1, t0) = T exp(-i int H_S)``.

    Args:
        schedule: a :class:`HamiltonianSchedule`.
        t0, t1: start and end time, ``t1 >= t0``.
        steps: number of equal steps (>= 1).
        order: 2 for the midpoint rule ``prod exp(-i H(t_j + dt/2) dt)``,
            4 for the two-point Gauss--Magnus rule.

    Returns:
        ndarray: the unitary ``U(t1, t0)``.
    """
    if steps < 1:
        raise ValueError("steps must be >= 1")
    if t1 < t0:
        raise ValueError("propagator requires t1 >= t0")
    d = schedule.dim
    if t1 == t0:
        return np.eye(d, dtype=complex)
    if schedule.time_independent:
        e, v = schedule.eigensystem
        return (v * np.exp(-1j * e * (t1 - t0))) @ dagger(v)
    try:
        step = _STEPPERS[order]
    except KeyError:
        raise ValueError(f"unsupported order {order}") from None
    h = (t1 - t0) / steps
    u = np.eye(d, dtype=complex)
    for j in range(steps):
        u = step(schedule, t0 + j * h, h) @ u
    return u


def adaptive_propagator(schedule, t0, t1, tol=1e-8, steps=16, order=2, max_steps=2 ** 16):
    """Double the step count until successive propagators differ by < ``tol``.

    Returns:
        tuple: ``(U, steps_used)``.
    """
    prev = propagator(schedule, t0, t1, steps, order)
    if schedule.time_independent:
        return prev, steps
    while steps < max_steps:
        steps *= 2
        cur = propagator(schedule, t0, t1, steps, order)
        if np.max(np.abs(cur - prev)) < tol:
            return cur, steps
        prev = cur
    raise ConvergenceError(f"propagator did not converge to {tol} within {max_steps} steps")


def heisenberg_observable(schedule, obs, t, steps, t0=0.0, order=2):
    """Heisenberg-picture observable ``U^dagger(t) obs U(t)``."""
    obs = as_operator(obs, schedule.dim)
    u = propagator(schedule, t0, t, steps, order)
    return dagger(u) @ obs @ u


# ---------------------------------------------------------------------------
# Zeno
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ZenoSchedule:
    """``n`` projective measurements of ``projector`` spread over total time ``t``.

    Attributes:
        projector: measured projector Pi.
        n: number of measurement intervals (>= 1).
        t: total time.
        selective: if True (default) the map keeps only the Pi-branch,
            ``[Pi U(t/n) Pi]^n``.  If False each measurement is a
            non-selective Luders channel ``rho -> Pi rho Pi + Q rho Q``.
    """

    projector: np.ndarray
    n: int
    t: float
    selective: bool = True

    def __post_init__(self):
        if int(self.n) < 1:
            raise ValueError("Zeno schedule needs n >= 1")
        object.__setattr__(self, "projector", as_projector(self.projector))


def zeno_state(schedule, z, rho0, t0=0.0, substeps=4, order=4):
    """Apply the Zeno measurement map to ``rho0``.

    Args:
        schedule: Hamiltonian schedule.
        z: :class:`ZenoSchedule`.
        rho0: initial density matrix.
        t0: starting time of the first interval.
        substeps: propagation steps per interval for driven schedules.

    Returns:
        tuple: ``(rho_n, weight)``; ``rho_n`` is *not* renormalised and
        ``weight = tr(rho_n)``.
    """
    p = z.projector
    q = np.eye(p.shape[0]) - p
    tau = z.t / z.n
    rho = np.asarray(rho0, dtype=complex)
    static = None
    if schedule.time_independent:
        static = propagator(schedule, 0.0, tau, 1)
    for j in range(z.n):
        u = static if static is not None else propagator(
            schedule, t0 + j * tau, t0 + (j + 1) * tau, substeps, order)
        rho = u @ rho @ dagger(u)
        if z.selective:
            rho = p @ rho @ p
        else:
            rho = p @ rho @ p + q @ rho @ q
    return rho, float(np.trace(rho).real)


def zeno_limit_generator(h, p):
    """Zeno-limit generator ``Pi H Pi``."""
    h = as_operator(h)
    p = as_operator(p, h.shape[0])
    return p @ h @ p


# ---------------------------------------------------------------------------
# Lindblad
# ---------------------------------------------------------------------------

def _vec_left_right(a, b):
    """Matrix of ``X -> a X b`` acting on row-major ``vec(X)``."""
    return np.kron(a, b.T)


class LindbladGenerator:
    """Markovian generator ``L[rho] = -i[H, rho] + sum_n g_n D[L_n] rho``.

    Args:
        hamiltonian: Hermitian matrix.
        jumps: sequence of jump operators.
        rates: nonnegative rates, one per jump operator.
    """

    def __init__(self, hamiltonian, jumps=(), rates=()):
        self.hamiltonian = hermitize(check_hermitian(hamiltonian, name="Hamiltonian"))
        d = self.hamiltonian.shape[0]
        self.jumps = tuple(as_operator(l, d) for l in jumps)
        self.rates = tuple(float(r) for r in rates)
        if len(self.jumps) != len(self.rates):
            raise ValueError("one rate per jump operator required")
        if any(r < 0 for r in self.rates):
            raise ValueError("Lindblad rates must be nonnegative")
        self.dim = d

    def apply(self, rho):
        """Schrodinger-picture generator ``L[rho]``."""
        out = -1j * commutator(self.hamiltonian, rho)
        for l, g in zip(self.jumps, self.rates):
            ld = dagger(l)
            ldl = ld @ l
            out = out + g * (l @ rho @ ld - 0.5 * (ldl @ rho + rho @ ldl))
        return out

    def adjoint(self, obs):
        """Heisenberg-picture (adjoint) generator ``L^dagger[O]``."""
        out = 1j * commutator(self.hamiltonian, obs)
        for l, g in zip(self.jumps, self.rates):
            ld = dagger(l)
            ldl = ld @ l
            out = out + g * (ld @ obs @ l - 0.5 * (ldl @ obs + obs @ ldl))
        return out

    @cached_property
    def superoperator(self):
        """Matrix of ``L`` on row-major vectorised density matrices."""
        d = self.dim
        eye = np.eye(d)
        h = self.hamiltonian
        s = -1j * (_vec_left_right(h, eye) - _vec_left_right(eye, h))
        for l, g in zip(self.jumps, self.rates):
            ld = dagger(l)
            ldl = ld @ l
            s = s + g * (_vec_left_right(l, ld)
                         - 0.5 * (_vec_left_right(ldl, eye) + _vec_left_right(eye, ldl)))
        return s

    @cached_property
    def adjoint_superoperator(self):
        """Matrix of ``L^dagger`` on row-major vectorised observables."""
        d = self.dim
        eye = np.eye(d)
        h = self.hamiltonian
        s = 1j * (_vec_left_right(h, eye) - _vec_left_right(eye, h))
        for l, g in zip(self.jumps, self.rates):
            ld = dagger(l)
            ldl = ld @ l
            s = s + g * (_vec_left_right(ld, l)
                         - 0.5 * (_vec_left_right(ldl, eye) + _vec_left_right(eye, ldl)))
        return s

    def evolve_state(self, rho, t):
        """``exp(L t)[rho]``."""
        d = self.dim
        v = linalg.expm(self.superoperator * t) @ np.asarray(rho, dtype=complex).reshape(-1)
        return v.reshape(d, d)

    def evolve_observable(self, obs, t):
        """``exp(L^dagger t)[O]`` (Heisenberg picture)."""
        d = self.dim
        v = linalg.expm(self.adjoint_superoperator * t) @ np.asarray(obs, dtype=complex).reshape(-1)
        return v.reshape(d, d)


def lindblad_heisenberg_step(gen, obs, dt):
    """One classical RK4 step of ``dO/dt = L^dagger[O]``."""
    if dt <= 0:
        raise ValueError("dt must be positive")
    o = np.asarray(obs, dtype=complex)
    k1 = gen.adjoint(o)
    k2 = gen.adjoint(o + 0.5 * dt * k1)
    k3 = gen.adjoint(o + 0.5 * dt * k2)
    k4 = gen.adjoint(o + dt * k3)
    return o + dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)


# ---------------------------------------------------------------------------
# Kraus
# ---------------------------------------------------------------------------

class KrausFamily:
    """Time-dependent operator-sum representation ``t -> [M_k(t)]``.

    Args:
        evaluator: callable returning a sequence of ``(d, d)`` arrays.
        tol: completeness tolerance ``||sum M^dagger M - 1||``.
    """

    def __init__(self, evaluator, tol=1e-8):
        self._evaluator = evaluator
        self.tol = tol
        ops = self.operators(0.0)
        self.count = len(ops)
        self.dim = ops[0].shape[0]

    def operators(self, t):
        ops = [np.asarray(m, dtype=complex) for m in self._evaluator(float(t))]
        if not ops:
            raise ValueError("Kraus family is empty")
        return ops

    def completeness_error(self, t):
        ops = self.operators(t)
        s = sum(dagger(m) @ m for m in ops)
        return float(np.max(np.abs(s - np.eye(s.shape[0]))))

    def derivatives(self, t, h=None):
        """Central-difference time derivatives ``dM_k/dt``."""
        h = derivative_step(t) if h is None else h
        plus = self.operators(t + h)
        minus = self.operators(t - h)
        return [(a - b) / (2 * h) for a, b in zip(plus, minus)]


def kraus_apply(fam, rho, t):
    """Apply the channel at time ``t``: ``sum_k M_k rho M_k^dagger``.

    Raises:
        QtrError: if the family is not trace preserving within ``fam.tol``.
    """
    err = fam.completeness_error(t)
    if err > fam.tol:
        raise QtrError(f"Kraus completeness violated at t={t} (error {err:.3e})")
    rho = np.asarray(rho, dtype=complex)
    return sum(m @ rho @ dagger(m) for m in fam.operators(t))


def dephasing_family(p):
    """Two-element qubit dephasing ``{sqrt(1-p) 1, sqrt(p) sigma_z}``.

    ``p`` may be a number or a callable of time.
    """
    pf = p if callable(p) else (lambda t: p)
    sz = np.diag([1.0, -1.0]).astype(complex)
    eye = np.eye(2, dtype=complex)
    return KrausFamily(lambda t: [np.sqrt(1 - pf(t)) * eye, np.sqrt(pf(t)) * sz])


def unitary_family(schedule, steps=64, order=4):
    """Single-element family ``{U(t)}`` generated by a Hamiltonian schedule."""
    return KrausFamily(lambda t: [propagator(schedule, 0.0, t, steps, order)] if t >= 0
                       else [dagger(propagator(schedule, t, 0.0, steps, order))])


def dilation_family(h_se, dim_s, dim_e, env_index=0):
    """Kraus family from a system--environment unitary.

    ``M_k(t) = <e_k| exp(-i H_SE t) |e_env_index>`` with the joint space
    ordered system (x) environment.
    """
    h_se = hermitize(check_hermitian(h_se, name="H_SE"))
    if h_se.shape[0] != dim_s * dim_e:
        raise DimensionError("H_SE dimension must be dim_s * dim_e")
    e, v = np.linalg.eigh(h_se)

    def ops(t):
        u = ((v * np.exp(-1j * e * t)) @ dagger(v)).reshape(dim_s, dim_e, dim_s, dim_e)
        return [u[:, k, :, env_index] for k in range(dim_e)]

    return KrausFamily(ops)
