"""Particle in the box ``[-a, a]`` with an attractive delta at the origin.

``H = -1/2 d^2/dx^2 + gamma delta(x)``, ``gamma < 0``, hard walls at ``+-a``.
Only the even sector couples to the even box states used as reactants and
targets.  Its eigenfunctions are

* scattering-like states ``sin(k_n (a - |x|)) / sqrt(N_n)`` with
  ``k_n cot(k_n a) = |gamma|``, ``N_n = a - sin(2 k_n a)/(2 k_n)``,
  ``E_n = k_n^2 / 2``;
* one bound state ``sqrt(2 kappa/(sinh 2 kappa a - 2 kappa a))
  sinh(kappa (a - |x|))`` with ``kappa coth(kappa a) = |gamma|``,
  ``E_b = -kappa^2 / 2`` (exists iff ``|gamma| > 1/a``).

Both satisfy the wall condition and the kink condition
``psi'(0+) - psi'(0-) = 2 gamma psi(0)``.  Box states are
``cos(kt_m x)/sqrt(a)`` with ``kt_m = (2m - 1) pi / (2a)``.
"""

import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import expm
from scipy.optimize import brentq

from ..errors import ConvergenceError, DegeneracyError, QtrError

ROOT_TOL = 1e-10
COMPLETENESS_TOL = 1e-6
MAX_STATES = 20000


@dataclass(frozen=True)
class DeltaBoxModel:
    """Attributes:
        a: half-width of the box.
        gamma: delta strength (negative, ``|gamma| > 1/a``).
        n_states: optional fixed number of even eigenstates; by default the
            basis is grown until completeness reaches ``1 - 1e-6``.
        quad_points: Gauss--Legendre points per half-box for quadrature checks.
    """

    a: float
    gamma: float
    n_states: int = None
    quad_points: int = 5000

    def __post_init__(self):
        if not self.a > 0:
            raise ValueError("half-width must be positive")
        if not self.gamma < 0:
            raise ValueError("delta strength must be negative")
        if abs(self.gamma) <= 1.0 / self.a:
            raise QtrError(f"no bound state: |gamma| = {abs(self.gamma)} <= 1/a = {1 / self.a}")


@dataclass
class DeltaBoxSpectrum:
    """Even-sector momenta ``k``, bound-state ``kappa``, norms ``N_n`` and
    the bound-state squared normalisation ``2 kappa/(sinh 2 kappa a - 2 kappa a)``."""

    k: np.ndarray
    kappa: float
    norms: np.ndarray
    bound_norm: float

    @property
    def energies(self):
        return self.k ** 2 / 2

    @property
    def bound_energy(self):
        return -self.kappa ** 2 / 2

    def residuals(self, model):
        """Largest ``|k_n cot(k_n a) - |gamma||`` and ``|kappa coth(kappa a) - |gamma||``."""
        g = abs(model.gamma)
        r_even = np.abs(self.k / np.tan(self.k * model.a) - g)
        r_b = abs(self.kappa / math.tanh(self.kappa * model.a) - g)
        return float(np.max(r_even, initial=0.0)), float(r_b)

    def phase_residuals(self, model):
        """Scale-free even-sector residual ``|k cos(ka) - |gamma| sin(ka)| / sqrt(k^2 + gamma^2)``.

        The cotangent form amplifies a one-ulp error in ``k`` by roughly
        ``k a``, so for high states this is the attainable measure.
        """
        g = abs(model.gamma)
        k = self.k
        r = np.abs(k * np.cos(k * model.a) - g * np.sin(k * model.a)) / np.hypot(k, g)
        return float(np.max(r, initial=0.0))


def box_momentum(m_idx, a):
    """``kt_m = (2m - 1) pi / (2a)`` for ``m = 1, 2, ...``."""
    return (2 * np.asarray(m_idx, dtype=float) - 1) * np.pi / (2 * a)


def _polish(f, df, x, lo, hi):
    for _ in range(3):
        d = df(x)
        if d == 0:
            break
        step = f(x) / d
        xn = x - step
        if not lo < xn < hi:
            break
        x = xn
    return x


def _even_root(n, a, g):
    lo, hi = n * math.pi / a, (n + 1) * math.pi / a

    def f(k):
        return k * math.cos(k * a) - g * math.sin(k * a)

    def df(k):
        return math.cos(k * a) - k * a * math.sin(k * a) - g * a * math.cos(k * a)

    root = brentq(f, lo, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=200)
    return _polish(f, df, root, lo, hi)


def bound_kappa(a, gamma):
    """Solve ``kappa coth(kappa a) = |gamma|`` (bisection then Newton)."""
    g = abs(gamma)
    if g <= 1.0 / a:
        raise QtrError("no bound state for |gamma| <= 1/a")

    def f(x):
        return x * math.cosh(x * a) - g * math.sinh(x * a)

    def df(x):
        return math.cosh(x * a) + x * a * math.sinh(x * a) - g * a * math.cosh(x * a)

    # Scale out the exponential growth for the bracketing stage.
    def fs(x):
        return x / math.tanh(x * a) - g

    lo, hi = 1e-12, g + 1.0
    root = brentq(fs, lo, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=200)
    return _polish(f, df, root, lo, hi)


def deltabox_spectrum(m, n_states):
    """First ``n_states`` even-sector momenta, ``kappa`` and norms ``N_n``."""
    g = abs(m.gamma)
    k = np.array([_even_root(n, m.a, g) for n in range(1, n_states + 1)])
    kappa = bound_kappa(m.a, m.gamma)
    norms = m.a - np.sin(2 * k * m.a) / (2 * k)
    spec = DeltaBoxSpectrum(k, kappa, norms,
                            2 * kappa / (math.sinh(2 * kappa * m.a) - 2 * kappa * m.a))
    _, r_b = spec.residuals(m)
    r_even = spec.phase_residuals(m)
    if max(r_even, r_b) > ROOT_TOL:
        raise ConvergenceError(f"root residuals {r_even:.2e}, {r_b:.2e} exceed {ROOT_TOL}")
    return spec


def even_state(m, spec, n, x):
    """Even eigenfunction ``n`` (1-based) on points ``x``."""
    k = spec.k[n - 1]
    return np.sin(k * (m.a - np.abs(x))) / math.sqrt(spec.norms[n - 1])


def bound_state(m, spec, x):
    return math.sqrt(spec.bound_norm) * np.sinh(spec.kappa * (m.a - np.abs(x)))


def box_state(m, m_idx, x):
    return np.cos(box_momentum(m_idx, m.a) * x) / math.sqrt(m.a)


def overlaps(m, spec, m_idx):
    """Closed-form overlaps of box state ``m_idx`` with the eigenbasis.

    Returns:
        tuple: ``(c_b, c)`` where ``c[n-1] = <phi_n | chi_m>``.
    """
    kt = box_momentum(m_idx, m.a)
    k = spec.k
    c = 2 * k * np.cos(k * m.a) / (math.sqrt(m.a) * np.sqrt(spec.norms) * (kt ** 2 - k ** 2))
    kap = spec.kappa
    c_b = (math.sqrt(spec.bound_norm / m.a) * 2 * kap * math.cosh(kap * m.a)
           / (kap ** 2 + kt ** 2))
    return float(c_b), c


def gram_element(m, spec, n, n2):
    """``d_{n,n'} = <phi_n|phi_n'>`` in closed form; ``1`` on the diagonal.

    For ``n != n'``::

        d = 2 [k' sin(k a) cos(k' a) - k sin(k' a) cos(k a)] / (sqrt(N N') (k^2 - k'^2))

    which vanishes by the eigencondition.
    """
    if n == n2:
        k = spec.k[n - 1]
        return float((m.a - math.sin(2 * k * m.a) / (2 * k)) / spec.norms[n - 1])
    k, k2 = spec.k[n - 1], spec.k[n2 - 1]
    num = k2 * math.sin(k * m.a) * math.cos(k2 * m.a) - k * math.sin(k2 * m.a) * math.cos(k * m.a)
    return float(2 * num / (math.sqrt(spec.norms[n - 1] * spec.norms[n2 - 1]) * (k * k - k2 * k2)))


def gauss_grid(m, points=None):
    """Gauss--Legendre nodes/weights on ``[-a, 0]`` and ``[0, a]`` (the kink
    at the origin would spoil a single-panel rule)."""
    points = m.quad_points if points is None else points
    x, w = np.polynomial.legendre.leggauss(points)
    half = m.a / 2
    xs = np.concatenate([half * x - half, half * x + half])
    ws = np.concatenate([w * half, w * half])
    return xs, ws


def quadrature_overlaps(m, spec, m_idx, n_states=None, points=None):
    """Numerical ``(c_b, c)`` by Gauss--Legendre quadrature."""
    xs, ws = gauss_grid(m, points)
    chi = box_state(m, m_idx, xs) * ws
    n_states = spec.k.size if n_states is None else n_states
    c = np.array([even_state(m, spec, n, xs) @ chi for n in range(1, n_states + 1)])
    return float(bound_state(m, spec, xs) @ chi), c


def completeness(m, spec, m_idx):
    c_b, c = overlaps(m, spec, m_idx)
    return float(c_b ** 2 + np.sum(c ** 2))


def adaptive_spectrum(m, indices):
    """Spectrum large enough that every box state in ``indices`` has
    completeness ``>= 1 - 1e-6``; starts at ``4 max(indices)`` states and
    doubles."""
    if m.n_states is not None:
        return deltabox_spectrum(m, m.n_states)
    n = max(4 * max(indices), 8)
    while n <= MAX_STATES:
        spec = deltabox_spectrum(m, n)
        deficit = max(1.0 - completeness(m, spec, i) for i in indices)
        if deficit <= COMPLETENESS_TOL:
            return spec
        n *= 2
    raise ConvergenceError("basis truncation too small: completeness not reached")


def _check_sets(initial, target):
    m1, m2 = initial
    n1, n2 = target
    if m1 < 1 or n1 < 1 or m2 < m1 or n2 < n1:
        raise ValueError("index sets must be 1-based ranges [lo, hi]")
    if not (m2 < n1 or n2 < m1):
        raise QtrError("initial and target index sets overlap")
    return list(range(m1, m2 + 1)), list(range(n1, n2 + 1))


def _amplitudes(m, spec, ms, ns, t):
    """``A[n, m](t) = <chi_n| e^{-iHt} |chi_m>`` and its time derivative."""
    e, eb = spec.energies, spec.bound_energy
    cm = [overlaps(m, spec, i) for i in ms]
    cn = [overlaps(m, spec, i) for i in ns]
    ph = np.exp(-1j * e * t)
    phb = np.exp(-1j * eb * t)
    amp = np.empty((len(ns), len(ms)), complex)
    damp = np.empty_like(amp)
    for a_i, (cbn, c_n) in enumerate(cn):
        for b_i, (cbm, c_m) in enumerate(cm):
            w = c_n * c_m
            amp[a_i, b_i] = np.sum(w * ph) + cbn * cbm * phb
            damp[a_i, b_i] = np.sum(-1j * e * w * ph) - 1j * eb * cbn * cbm * phb
    return amp, damp


def deltabox_transition(m, initial, target, t, normalized=True, spec=None):
    """``(P, k)`` from the box states ``initial = [m1, m2]`` to
    ``target = [n1, n2]``.

    The initial state is the uniform mixture of the ``m2 - m1 + 1`` box
    states; ``normalized=False`` returns the plain double sum instead.
    """
    ms, ns = _check_sets(initial, target)
    spec = adaptive_spectrum(m, ms + ns) if spec is None else spec
    amp, damp = _amplitudes(m, spec, ms, ns, float(t))
    p = float(np.sum(np.abs(amp) ** 2))
    k = float(np.sum(2 * (damp * np.conj(amp)).real))
    if normalized:
        p, k = p / len(ms), k / len(ms)
    return p, k


def deltabox_survival(m, m_idx, t, spec=None):
    """``|<chi_m| e^{-iHt} |chi_m>|^2``."""
    spec = adaptive_spectrum(m, [m_idx]) if spec is None else spec
    amp, _ = _amplitudes(m, spec, [m_idx], [m_idx], float(t))
    return float(abs(amp[0, 0]) ** 2)


def spectral_oracle(m, initial, target, t, n_states=60, points=4000):
    """Independent check: quadrature overlaps in a truncated eigenbasis
    (bound + ``n_states`` even states), matrix-exponential propagation and
    quadrature projection onto the targets.  ``k`` uses the exact
    derivative ``-i H e^{-iHt}`` of the propagated vector."""
    ms, ns = _check_sets(initial, target)
    spec = deltabox_spectrum(m, n_states)
    h = np.diag(np.concatenate([[spec.bound_energy], spec.energies]))
    xs, ws = gauss_grid(m, points)
    basis = np.vstack([bound_state(m, spec, xs)]
                      + [even_state(m, spec, n, xs) for n in range(1, n_states + 1)])
    u = expm(-1j * h * float(t))
    p = k = 0.0
    for i in ms:
        psi_t = u @ (basis @ (box_state(m, i, xs) * ws))
        dpsi = -1j * (h @ psi_t)
        for j in ns:
            tgt = basis @ (box_state(m, j, xs) * ws)
            amp = np.vdot(tgt, psi_t)
            p += abs(amp) ** 2
            k += 2 * (np.vdot(tgt, dpsi) * np.conj(amp)).real
    return p / len(ms), k / len(ms)


def bound_weight(m, spec, m_idx):
    """``|c_{b,m}|^2``."""
    return overlaps(m, spec, m_idx)[0] ** 2


def deltabox_threshold_n(m, initial, spec=None, tol=1e-10):
    """Finite ``n*`` above which the target-based speed limit is tighter::

        n* = ceil[(80 kt_{m2} a / pi^3
                   + 16 kappa^3 a^2 cosh^2(kappa a)
                     / (pi^2 (sinh 2 kappa a - 2 kappa a)(kappa^2 + kt_{m1}^2)))
                  / |1 - 2 |c_{b,m1}|^2|]

    Raises:
        DegeneracyError: if ``|1 - 2|c_{b,m1}|^2| <= tol``.
    """
    m1, m2 = initial
    spec = deltabox_spectrum(m, 4) if spec is None else spec
    kap, a = spec.kappa, m.a
    kt1, kt2 = box_momentum(m1, a), box_momentum(m2, a)
    denom = abs(1.0 - 2.0 * bound_weight(m, spec, m1))
    if denom <= tol:
        raise DegeneracyError(f"|1 - 2|c_b|^2| = {denom:.3e}: threshold formula degenerate")
    num = (80 * kt2 * a / math.pi ** 3
           + 16 * kap ** 3 * a ** 2 * math.cosh(kap * a) ** 2
           / (math.pi ** 2 * (math.sinh(2 * kap * a) - 2 * kap * a) * (kap ** 2 + kt1 ** 2)))
    return int(math.ceil(num / denom))


def tightness_sweep(m, m_idx, targets, times, spec=None):
    """For each target ``n`` check ``P(n,t|m) <= P(m,t|m)`` on ``times``.

    Returns:
        dict: ``n -> smallest slack`` (``P(m|m) - P(n|m)``) over the grid.
    """
    ns = list(targets)
    spec = adaptive_spectrum(m, [m_idx] + ns) if spec is None else spec
    out = {}
    for n in ns:
        slack = min(deltabox_survival(m, m_idx, t, spec)
                    - deltabox_transition(m, (m_idx, m_idx), (n, n), t, spec=spec)[0]
                    for t in times)
        out[n] = slack
    return out


def degenerate_gamma(a=1.0, m_idx=1, bracket=(-50.0, None)):
    """``gamma`` at which ``|c_{b,m}|^2 = 1/2`` (root search)."""
    lo = bracket[0]
    hi = bracket[1] if bracket[1] is not None else -(1.0 / a) * 1.0001

    def f(g):
        spec = deltabox_spectrum(DeltaBoxModel(a, g, n_states=1), 1)
        return bound_weight(DeltaBoxModel(a, g, n_states=1), spec, m_idx) - 0.5

    return brentq(f, lo, hi, xtol=1e-14)
