"""Scalar special functions: sine integral, complex exponential integral and
the argument of Gamma(1 + ix).

All routines are implemented from series / continued fractions so that the
closed-form model evaluators do not depend on a particular SciPy build for
complex arguments.  An independent quadrature route is exposed for Ei and is
used as an oracle in the test-suite.
"""

import cmath
import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate

from .errors import BranchCutError, ConvergenceError

EULER_GAMMA = 0.57721566490153286061
"""Euler--Mascheroni constant (20 digits)."""

_EPS = 1e-17
_MAX_TERMS = 20000


@dataclass(frozen=True)
class SpecialValue:
    """A special-function value together with how it was obtained.

    Attributes:
        argument: the (real or complex) argument.
        value: the function value.
        method: one of ``"series"``, ``"continued-fraction"``,
            ``"asymptotic"`` or ``"quadrature"``.
        error: a conservative estimate of the absolute error.
    """

    argument: complex
    value: complex
    method: str
    error: float


# ---------------------------------------------------------------------------
# E1 continued fraction (modified Lentz)
# ---------------------------------------------------------------------------

def _e1_continued_fraction(w):
    """E1(w) for |w| moderately large and w away from the negative axis.

    Uses the even contraction
    ``E1(w) = e^{-w} / (w + 1 - 1/(w + 3 - 4/(w + 5 - ...)))``.
    Returns ``(value, iterations)``.
    """
    tiny = 1e-300
    b = w + 1.0
    c = 1.0 / tiny
    d = 1.0 / b
    h = d
    for i in range(1, _MAX_TERMS):
        an = -float(i * i)
        b = b + 2.0
        d = an * d + b
        if d == 0:
            d = tiny
        c = b + an / c
        if c == 0:
            c = tiny
        d = 1.0 / d
        delta = c * d
        h = h * delta
        if abs(delta - 1.0) < 1e-16:
            return h * cmath.exp(-w), i
    raise ConvergenceError(f"E1 continued fraction did not converge at w={w!r}")


def _entire_series(z):
    """S(z) = sum_{n>=1} z^n / (n n!) summed until terms are negligible."""
    term = complex(z)
    total = term
    n = 1
    while True:
        n += 1
        term *= z / n
        contrib = term / n
        total += contrib
        if abs(contrib) <= _EPS * max(abs(total), 1e-300):
            break
        if n > _MAX_TERMS:
            raise ConvergenceError(f"Ei series did not converge at z={z!r}")
    return total, n


def _use_series(z):
    # Power series loses relative accuracy like e^{|z|-Re z}; keep it where
    # that amplification is harmless.
    az = abs(z)
    return az <= 3.0 or (az - z.real) <= 3.0


def ei_entire_part(z):
    """Entire part S(z) = Ei(z) - gamma_E - Log z = sum z^n/(n n!).

    Unlike Ei itself this has no branch cut, which makes it the natural
    object for path-continuous differences of Ei.
    """
    z = complex(z)
    if z == 0:
        return 0j
    if _use_series(z):
        return _entire_series(z)[0]
    # -z is then safely away from the negative real axis.
    e1, _ = _e1_continued_fraction(-z)
    return -e1 - EULER_GAMMA - cmath.log(-z)


def exp_integral_ei_value(z):
    """Ei(z) with method tag and error estimate; see :func:`exp_integral_ei`."""
    z = complex(z)
    if z == 0:
        raise BranchCutError("Ei is singular at z = 0")
    if z.imag == 0.0 and z.real < 0.0:
        raise BranchCutError(
            f"Ei evaluated on its branch cut (z = {z.real!r}); the value is ambiguous")
    if _use_series(z):
        s, n = _entire_series(z)
        val = EULER_GAMMA + cmath.log(z) + s
        err = 1e-16 * n * math.exp(abs(z) - z.real) * max(1.0, abs(val))
        return SpecialValue(z, val, "series", err)
    e1, n = _e1_continued_fraction(-z)
    val = -e1 + 1j * math.pi * math.copysign(1.0, z.imag)
    return SpecialValue(z, val, "continued-fraction", 1e-15 * n * max(1.0, abs(val)))


def exp_integral_ei(z):
    """Exponential integral Ei(z) for complex z (principal branch).

    ``Ei(z) = gamma_E + Log z + sum_{n>=1} z^n / (n n!)`` with the branch cut
    on the negative real axis.  Small arguments and arguments near the
    positive real axis use the power series; everything else goes through the
    continued fraction of ``E1(-z)`` and ``Ei(z) = -E1(-z) + i pi sgn(Im z)``.

    Args:
        z: complex argument, not zero and not on the negative real axis.

    Returns:
        complex: Ei(z).

    Raises:
        BranchCutError: for ``z == 0`` or real negative ``z``.
    """
    return exp_integral_ei_value(z).value


def _e1_quadrature(w):
    # E1(w) = e^{-w} int_0^inf e^{-s}/(w + s) ds, valid for |arg w| < pi.
    def re(s):
        return (np.exp(-s) / (w + s)).real

    def im(s):
        return (np.exp(-s) / (w + s)).imag

    opts = dict(limit=400, epsabs=1e-15, epsrel=1e-13)
    a, _ = integrate.quad(re, 0, np.inf, **opts)
    b, _ = integrate.quad(im, 0, np.inf, **opts)
    return cmath.exp(-w) * complex(a, b)


def exp_integral_ei_quadrature(z):
    """Ei(z) by numerical quadrature (independent oracle).

    Only defined off the real axis: ``Ei(z) = -E1(-z) + i pi sgn(Im z)`` with
    E1 from its Laplace-type integral representation.
    """
    z = complex(z)
    if z.imag == 0.0:
        raise BranchCutError("quadrature route requires Im z != 0")
    return -_e1_quadrature(-z) + 1j * math.pi * math.copysign(1.0, z.imag)


# ---------------------------------------------------------------------------
# Sine integral
# ---------------------------------------------------------------------------

def sine_integral_value(x):
    """Si(x) with method tag; see :func:`sine_integral`."""
    x = float(x)
    ax = abs(x)
    if ax == 0.0:
        return SpecialValue(x, 0.0, "series", 0.0)
    if ax <= 4.0:
        # sum (-1)^k x^{2k+1} / ((2k+1) (2k+1)!)
        term = ax
        total = ax
        k = 0
        x2 = ax * ax
        while True:
            k += 1
            term *= -x2 / ((2 * k) * (2 * k + 1))
            c = term / (2 * k + 1)
            total += c
            if abs(c) <= 1e-18 * abs(total):
                break
        val, method, err = total, "series", 1e-15
    else:
        # E1(ix) = -Ci(x) + i (Si(x) - pi/2)
        e1, n = _e1_continued_fraction(1j * ax)
        val, method, err = math.pi / 2 + e1.imag, "continued-fraction", 1e-15 * n
    return SpecialValue(x, math.copysign(val, x), method, err)


def sine_integral(x):
    """Sine integral Si(x) = int_0^x sin(z)/z dz.

    Power series for |x| <= 4; beyond, the continued fraction of E1(ix)
    which is accurate to ~1e-15 for all larger arguments.

    Args:
        x: real argument (scalar or array-like).

    Returns:
        float or ndarray: Si(x).
    """
    if np.ndim(x) == 0:
        return sine_integral_value(x).value
    arr = np.asarray(x, dtype=float)
    out = np.empty_like(arr)
    for idx, v in np.ndenumerate(arr):
        out[idx] = sine_integral_value(v).value
    return out


# ---------------------------------------------------------------------------
# arg Gamma(1 + i x)
# ---------------------------------------------------------------------------

# B_{2k} / (2k (2k-1)) for the Stirling series.
_STIRLING = (
    1.0 / 12.0,
    -1.0 / 360.0,
    1.0 / 1260.0,
    -1.0 / 1680.0,
    1.0 / 1188.0,
    -691.0 / 360360.0,
    1.0 / 156.0,
    -3617.0 / 122400.0,
)
_SHIFT = 12


def log_gamma_arg(x):
    """Continuous argument of Gamma(1 + i x).

    The recurrence ``Gamma(z) = Gamma(z + N) / prod_{j<N} (z + j)`` shifts the
    argument to Re >= 13 where the Stirling series converges to machine
    precision.  Each logarithm involved has positive real part, so the
    imaginary parts add up to the *unwrapped* argument (no 2 pi jumps).

    Args:
        x: real argument (scalar or array-like).

    Returns:
        float or ndarray: Im log Gamma(1 + i x), odd in x.
    """
    if np.ndim(x) != 0:
        arr = np.asarray(x, dtype=float)
        return np.vectorize(log_gamma_arg, otypes=[float])(arr)
    x = float(x)
    if x == 0.0:
        return 0.0
    ax = abs(x)
    w = complex(1 + _SHIFT, ax)
    logw = cmath.log(w)
    s = (w - 0.5) * logw - w + 0.5 * math.log(2 * math.pi)
    winv = 1.0 / w
    winv2 = winv * winv
    p = winv
    for c in _STIRLING:
        s += c * p
        p *= winv2
    shift = sum(math.atan2(ax, 1.0 + j) for j in range(_SHIFT))
    val = s.imag - shift
    return val if x > 0 else -val
