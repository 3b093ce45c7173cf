"""Dense complex linear algebra on operators, projectors and density matrices.

Operators are plain ``numpy`` complex arrays of shape ``(d, d)``; the helpers
below validate the invariants each role requires (Hermiticity, idempotency,
unit trace, ...) and raise the package exceptions when they are violated.
"""

from dataclasses import dataclass

import numpy as np
from scipy import linalg

from .errors import (DensityMatrixError, DimensionError, NotHermitianError,
                     ProjectorError)

HERMITIAN_TOL = 1e-10
PROJECTOR_HERM_TOL = 1e-12
PROJECTOR_IDEM_TOL = 1e-10
DENSITY_TRACE_TOL = 1e-10
DENSITY_EIG_TOL = 1e-10


def as_operator(a, dim=None):
    """Return ``a`` as a finite square complex array.

    Args:
        a: array-like, square.
        dim: optional expected dimension.

    Raises:
        DimensionError: if not square / wrong dimension.
        ValueError: if entries are not finite.
    """
    m = np.asarray(a, dtype=complex)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise DimensionError(f"expected a square matrix, got shape {m.shape}")
    if dim is not None and m.shape[0] != dim:
        raise DimensionError(f"expected dimension {dim}, got {m.shape[0]}")
    if not np.all(np.isfinite(m)):
        raise ValueError("operator has non-finite entries")
    return m


def _check_same_dim(a, b):
    if a.shape != b.shape:
        raise DimensionError(f"dimension mismatch: {a.shape} vs {b.shape}")


def dagger(a):
    """Conjugate transpose."""
    return np.conj(np.swapaxes(a, -1, -2))


def commutator(a, b):
    """Return ``ab - ba``.

    Raises:
        DimensionError: if the shapes differ.
    """
    a = np.asarray(a)
    b = np.asarray(b)
    _check_same_dim(a, b)
    return a @ b - b @ a


def anticommutator(a, b):
    """Return ``ab + ba``."""
    a = np.asarray(a)
    b = np.asarray(b)
    _check_same_dim(a, b)
    return a @ b + b @ a


def hermiticity_error(a):
    """Max-norm of ``a - a^dagger``."""
    a = np.asarray(a)
    if a.size == 0:
        return 0.0
    return float(np.max(np.abs(a - dagger(a))))


def is_hermitian(a, tol=HERMITIAN_TOL):
    return hermiticity_error(a) <= tol


def check_hermitian(a, tol=HERMITIAN_TOL, name="operator"):
    """Validate Hermiticity and return the input as a complex array."""
    m = as_operator(a)
    err = hermiticity_error(m)
    if err > tol:
        raise NotHermitianError(f"{name} is not Hermitian (max|A - A^+| = {err:.3e})")
    return m


def hermitize(a):
    """Symmetrised part ``(a + a^dagger)/2``."""
    return 0.5 * (a + dagger(a))


def hermitian_expm(h, s, tol=HERMITIAN_TOL):
    """Matrix exponential ``exp(s h)`` of a Hermitian ``h`` via eigendecomposition.

    Args:
        h: Hermitian matrix.
        s: complex scalar (``-1j*t`` gives the time-evolution operator).
        tol: Hermiticity tolerance.

    Returns:
        ndarray: ``exp(s h)``.

    Raises:
        NotHermitianError: if ``h`` is not Hermitian within ``tol``.
    """
    h = check_hermitian(h, tol)
    w, v = np.linalg.eigh(hermitize(h))
    return (v * np.exp(s * w)) @ dagger(v)


def expectation(rho, o):
    """``tr(rho o)`` (complex)."""
    rho = np.asarray(rho)
    o = np.asarray(o)
    _check_same_dim(rho, o)
    return np.einsum("ij,ji->", rho, o)


def variance(rho, o):
    """Variance ``tr(rho o^2) - tr(rho o)^2`` of a Hermitian observable.

    Tiny negative values from roundoff are clamped to zero.
    """
    rho = np.asarray(rho)
    o = np.asarray(o)
    _check_same_dim(rho, o)
    mean = expectation(rho, o).real
    second = expectation(rho, o @ o).real
    return max(second - mean * mean, 0.0)


def psd_sqrt(m, tol=DENSITY_EIG_TOL):
    """Square root of a positive semidefinite Hermitian matrix.

    Eigenvalues in ``[-tol, 0)`` are treated as zero.

    Raises:
        DensityMatrixError: if an eigenvalue is below ``-tol``.
    """
    w, v = np.linalg.eigh(hermitize(np.asarray(m, dtype=complex)))
    if w.size and w.min() < -tol:
        raise DensityMatrixError(f"matrix is not positive semidefinite (min eig {w.min():.3e})")
    w = np.clip(w, 0.0, None)
    return (v * np.sqrt(w)) @ dagger(v)


def uhlmann_fidelity(rho, sigma, rank_tol=1e-12):
    """Uhlmann fidelity ``F = (tr sqrt(sqrt(rho) sigma sqrt(rho)))^2``.

    Computed as ``||A^dag B||_tr^2`` from factors ``rho = A A^dag`` and
    ``sigma = B B^dag``.  Eigenvalues below ``rank_tol`` times the largest
    one are treated as zero: taking square roots of rounding noise
    (``~1e-17``) would otherwise add ``~1e-8`` to ``F``.
    """
    rho = np.asarray(rho, dtype=complex)
    sigma = np.asarray(sigma, dtype=complex)
    _check_same_dim(rho, sigma)
    factors = []
    for m in (rho, sigma):
        w = np.linalg.eigvalsh(hermitize(m))
        if w.size and w.min() < -DENSITY_EIG_TOL:
            raise DensityMatrixError("fidelity arguments are not positive semidefinite")
        factors.append(range_factor(m, rank_tol * max(float(w.max(initial=0.0)), 1e-300)))
    a, b = factors
    if a.shape[1] == 0 or b.shape[1] == 0:
        return 0.0
    s = np.linalg.svd(dagger(a) @ b, compute_uv=False)
    return min(max(float(np.sum(s)) ** 2, 0.0), 1.0)


def purity(rho):
    rho = np.asarray(rho)
    return float(np.einsum("ij,ji->", rho, rho).real)


def mixedness(rho):
    """Mixedness ``sqrt(1 - tr rho^2)``: zero for pure states."""
    return float(np.sqrt(max(1.0 - purity(rho), 0.0)))


def is_diagonal(m):
    """True when every off-diagonal entry is exactly zero."""
    m = np.asarray(m)
    return not np.any(m - np.diag(np.diag(m)))


def range_factor(m, tol=1e-14):
    """Factor ``F`` with ``m = F F^dagger`` for a positive semidefinite ``m``.

    Diagonal inputs are factored without an eigendecomposition.
    """
    m = np.asarray(m)
    if is_diagonal(m):
        w = np.diag(m).real
        idx = np.flatnonzero(w > tol)
        f = np.zeros((m.shape[0], idx.size))
        f[idx, np.arange(idx.size)] = np.sqrt(w[idx])
        return f
    w, v = np.linalg.eigh(hermitize(m))
    keep = w > tol
    return v[:, keep] * np.sqrt(w[keep])


def as_projector(p, herm_tol=PROJECTOR_HERM_TOL, idem_tol=PROJECTOR_IDEM_TOL):
    """Validate an orthogonal projector and return it as a complex array.

    Raises:
        ProjectorError: if Hermiticity, idempotency or integer trace fail.
    """
    m = as_operator(p)
    if is_diagonal(m):
        d = np.diag(m)
        if np.max(np.abs(d * d - d), initial=0.0) > idem_tol or np.any(np.abs(d.imag) > herm_tol):
            raise ProjectorError("diagonal projector entries must be 0 or 1")
        return m
    if hermiticity_error(m) > herm_tol:
        raise ProjectorError("projector is not Hermitian")
    if m.size and np.max(np.abs(m @ m - m)) > idem_tol:
        raise ProjectorError("projector is not idempotent")
    tr = np.trace(m).real
    if abs(tr - round(tr)) > 1e-8:
        raise ProjectorError(f"projector trace {tr} is not an integer")
    return m


def projector_rank(p):
    """Rank of a projector, i.e. its (rounded) trace."""
    return int(round(np.trace(np.asarray(p)).real))


def projector_onto(vectors, dim=None):
    """Orthogonal projector onto the span of the given column vectors.

    Args:
        vectors: array of shape ``(d,)`` or ``(d, r)``; or a sequence of
            basis indices when ``dim`` is given.
        dim: if given, ``vectors`` is interpreted as a list of computational
            basis indices.
    """
    if dim is not None:
        p = np.zeros((dim, dim), dtype=complex)
        for i in vectors:
            p[i, i] = 1.0
        return p
    v = np.asarray(vectors, dtype=complex)
    if v.ndim == 1:
        v = v[:, None]
    q, _ = np.linalg.qr(v)
    return q @ dagger(q)


def as_density_matrix(rho, trace_tol=DENSITY_TRACE_TOL, eig_tol=DENSITY_EIG_TOL):
    """Validate a density matrix (Hermitian, unit trace, PSD)."""
    m = as_operator(rho)
    if hermiticity_error(m) > 1e-12 * max(1.0, np.max(np.abs(m))) + 1e-12:
        raise DensityMatrixError("density matrix is not Hermitian")
    tr = np.trace(m).real
    if abs(tr - 1.0) > trace_tol:
        raise DensityMatrixError(f"density matrix trace is {tr}, expected 1")
    w = np.diag(m).real if is_diagonal(m) else np.linalg.eigvalsh(hermitize(m))
    if w.min() < -eig_tol:
        raise DensityMatrixError(f"density matrix has negative eigenvalue {w.min():.3e}")
    return m


def pure_state(vec):
    """Density matrix ``|v><v|`` of a (normalised) state vector."""
    v = np.asarray(vec, dtype=complex).ravel()
    v = v / np.linalg.norm(v)
    return np.outer(v, v.conj())


def basis_state(dim, index):
    v = np.zeros(dim, dtype=complex)
    v[index] = 1.0
    return v


# ---------------------------------------------------------------------------
# Random instances (all take a numpy Generator)
# ---------------------------------------------------------------------------

def random_hermitian(rng, dim, scale=1.0):
    """GUE-like random Hermitian matrix with entries of size ~``scale``."""
    a = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    return scale * 0.5 * (a + a.conj().T)


def random_unitary(rng, dim):
    """Haar-random unitary via QR of a complex Ginibre matrix."""
    z = (rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))) / np.sqrt(2)
    q, r = np.linalg.qr(z)
    d = np.diagonal(r)
    return q * (d / np.abs(d))


def random_density_matrix(rng, dim, rank=None):
    """Random density matrix of the given rank (default full rank)."""
    rank = dim if rank is None else rank
    g = rng.normal(size=(dim, rank)) + 1j * rng.normal(size=(dim, rank))
    rho = g @ g.conj().T
    return rho / np.trace(rho).real


def random_state_in(rng, projector, rank=1):
    """Random density matrix supported inside the range of ``projector``."""
    p = np.asarray(projector)
    w, v = np.linalg.eigh(hermitize(p))
    basis = v[:, w > 0.5]
    r = basis.shape[1]
    rho_small = random_density_matrix(rng, r, min(rank, r))
    return basis @ rho_small @ dagger(basis)


# ---------------------------------------------------------------------------
# Time grid
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class TimeGrid:
    """Uniform time grid ``t_start + j dt``, ``j = 0..n_steps``."""

    t_start: float
    t_end: float
    n_steps: int

    def __post_init__(self):
        if int(self.n_steps) < 1:
            raise ValueError("n_steps must be >= 1")
        if not self.t_end > self.t_start:
            raise ValueError("t_end must exceed t_start")

    @property
    def dt(self):
        return (self.t_end - self.t_start) / self.n_steps

    @property
    def span(self):
        return self.t_end - self.t_start

    @property
    def samples(self):
        return self.t_start + self.dt * np.arange(self.n_steps + 1)

    def contains(self, t, tol=1e-12):
        return self.t_start - tol <= t <= self.t_end + tol


# ---------------------------------------------------------------------------
# Plain-text matrix format
# ---------------------------------------------------------------------------

def format_complex(z):
    """``re+imj`` token at 17 significant digits."""
    z = complex(z)
    return f"{z.real:.17g}{z.imag:+.17g}j"


def format_matrix(m):
    """Serialise a square matrix: header ``dim N`` then row-major tokens."""
    m = as_operator(m)
    lines = [f"dim {m.shape[0]}"]
    for row in m:
        lines.append(" ".join(format_complex(z) for z in row))
    return "\n".join(lines) + "\n"


def parse_matrix(text):
    """Inverse of :func:`format_matrix`."""
    tokens = text.split()
    if len(tokens) < 2 or tokens[0] != "dim":
        raise ValueError("matrix text must start with a 'dim N' header")
    n = int(tokens[1])
    body = tokens[2:]
    if len(body) != n * n:
        raise DimensionError(f"expected {n * n} entries, found {len(body)}")
    vals = np.array([complex(tok) for tok in body], dtype=complex)
    return vals.reshape(n, n)


def write_matrix(path, m):
    with open(path, "w", newline="\n") as fh:
        fh.write(format_matrix(m))


def read_matrix(path):
    with open(path) as fh:
        return parse_matrix(fh.read())


def pauli():
    """Return ``(sx, sy, sz)`` as complex 2x2 arrays."""
    sx = np.array([[0, 1], [1, 0]], dtype=complex)
    sy = np.array([[0, -1j], [1j, 0]], dtype=complex)
    sz = np.array([[1, 0], [0, -1]], dtype=complex)
    return sx, sy, sz


def taylor_expm(a, terms=20):
    """Truncated Taylor series of ``exp(a)`` (test oracle, small norms only)."""
    a = np.asarray(a, dtype=complex)
    out = np.eye(a.shape[0], dtype=complex)
    term = np.eye(a.shape[0], dtype=complex)
    for k in range(1, terms + 1):
        term = term @ a / k
        out = out + term
    return out


def expm(a):
    """General matrix exponential (re-exported from SciPy)."""
    return linalg.expm(np.asarray(a, dtype=complex))
