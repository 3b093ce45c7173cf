"""Seeded random setups for cross-validating QTR routes and bound validity.

All randomness comes from ``numpy.random.Generator(PCG64(seed))``; the draw
order is fixed, so a seed reproduces the same family of setups everywhere.
"""

import math

import numpy as np

from . import bounds
from .engine import (TransitionSetup, check_flux_flux_preconditions, channel_qtr,
                     qtr_direct, qtr_finite_difference, qtr_from_flux_flux,
                     qtr_general_fluxflux)
from .errors import PreconditionError, QtrError
from .evolution import HamiltonianSchedule, LindbladGenerator, dilation_family
from .operators import (TimeGrid, dagger, random_density_matrix, random_hermitian,
                        random_unitary, variance)

KINDS = ("unitary", "stationary", "driven", "lindblad", "kraus")
MEAN_STEPS = 32


def make_rng(seed):
    return np.random.Generator(np.random.PCG64(seed))


def _random_partition(rng, dim, complementary=False):
    basis = random_unitary(rng, dim)
    n_a = int(rng.integers(1, dim))
    n_b = dim - n_a if complementary else int(rng.integers(1, dim - n_a + 1))
    a = basis[:, :n_a]
    b = basis[:, n_a:n_a + n_b]
    return a @ dagger(a), b @ dagger(b), a


def random_setup(rng, kind, dim):
    """One random :class:`TransitionSetup` of the requested kind.

    Kinds: ``unitary`` (static H), ``stationary`` (static H, complementary
    partition, reactant state diagonal in the reactant block -- the
    single-correlator form applies), ``driven`` (``H0 + t H1``), ``lindblad``
    and ``kraus`` (dilation of a system--qubit unitary).
    """
    if kind not in KINDS:
        raise ValueError(f"kind must be one of {KINDS}")
    grid = TimeGrid(0.0, 1.0, 10)
    pi_a, pi_b, a_basis = _random_partition(rng, dim, complementary=(kind == "stationary"))
    rho0 = random_density_matrix(rng, dim, int(rng.integers(1, dim + 1)))
    h = random_hermitian(rng, dim, 0.5)
    if kind == "stationary":
        block = dagger(a_basis) @ h @ a_basis
        _, w = np.linalg.eigh(block)
        vecs = a_basis @ w
        weights = rng.random(vecs.shape[1])
        weights /= weights.sum()
        rho0 = (vecs * weights[None, :]) @ dagger(vecs)
    if kind in ("unitary", "stationary"):
        dyn = HamiltonianSchedule.static(h)
    elif kind == "driven":
        dyn = HamiltonianSchedule.linear(h, random_hermitian(rng, dim, 0.5))
    elif kind == "lindblad":
        n_jump = int(rng.integers(1, 3))
        jumps = [random_hermitian(rng, dim, 0.3) + 1j * random_hermitian(rng, dim, 0.3)
                 for _ in range(n_jump)]
        rates = list(rng.uniform(0.1, 0.5, size=n_jump))
        dyn = LindbladGenerator(h, jumps, rates)
    else:
        dyn = dilation_family(random_hermitian(rng, 2 * dim, 0.5), dim, 2)
    return TransitionSetup(rho0, pi_a, pi_b, dyn, grid, max_dt=0.01)


def oracle_deviations(setup, t):
    """``|k_path - k_FD|`` for every route that applies to ``setup``."""
    fd = qtr_finite_difference(setup, t)
    out = {}
    if setup.kind == "hamiltonian":
        out["direct"] = abs(qtr_direct(setup, t) - fd)
        out["general"] = abs(qtr_general_fluxflux(setup, t) - fd)
        if setup.is_static:
            try:
                check_flux_flux_preconditions(setup)
            except PreconditionError:
                pass
            else:
                out["flux_flux"] = abs(qtr_from_flux_flux(setup, t) - fd)
    else:
        out["channel"] = abs(channel_qtr(setup, t) - fd)
    return out


def bound_slacks(setup, t):
    """Slack (``>= 0`` when satisfied) of every bound that applies.

    * ``mt_rate``: ``2 dH sqrt(P(1-P)) - |k|``;
    * ``superfidelity``: super-fidelity minus the exact fidelity;
    * ``rate_change``: factor-2 Robertson bound minus ``|dk/dt|``;
    * ``tau_mt``: ``t - tau_MT``;
    * ``tau_qtr``: ``tau_QTR dH - 1/2`` (time-independent H, non-stationary rate).
    """
    if setup.kind != "hamiltonian":
        return {}
    out = {
        "mt_rate": bounds.mt_rate_bound(setup, t).slack,
        "superfidelity": bounds.superfidelity_qsl(setup, t, steps=MEAN_STEPS).slack,
        "rate_change": bounds.rate_change_bound(setup, t).slack,
        "tau_mt": t - setup.t0 - bounds.tau_mt(setup, t, steps=MEAN_STEPS),
    }
    if setup.is_static:
        try:
            tq = bounds.tau_qtr(setup, t)
        except QtrError:
            pass
        else:
            dh = math.sqrt(variance(setup.rho_a, setup.hamiltonian(t)))
            out["tau_qtr"] = tq * dh - 0.5
    return out


def random_sweep(seed, count=300, dim_max=8, kinds=KINDS, check_bounds=True):
    """Draw ``count`` setups (kinds cycled) and record route deviations and
    bound slacks.

    Returns:
        list of dicts with keys ``index, kind, dim, t, P, deviations, slacks``.
    """
    from .engine import transition_probability

    rng = make_rng(seed)
    rows = []
    for i in range(count):
        kind = kinds[i % len(kinds)]
        dim = int(rng.integers(2, dim_max + 1))
        setup = random_setup(rng, kind, dim)
        t = float(rng.uniform(0.2, 1.0))
        rows.append({
            "index": i, "kind": kind, "dim": dim, "t": t,
            "P": transition_probability(setup, t),
            "deviations": oracle_deviations(setup, t),
            "slacks": bound_slacks(setup, t) if check_bounds else {},
        })
    return rows
