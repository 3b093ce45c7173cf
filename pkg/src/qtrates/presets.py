"""Named run configurations for the built-in experiments."""

import copy
import math

from .config import parse_config

_PRESETS = {
    "tls-qsl": (
        "TLS: closed forms, all Hamiltonian QTR routes and the speed-limit bounds",
        {"task": "qsl",
         "model": {"kind": "tls", "delta": 0.5, "w": 1.0},
         "grid": {"t_start": 0.0, "t_end": 10.0, "n_steps": 200},
         "paths": ["direct", "finite_difference", "flux_flux", "general"],
         "bounds": ["mt_rate", "superfidelity", "tightness", "rate_change"]}),
    "bj-pab-negative": (
        "Bixon-Jortner P(B,t|A), N=2000, W=2, Delta=1, windows below zero energy",
        {"task": "bixon_jortner",
         "model": {"kind": "bixon_jortner", "delta": 1.0, "w": 2.0, "n": 2000},
         "grid": {"t_start": 0.0, "t_end": 1.0, "n_steps": 100},
         "paths": ["direct"],
         "sweep": {"windows": [0.35, 0.4, 0.47], "survival": True}}),
    "bj-pab-positive": (
        "Bixon-Jortner P(B,t|A), N=2000, W=2, Delta=1, windows crossing zero energy",
        {"task": "bixon_jortner",
         "model": {"kind": "bixon_jortner", "delta": 1.0, "w": 2.0, "n": 2000},
         "grid": {"t_start": 0.0, "t_end": 1.0, "n_steps": 100},
         "paths": ["direct"],
         "sweep": {"windows": [0.53, 0.75, 1.0]}}),
    "bj-kab": (
        "Bixon-Jortner QTRs incl. the negative-rate window, checked against finite differences",
        {"task": "bixon_jortner",
         "model": {"kind": "bixon_jortner", "delta": 1.0, "w": 2.0, "n": 2000},
         "grid": {"t_start": 0.0, "t_end": 1.0, "n_steps": 100},
         "paths": ["direct", "finite_difference"],
         "sweep": {"windows": [0.47, 0.53, 0.75, 1.0]}}),
    "tfim-fluxflux": (
        "TFIM ramp, L=400: P, k and the flux-flux correlator for tau in {2, 8, 32}",
        {"task": "fluxflux",
         "model": {"kind": "tfim", "L": 400, "g0": 2.0, "k_b": math.pi / 2},
         "sweep": {"taus": [2.0, 8.0, 32.0], "samples": 401}}),
    "tfim-cd-pab": (
        "TFIM Krylov-CD sudden limit, L=1600: ln P(B,n|A) vs. Krylov order n",
        {"task": "cd_pab",
         "model": {"kind": "tfim", "L": 1600, "tau": 1.0, "k_b": math.pi},
         "sweep": {"n": [20, 30, 50, 70, 100, 150, 200]}}),
    "tfim-cd-kab": (
        "TFIM Krylov-CD sudden limit, L=1600: k(n) and its log-slope in 1/n",
        {"task": "cd_kab",
         "model": {"kind": "tfim", "L": 1600, "tau": 1.0, "k_b": math.pi},
         "sweep": {"n": [20, 30, 50, 70, 100, 150, 200]}}),
    "deltabox-transition": (
        "Delta potential in a box (gamma=-3, a=1): P, k, oracle and threshold sweep",
        {"task": "deltabox",
         "model": {"kind": "delta_box", "a": 1.0, "gamma": -3.0},
         "grid": {"t_start": 0.0, "t_end": 10.0, "n_steps": 400}}),
    "zeno-suppression": (
        "TLS under repeated target measurements: suppression and quadratic onset",
        {"task": "zeno",
         "model": {"kind": "tls", "delta": 0.0, "w": 1.0},
         "sweep": {"t": 1.0, "n": [1, 10, 100, 1000], "small_t": 1e-3, "drive": 1.0}}),
    "cd-geometric-bound": (
        "Counterdiabatic TLS sweep: transitionless check and geometric bound",
        {"task": "geometric",
         "model": {"kind": "tls_path", "lam0": -3.0, "rate": 3.0, "w": 1.0},
         "grid": {"t_start": 0.0, "t_end": 2.0, "n_steps": 2000}}),
}

PRESET_NAMES = tuple(_PRESETS)


def list_presets():
    """``[(name, description), ...]`` in a fixed order."""
    return [(name, desc) for name, (desc, _) in _PRESETS.items()]


def preset_config(name):
    """Validated :class:`~qtrates.config.RunConfig` for a preset."""
    if name not in _PRESETS:
        raise KeyError(f"unknown preset {name!r}; choose from {', '.join(PRESET_NAMES)}")
    data = copy.deepcopy(_PRESETS[name][1])
    data["experiment"] = name
    return parse_config(data)
