"""Run configuration: YAML loading, schema validation and canonical digests.

A configuration is a nested mapping::

    experiment: tls-qsl          # free-form name, used as the CSV file prefix
    task: qsl                    # pipeline, see :data:`qtrates.tasks.TASKS`
    model: {kind: tls, delta: 0.5, w: 1.0}
    grid: {t_start: 0.0, t_end: 10.0, n_steps: 400}
    paths: [direct, finite_difference]
    bounds: [mt_rate, superfidelity, tightness, rate_change]
    sweep: {...}                 # task-specific sweep parameters
    seed: null                   # mandatory for randomized tasks
    tolerances: {path_agreement: 1.0e-6}

Unknown keys anywhere in the schema are rejected with :class:`ConfigError`.
Randomized tasks draw from ``numpy.random.Generator(PCG64(seed))``.
"""

import copy
import hashlib
import json
import math
from dataclasses import dataclass, field

import yaml

from .errors import ConfigError

TOP_LEVEL_KEYS = ("experiment", "task", "model", "grid", "paths", "bounds", "sweep",
                  "seed", "tolerances")
GRID_KEYS = ("t_start", "t_end", "n_steps")
BOUND_NAMES = ("mt_rate", "superfidelity", "tightness", "rate_change")
PRNG_NAME = "PCG64"


@dataclass
class RunConfig:
    """Validated run configuration (see module docstring for the layout)."""

    experiment: str
    task: str
    model: dict
    grid: dict = field(default_factory=dict)
    paths: list = field(default_factory=list)
    bounds: list = field(default_factory=list)
    sweep: dict = field(default_factory=dict)
    seed: object = None
    tolerances: dict = field(default_factory=dict)

    def to_dict(self):
        return {
            "experiment": self.experiment,
            "task": self.task,
            "model": copy.deepcopy(self.model),
            "grid": dict(self.grid),
            "paths": list(self.paths),
            "bounds": list(self.bounds),
            "sweep": copy.deepcopy(self.sweep),
            "seed": self.seed,
            "tolerances": dict(self.tolerances),
        }

    def to_yaml(self):
        return yaml.safe_dump(self.to_dict(), sort_keys=False, default_flow_style=None)

    def digest(self):
        """SHA-256 of the canonical JSON form."""
        text = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(text.encode()).hexdigest()


def _check_keys(section, allowed, where):
    if not isinstance(section, dict):
        raise ConfigError(f"{where} must be a mapping")
    unknown = sorted(set(section) - set(allowed))
    if unknown:
        raise ConfigError(f"unknown key(s) in {where}: {', '.join(map(str, unknown))}")


def _check_number(value, where, integer=False, positive=False):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{where} must be a number, got {value!r}")
    if integer and int(value) != value:
        raise ConfigError(f"{where} must be an integer, got {value!r}")
    if not math.isfinite(value):
        raise ConfigError(f"{where} must be finite")
    if positive and value <= 0:
        raise ConfigError(f"{where} must be positive")


def check_grid(grid):
    _check_keys(grid, GRID_KEYS, "grid")
    for key in GRID_KEYS:
        if key not in grid:
            raise ConfigError(f"grid.{key} is required")
    _check_number(grid["t_start"], "grid.t_start")
    _check_number(grid["t_end"], "grid.t_end")
    _check_number(grid["n_steps"], "grid.n_steps", integer=True, positive=True)
    if not grid["t_end"] > grid["t_start"]:
        raise ConfigError("grid.t_end must exceed grid.t_start")


def _check_value(value, default, where):
    """Type-check a parameter against its default's type."""
    if default is None:
        return
    if isinstance(default, bool):
        if not isinstance(value, bool):
            raise ConfigError(f"{where} must be true or false")
    elif isinstance(default, (int, float)):
        _check_number(value, where, integer=isinstance(default, int))
    elif isinstance(default, str):
        if not isinstance(value, str):
            raise ConfigError(f"{where} must be a string")
    elif isinstance(default, list):
        if not isinstance(value, list):
            raise ConfigError(f"{where} must be a list")


def parse_config(data):
    """Validate a raw mapping and return a :class:`RunConfig`.

    Raises:
        ConfigError: on unknown keys, missing sections or wrong types.
    """
    from .tasks import TASKS, task_tolerances

    _check_keys(data, TOP_LEVEL_KEYS, "config")
    for key in ("experiment", "task", "model"):
        if key not in data:
            raise ConfigError(f"missing required key {key!r}")
    name = data["experiment"]
    if not isinstance(name, str) or not name or any(c in name for c in "/\\ "):
        raise ConfigError("experiment must be a non-empty name without spaces or slashes")
    task_name = data["task"]
    if task_name not in TASKS:
        raise ConfigError(f"unknown task {task_name!r}; choose from {sorted(TASKS)}")
    task = TASKS[task_name]

    model = data["model"]
    if not isinstance(model, dict) or "kind" not in model:
        raise ConfigError("model must be a mapping with a 'kind'")
    kind = model["kind"]
    if kind not in task.models:
        raise ConfigError(f"task {task_name!r} supports models {sorted(task.models)}, not {kind!r}")
    params = task.models[kind]
    _check_keys(model, ("kind",) + tuple(params), "model")
    for key, value in model.items():
        if key != "kind":
            _check_value(value, params[key], f"model.{key}")

    grid = data.get("grid") or {}
    if task.needs_grid:
        check_grid(grid)
    elif grid:
        raise ConfigError(f"task {task_name!r} takes no grid")

    paths = data.get("paths") or []
    if not isinstance(paths, list):
        raise ConfigError("paths must be a list")
    bad = [p for p in paths if p not in task.paths]
    if bad:
        raise ConfigError(f"task {task_name!r} supports paths {list(task.paths)}, not {bad}")
    bounds = data.get("bounds") or []
    if not isinstance(bounds, list):
        raise ConfigError("bounds must be a list")
    bad = [b for b in bounds if b not in task.bounds]
    if bad:
        raise ConfigError(f"task {task_name!r} supports bounds {list(task.bounds)}, not {bad}")

    sweep = data.get("sweep") or {}
    _check_keys(sweep, tuple(task.sweep), "sweep")
    for key, value in sweep.items():
        _check_value(value, task.sweep[key], f"sweep.{key}")

    seed = data.get("seed")
    if seed is not None:
        if isinstance(seed, bool) or not isinstance(seed, int) or not 0 <= seed < 2 ** 64:
            raise ConfigError("seed must be an unsigned 64-bit integer")
    if task.randomized and seed is None:
        raise ConfigError(f"task {task_name!r} is randomized: a seed is mandatory")

    tols = data.get("tolerances") or {}
    known = task_tolerances(task_name)
    _check_keys(tols, tuple(known), "tolerances")
    for key, value in tols.items():
        _check_number(value, f"tolerances.{key}", positive=True)

    return RunConfig(name, task_name, copy.deepcopy(model), dict(grid), list(paths),
                     list(bounds), copy.deepcopy(sweep), seed, dict(tols))


def load_config(path):
    """Read and validate a YAML configuration file."""
    try:
        with open(path) as fh:
            data = yaml.safe_load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except yaml.YAMLError as exc:
        raise ConfigError(f"malformed YAML in {path}: {exc}") from exc
    if data is None:
        raise ConfigError(f"config {path} is empty")
    return parse_config(data)


def parse_tolerance_override(text):
    """Parse ``name=value`` from the command line."""
    if "=" not in text:
        raise ConfigError(f"tolerance override {text!r} must look like name=value")
    name, value = text.split("=", 1)
    try:
        return name.strip(), float(value)
    except ValueError as exc:
        raise ConfigError(f"tolerance value {value!r} is not a number") from exc


def with_overrides(cfg, seed=None, tolerances=()):
    """Copy of ``cfg`` with a new seed and/or tolerance overrides applied
    (re-validated)."""
    data = cfg.to_dict()
    if seed is not None:
        data["seed"] = seed
    for name, value in tolerances:
        data["tolerances"][name] = value
    return parse_config(data)
