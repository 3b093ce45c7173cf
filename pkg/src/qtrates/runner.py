"""Run a configuration: execute its task, write CSVs and a JSON manifest."""

import hashlib
import json
import logging
import os
import time
from dataclasses import dataclass, field

from . import csvio
from .errors import ConfigError, QtrError
from .tasks import TASKS, RunContext

log = logging.getLogger(__name__)


@dataclass
class RunManifest:
    """Record of one run.

    Attributes:
        experiment: configuration name.
        config_digest: SHA-256 of the canonical configuration.
        files: ``[{"name", "sha256", "rows"}]`` in write order.
        wall_clock: seconds spent in the task.
        counts: step/sample counts reported by the task.
        gates: gate records (name, value, limit, relation, passed).
        summary: oracle-agreement and figure-level quantities.
    """

    experiment: str
    config_digest: str
    seed: object
    files: list = field(default_factory=list)
    wall_clock: float = 0.0
    counts: dict = field(default_factory=dict)
    gates: list = field(default_factory=list)
    summary: dict = field(default_factory=dict)
    plots: list = field(default_factory=list)

    @property
    def passed(self):
        return all(g["passed"] for g in self.gates)

    @property
    def failed_gates(self):
        return [g for g in self.gates if not g["passed"]]

    def to_dict(self):
        return {
            "experiment": self.experiment,
            "config_digest": self.config_digest,
            "seed": self.seed,
            "status": "passed" if self.passed else "gate_failure",
            "files": self.files,
            "plots": self.plots,
            "wall_clock_s": round(self.wall_clock, 3),
            "counts": self.counts,
            "gates": self.gates,
            "summary": self.summary,
        }


def _jsonable(v):
    if isinstance(v, dict):
        return {k: _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    if hasattr(v, "item"):
        v = v.item()
    if isinstance(v, float) and v != v:
        return None
    if isinstance(v, float) and v in (float("inf"), float("-inf")):
        return "inf" if v > 0 else "-inf"
    return v


def validate(cfg):
    """Dry run: model constructibility and grid sanity; writes nothing.

    Returns:
        list of ``(level, message)`` with level ``"warning"`` or ``"error"``.
    """
    task = TASKS[cfg.task]
    ctx = RunContext(cfg)
    try:
        return list(task.check(ctx, task)) if task.check else []
    except (QtrError, ValueError) as exc:
        return [("error", f"{type(exc).__name__}: {exc}")]


def run(cfg, out_dir, threads=1, plot=False):
    """Execute ``cfg`` and write ``<experiment>_<table>.csv`` files plus
    ``<experiment>_manifest.json`` into ``out_dir``.

    Gate failures do not raise: they are recorded in the manifest (check
    :attr:`RunManifest.passed`).

    Raises:
        ConfigError: invalid configuration or unwritable output directory.
        QtrError: numerical failure inside the task.
    """
    diags = validate(cfg)
    errors = [m for level, m in diags if level == "error"]
    if errors:
        raise ConfigError("; ".join(errors))
    for level, msg in diags:
        log.warning("%s", msg)
    try:
        os.makedirs(out_dir, exist_ok=True)
    except OSError as exc:
        raise ConfigError(f"cannot create output directory {out_dir}: {exc}") from exc
    task = TASKS[cfg.task]
    ctx = RunContext(cfg, threads)
    start = time.perf_counter()
    result = task.run(ctx, task)
    elapsed = time.perf_counter() - start

    manifest = RunManifest(cfg.experiment, cfg.digest(), cfg.seed)
    written = []
    for suffix, columns in result.tables:
        name = f"{cfg.experiment}_{suffix}.csv"
        path = os.path.join(out_dir, name)
        text = csvio.write_csv(path, columns)
        written.append((path, columns))
        manifest.files.append({"name": name,
                               "sha256": hashlib.sha256(text.encode()).hexdigest(),
                               "rows": text.count("\n") - 1})
    manifest.wall_clock = elapsed
    manifest.counts = _jsonable(result.counts)
    manifest.gates = [_jsonable(g.to_dict()) for g in result.gates]
    manifest.summary = _jsonable(result.summary)
    if plot:
        from .plotting import plot_tables
        manifest.plots = plot_tables(written)
    with open(os.path.join(out_dir, f"{cfg.experiment}_manifest.json"), "w") as fh:
        json.dump(manifest.to_dict(), fh, indent=2, sort_keys=False)
        fh.write("\n")
    for g in result.gates:
        (log.info if g.passed else log.error)("gate %s", g.describe())
    return manifest
