"""Deterministic CSV serialisation (17 significant digits, LF endings)."""

import io

import numpy as np


def format_value(v):
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    v = float(v)
    if v == 0.0:
        return "0"
    return f"{v:.17g}"


def format_csv(columns):
    """Render an ordered mapping ``name -> 1-d array`` as CSV text."""
    names = list(columns)
    arrays = [np.asarray(columns[n]) for n in names]
    lengths = {len(a) for a in arrays}
    if len(lengths) > 1:
        raise ValueError("all CSV columns must have the same length")
    buf = io.StringIO()
    buf.write(",".join(names) + "\n")
    for row in zip(*arrays):
        buf.write(",".join(format_value(v) for v in row) + "\n")
    return buf.getvalue()


def write_csv(path, columns):
    text = format_csv(columns)
    with open(path, "w", newline="\n") as fh:
        fh.write(text)
    return text


def read_csv(path):
    """Read a CSV written by :func:`write_csv` into ``name -> float array``."""
    with open(path) as fh:
        header = fh.readline().strip().split(",")
        rows = [line.strip().split(",") for line in fh if line.strip()]
    data = np.array(rows, dtype=float).reshape(len(rows), len(header))
    return {name: data[:, i] for i, name in enumerate(header)}
