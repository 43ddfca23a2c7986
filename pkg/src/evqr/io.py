"""CSV and JSON formats used by the command line.

Measure files are comma-separated with a header: ``w,u1,...,u{d}`` for the
reference measure and ``w,x1,...,x{d_x},y1,...,y{d_y}`` for the data measure.
Floats are written with 17 significant digits so they round-trip exactly.
"""
from __future__ import annotations

import csv
import json
import logging
import math
import re
from pathlib import Path

import numpy as np

from .measures import DiscreteMeasure

logger = logging.getLogger(__name__)

RENORMALIZE_TOL = 1e-6


class InputError(Exception):
    """Unreadable or malformed input file; the message names the offending line."""


def fmt(v: float) -> str:
    return format(float(v), ".17g")


def _read_table(path) -> tuple[list[str], np.ndarray]:
    path = Path(path)
    try:
        fh = path.open(newline="")
    except OSError as exc:
        raise InputError(f"{path}: {exc.strerror or exc}") from exc
    with fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise InputError(f"{path}: empty file") from None
        rows = []
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != len(header):
                raise InputError(f"{path}:{lineno}: expected {len(header)} fields, got {len(row)}")
            try:
                rows.append([float(c) for c in row])
            except ValueError as exc:
                raise InputError(f"{path}:{lineno}: {exc}") from None
    if not rows:
        raise InputError(f"{path}: no data rows")
    return header, np.array(rows, dtype=float)


def _check_columns(path, header: list[str], prefixes: list[str]) -> list[int]:
    if not header or header[0] != "w":
        raise InputError(f"{path}:1: first column must be 'w', got {header[:1]}")
    counts = []
    pos = 1
    for prefix in prefixes:
        k = 0
        while pos < len(header) and re.fullmatch(rf"{prefix}{k + 1}", header[pos]):
            k += 1
            pos += 1
        counts.append(k)
    if pos != len(header):
        raise InputError(f"{path}:1: unexpected column {header[pos]!r}")
    return counts


def _measure(path, weights: np.ndarray, points: np.ndarray) -> DiscreteMeasure:
    total = weights.sum()
    if abs(total - 1.0) > 1e-12:
        if abs(total - 1.0) > RENORMALIZE_TOL:
            raise InputError(f"{path}: weights sum to {total!r}, expected 1")
        logger.info("%s: renormalizing weights (sum %r)", path, total)
        weights = weights / total
    try:
        return DiscreteMeasure(weights, points)
    except ValueError as exc:
        raise InputError(f"{path}: {exc}") from exc


def read_mu_csv(path) -> DiscreteMeasure:
    header, data = _read_table(path)
    (d,) = _check_columns(path, header, ["u"])
    if d == 0:
        raise InputError(f"{path}:1: no u columns")
    return _measure(path, data[:, 0], data[:, 1:])


def read_nu_csv(path) -> tuple[DiscreteMeasure, int]:
    """Returns the (x, y) measure and the number of covariate columns."""
    header, data = _read_table(path)
    d_x, d_y = _check_columns(path, header, ["x", "y"])
    if d_y == 0:
        raise InputError(f"{path}:1: no y columns")
    return _measure(path, data[:, 0], data[:, 1:]), d_x


def write_mu_csv(path, mu: DiscreteMeasure) -> None:
    _write_rows(path, ["w"] + [f"u{k + 1}" for k in range(mu.dim)], np.column_stack([mu.weights, mu.points]))


def write_nu_csv(path, nu: DiscreteMeasure, d_x: int) -> None:
    d_y = nu.dim - d_x
    header = ["w"] + [f"x{k + 1}" for k in range(d_x)] + [f"y{k + 1}" for k in range(d_y)]
    _write_rows(path, header, np.column_stack([nu.weights, nu.points]))


def _write_rows(path, header, rows, index=False) -> None:
    with Path(path).open("w", newline="") as fh:
        fh.write(",".join(header) + "\n")
        for i, row in enumerate(np.atleast_2d(rows)):
            cells = ([str(i)] if index else []) + [fmt(v) for v in row]
            fh.write(",".join(cells) + "\n")


def write_coupling_csv(path, pi: np.ndarray) -> None:
    """Dense matrix: one line per mu-atom, one column per nu-atom."""
    pi = np.atleast_2d(pi)
    _write_rows(path, ["i"] + [f"nu{j}" for j in range(pi.shape[1])], pi, index=True)


def read_coupling_csv(path) -> np.ndarray:
    _, data = _read_table(path)
    return data[:, 1:]


def h_path(path) -> Path:
    path = Path(path)
    return path.with_name(f"{path.stem}_h{path.suffix or '.csv'}")


def write_potentials_csv(path, f: np.ndarray, g: np.ndarray, h: np.ndarray) -> tuple[Path, Path]:
    """Writes ``(f, g)`` per mu-atom to ``path`` and ``h`` per nu-atom to ``<stem>_h<suffix>``."""
    g = np.asarray(g).reshape(len(f), -1)
    _write_rows(path, ["i", "f"] + [f"g{k + 1}" for k in range(g.shape[1])], np.column_stack([f, g]), index=True)
    hp = h_path(path)
    _write_rows(hp, ["j", "h"], np.asarray(h).reshape(-1, 1), index=True)
    return Path(path), hp


def read_potentials_csv(path) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    _, fg = _read_table(path)
    _, hh = _read_table(h_path(path))
    return fg[:, 1], fg[:, 2:], hh[:, 1]


def dumps_json(obj, indent: int = 2) -> str:
    """JSON with floats at 17 significant digits; non-finite floats become strings."""
    return _encode(obj, indent, 0) + "\n"


def _encode(obj, indent, level) -> str:
    pad = " " * (indent * (level + 1))
    end = " " * (indent * level)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{pad}{_encode(str(k), indent, level + 1)}: {_encode(v, indent, level + 1)}" for k, v in obj.items()]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    if isinstance(obj, (list, tuple, np.ndarray)):
        seq = list(obj)
        if not seq:
            return "[]"
        if all(not isinstance(v, (dict, list, tuple, np.ndarray)) for v in seq):
            return "[" + ", ".join(_encode(v, indent, level + 1) for v in seq) + "]"
        return "[\n" + ",\n".join(pad + _encode(v, indent, level + 1) for v in seq) + "\n" + end + "]"
    if isinstance(obj, (bool, np.bool_)):
        return "true" if obj else "false"
    if obj is None:
        return "null"
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        if not math.isfinite(v):
            return f'"{v}"'
        return fmt(v)
    if isinstance(obj, str):
        return json.dumps(obj)
    raise TypeError(f"cannot encode {type(obj).__name__}")


def write_json(path, obj) -> None:
    Path(path).write_text(dumps_json(obj))
