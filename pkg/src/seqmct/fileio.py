"""Plain-text matrix/vector files, the null-set mini-language, and JSON scenario files.

Matrix file::

    m
    p11 p12 ... p1m
    ...
    pm1 ... pmm

A first line with two integers ``r c`` declares a rectangular matrix (used
for feature and policy matrices).  Distribution / vector files hold one line
of whitespace-separated numbers.  Lines starting with ``#`` are ignored.
"""

from __future__ import annotations

import json
import os

import numpy as np

from .errors import ConfigError, DimensionMismatch
from .markov import validate_distribution, validate_kernel
from .nullsets import FiniteUnion, LinearClass, ParametricInterval, Singleton, StationaryPolytope


def _lines(path):
    try:
        with open(path, encoding="utf-8") as fh:
            return [ln.strip() for ln in fh if ln.strip() and not ln.lstrip().startswith("#")]
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from exc


def _floats(line, path):
    try:
        return [float(x) for x in line.replace(",", " ").split()]
    except ValueError as exc:
        raise ConfigError(f"{path}: non-numeric entry in line {line!r}") from exc


def read_matrix(path) -> np.ndarray:
    lines = _lines(path)
    if not lines:
        raise ConfigError(f"{path}: empty file")
    head = lines[0].split()
    try:
        dims = [int(x) for x in head]
    except ValueError as exc:
        raise ConfigError(f"{path}: first line must hold the dimension") from exc
    if len(dims) == 1:
        r = c = dims[0]
    elif len(dims) == 2:
        r, c = dims
    else:
        raise ConfigError(f"{path}: first line must be 'm' or 'rows cols'")
    rows = [_floats(ln, path) for ln in lines[1:]]
    if len(rows) != r or any(len(x) != c for x in rows):
        raise DimensionMismatch(f"{path}: expected {r} rows of {c} numbers")
    return np.array(rows, dtype=float)


def read_kernel(path):
    return validate_kernel(read_matrix(path), label=os.path.basename(str(path)))


def read_vector(path) -> np.ndarray:
    lines = _lines(path)
    vals = []
    for ln in lines:
        vals.extend(_floats(ln, path))
    if not vals:
        raise ConfigError(f"{path}: no numbers found")
    return np.array(vals, dtype=float)


def read_distribution(path, m=None) -> np.ndarray:
    return validate_distribution(read_vector(path), m)


def format_number(x) -> str:
    return format(float(x), ".12g")


def write_matrix(path, A):
    A = np.asarray(A, dtype=float)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        r, c = A.shape
        fh.write(f"{r}\n" if r == c else f"{r} {c}\n")
        for row in A:
            fh.write(" ".join(format_number(x) for x in row) + "\n")


def write_vector(path, v):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(" ".join(format_number(x) for x in np.asarray(v, dtype=float).ravel()) + "\n")


# --------------------------------------------------------------------------- null-set specs


def parse_null(spec: str, base_dir: str = "."):
    """Build a null set from ``kind:payload``.

    ``singleton:FILE``, ``stationary:FILE``, ``linear:PHI,PI,d``,
    ``tilt:P0,F,lo,hi`` and ``union:SPEC;SPEC``.
    """
    spec = spec.strip()
    if ":" not in spec:
        raise ConfigError(f"null spec {spec!r} needs the form kind:payload")
    kind, payload = spec.split(":", 1)

    def p(x):
        x = x.strip()
        return x if os.path.isabs(x) else os.path.join(base_dir, x)

    if kind == "union":
        return FiniteUnion([parse_null(s, base_dir) for s in payload.split(";") if s.strip()])
    parts = [x.strip() for x in payload.split(",")]
    if kind == "singleton" and len(parts) == 1:
        return Singleton(read_kernel(p(parts[0])))
    if kind == "stationary" and len(parts) == 1:
        return StationaryPolytope(read_distribution(p(parts[0])))
    if kind == "linear" and len(parts) == 3:
        try:
            d = int(parts[2])
        except ValueError as exc:
            raise ConfigError(f"linear rank must be an integer, got {parts[2]!r}") from exc
        return LinearClass(read_matrix(p(parts[0])), read_matrix(p(parts[1])), d)
    if kind == "tilt" and len(parts) == 4:
        try:
            lo, hi = float(parts[2]), float(parts[3])
        except ValueError as exc:
            raise ConfigError("tilt bounds must be numbers") from exc
        return ParametricInterval(read_kernel(p(parts[0])), read_vector(p(parts[1])), lo, hi)
    raise ConfigError(f"cannot parse null spec {spec!r}")


def load_json(path) -> dict:
    try:
        with open(path, encoding="utf-8") as fh:
            return json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})") from exc
