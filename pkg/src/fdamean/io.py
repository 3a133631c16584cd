"""Reading and writing curve datasets, result tables and experiment configs.

Dataset files are CSV::

    # d=1
    # p=144
    0.0034722222222222220,0.010416666666666666,...
    3.1,2.9,,2.7,...

Comment lines declare the dimension and per-axis counts (``# p=12,12`` for
``d = 2``).  The header row holds the design coordinates in flat order;
for ``d > 1`` each cell is ``x1:x2:...``.  Every further row is one curve;
an empty cell is a missing value.  An optional ``# domain=lo,hi`` line maps
coordinates from ``[lo, hi]`` (all axes) onto ``[0, 1]``.  If comment lines
are absent, a sidecar ``<file>.json`` with keys ``d``/``p`` is consulted,
else the design is one-dimensional.
"""

from __future__ import annotations

import csv
import json
import sys
from pathlib import Path

import numpy as np

from .errors import DatasetParseError, InvalidData
from .estimation import CurveDataset
from .grid import Grid

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

__all__ = [
    "read_dataset",
    "write_dataset",
    "subsample_columns",
    "write_table",
    "read_table",
    "read_config",
    "fmt",
]


def fmt(value) -> str:
    """17 significant digits, enough to round-trip a double."""
    if value is None:
        return ""
    if isinstance(value, (bool, np.bool_)):
        return str(bool(value)).lower()
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return "" if np.isnan(value) else format(float(value), ".17g")
    return str(value)


def _parse_meta(line: str, meta: dict, lineno: int):
    body = line.lstrip("#").strip()
    if "=" not in body:
        return
    key, _, val = body.partition("=")
    key = key.strip().lower()
    try:
        if key == "d":
            meta["d"] = int(val)
        elif key == "p":
            meta["p"] = [int(v) for v in val.split(",") if v.strip()]
        elif key == "domain":
            lo, hi = (float(v) for v in val.split(","))
            meta["domain"] = (lo, hi)
    except ValueError as exc:
        raise DatasetParseError(f"bad metadata {body!r}: {exc}", lineno) from None


def _sidecar(path: Path) -> dict:
    side = path.with_name(path.name + ".json")
    if not side.exists():
        side = path.with_suffix(".json")
    if side.exists() and side != path:
        with open(side) as fh:
            data = json.load(fh)
        return {k: data[k] for k in ("d", "p", "domain") if k in data}
    return {}


def _cell(text: str, lineno: int) -> float:
    text = text.strip()
    if text == "" or text.upper() in ("NA", "NAN"):
        return np.nan
    try:
        return float(text)
    except ValueError:
        raise DatasetParseError(f"not a number: {text!r}", lineno) from None


def read_dataset(path) -> CurveDataset:
    path = Path(path)
    meta: dict = {}
    header = None
    rows = []
    with open(path, newline="") as fh:
        for lineno, line in enumerate(fh, start=1):
            stripped = line.strip()
            if not stripped:
                continue
            if stripped.startswith("#"):
                _parse_meta(stripped, meta, lineno)
                continue
            cells = next(csv.reader([stripped]))
            if header is None:
                header = (cells, lineno)
                continue
            if len(cells) != len(header[0]):
                raise DatasetParseError(f"expected {len(header[0])} cells, found {len(cells)}", lineno)
            rows.append([_cell(c, lineno) for c in cells])
    if header is None:
        raise DatasetParseError("no header row", None)
    if not rows:
        raise DatasetParseError("no data rows", None)
    for key, val in _sidecar(path).items():
        meta.setdefault(key, val)
    cells, hline = header
    coords = []
    for c in cells:
        try:
            coords.append([float(v) for v in c.strip().split(":")])
        except ValueError:
            raise DatasetParseError(f"bad coordinate {c!r}", hline) from None
    width = {len(c) for c in coords}
    if len(width) != 1:
        raise DatasetParseError("coordinates have inconsistent dimension", hline)
    d = meta.get("d", width.pop())
    p = tuple(meta.get("p", [len(coords)] if d == 1 else []))
    if len(p) != d or int(np.prod(p)) != len(coords):
        raise DatasetParseError(f"declared p={list(p)} does not match {len(coords)} columns in d={d}", hline)
    pts = np.array(coords, dtype=float).reshape(len(coords), d)
    if "domain" in meta:
        lo, hi = meta["domain"]
        pts = (pts - lo) / (hi - lo)
    grid = _grid_from_points(pts, p)
    return CurveDataset(grid, np.array(rows, dtype=float))


def _grid_from_points(pts: np.ndarray, p: tuple) -> Grid:
    d = len(p)
    cube = pts.reshape(*p, d)
    axes = []
    for k in range(d):
        index = [0] * d
        index[k] = slice(None)
        axis = cube[tuple(index) + (k,)]
        axes.append(axis)
    for k, axis in enumerate(axes):
        if np.any(np.diff(axis) <= 0):
            raise InvalidData(f"axis {k} coordinates are not strictly increasing")
        if axis[0] < 0 or axis[-1] > 1:
            raise InvalidData(f"axis {k} coordinates leave [0, 1]; add a '# domain=lo,hi' line")
    grid = Grid(tuple(axes))
    if not np.allclose(grid.points(), pts, rtol=0, atol=1e-12):
        raise InvalidData("header coordinates do not form a Cartesian product in row-major order")
    return grid


def write_dataset(dataset: CurveDataset, path):
    grid = dataset.grid
    pts = grid.points()
    with open(path, "w", newline="") as fh:
        fh.write(f"# d={grid.d}\n")
        fh.write(f"# p={','.join(str(v) for v in grid.p)}\n")
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow([":".join(fmt(v) for v in pt) for pt in pts])
        for row in dataset.y:
            writer.writerow([fmt(v) for v in row])


def subsample_columns(dataset: CurveDataset, every: int | None = None, indices=None) -> CurveDataset:
    """Keep every ``every``-th coordinate per axis (first point kept), or explicit indices.

    ``indices`` is a list of axis indices for ``d = 1`` or one list per axis.
    """
    grid = dataset.grid
    if (every is None) == (indices is None):
        raise ValueError("give exactly one of 'every' or 'indices'")
    if every is not None:
        if every < 1:
            raise ValueError("'every' must be >= 1")
        keep = [np.arange(0, pk, every) for pk in grid.p]
    else:
        if len(indices) == 0:
            raise ValueError("selection is empty")
        flat = grid.d == 1 and np.ndim(indices[0]) == 0
        keep = [np.asarray(indices, dtype=int)] if flat else [np.asarray(i, dtype=int) for i in indices]
        if len(keep) != grid.d:
            raise ValueError("need one index list per axis")
        for k, idx in enumerate(keep):
            if idx.size and (idx.min() < 0 or idx.max() >= grid.p[k]):
                raise ValueError(f"index out of range on axis {k}")
            keep[k] = np.unique(idx)
    if any(k.size == 0 for k in keep):
        raise ValueError("selection is empty")
    new_grid = Grid(tuple(a[k] for a, k in zip(grid.axes, keep)))
    mesh = np.meshgrid(*keep, indexing="ij")
    cols = grid.ravel([m.ravel() for m in mesh])
    return CurveDataset(new_grid, dataset.y[:, cols])


def write_table(path, records, columns=None):
    """Write dict records as CSV with round-trip float formatting."""
    records = list(records)
    if columns is None:
        columns = list(records[0].keys()) if records else []
    handle = sys.stdout if path in (None, "-") else open(path, "w", newline="")
    try:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(columns)
        for rec in records:
            writer.writerow([fmt(rec.get(c)) for c in columns])
    finally:
        if handle is not sys.stdout:
            handle.close()


def read_table(path) -> list[dict]:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def read_config(path) -> dict:
    """Experiment config from TOML (``.toml``) or JSON (anything else)."""
    path = Path(path)
    if path.suffix.lower() == ".toml":
        with open(path, "rb") as fh:
            return tomllib.load(fh)
    with open(path) as fh:
        return json.load(fh)
