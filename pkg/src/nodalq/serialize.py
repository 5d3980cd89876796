"""Serialisation shared by the command line: JSON and CSV with 17-digit floats,
run-length encoded masks, PGM images and grid-field dumps."""

from __future__ import annotations

import csv
import io
import json
import math
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .lattice import DomainError


def format_float(x: float) -> str:
    """17 significant digits, enough to round-trip any double."""
    x = float(x)
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return format(x, ".17g")


def _json_text(obj, indent: int, level: int) -> str:
    pad = " " * (indent * (level + 1))
    end = " " * (indent * level)
    if obj is None or obj is True or obj is False:
        return json.dumps(obj)
    if isinstance(obj, (bool, np.bool_)):
        return "true" if obj else "false"
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        # JSON has no NaN or infinity
        return format_float(obj) if math.isfinite(obj) else "null"
    if isinstance(obj, str):
        return json.dumps(obj)
    if isinstance(obj, Mapping):
        if not obj:
            return "{}"
        items = [f"{pad}{json.dumps(str(k))}: {_json_text(v, indent, level + 1)}" for k, v in obj.items()]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    if isinstance(obj, (list, tuple, np.ndarray)):
        seq = list(obj)
        if not seq:
            return "[]"
        if all(not isinstance(v, (Mapping, list, tuple, np.ndarray)) for v in seq):
            return "[" + ", ".join(_json_text(v, indent, level + 1) for v in seq) + "]"
        items = [pad + _json_text(v, indent, level + 1) for v in seq]
        return "[\n" + ",\n".join(items) + "\n" + end + "]"
    raise TypeError(f"cannot serialise {type(obj).__name__}")


def dumps_json(obj, indent: int = 2) -> str:
    return _json_text(obj, indent, 0) + "\n"


def write_json(path, obj) -> None:
    Path(path).write_text(dumps_json(obj), encoding="utf-8")


def read_json(path) -> dict:
    try:
        return json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise DomainError(f"{path}: invalid JSON ({exc})") from exc


def _cell(v) -> str:
    if isinstance(v, (float, np.floating)):
        return format_float(v)
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    return str(v)


def csv_text(columns: Sequence[str], rows: Iterable[Mapping]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for r in rows:
        w.writerow([_cell(r[c]) for c in columns])
    return buf.getvalue()


def write_csv(path, columns: Sequence[str], rows: Iterable[Mapping]) -> None:
    Path(path).write_text(csv_text(columns, rows), encoding="utf-8")


# ---------------------------------------------------------------------------
# masks
# ---------------------------------------------------------------------------


def mask_to_rle(mask: np.ndarray, offset=(0, 0)) -> dict:
    """Row-major run lengths of a boolean mask, starting with a False run."""
    flat = np.asarray(mask, dtype=bool).ravel()
    change = np.flatnonzero(np.diff(flat.astype(np.int8))) + 1
    bounds = np.concatenate([[0], change, [flat.size]])
    runs = np.diff(bounds).tolist()
    if flat.size and flat[0]:
        runs = [0] + runs
    return {"shape": list(mask.shape), "offset": [int(offset[0]), int(offset[1])], "runs": runs}


def rle_to_mask(doc: Mapping) -> tuple[np.ndarray, tuple[int, int]]:
    try:
        shape = tuple(int(s) for s in doc["shape"])
        runs = [int(r) for r in doc["runs"]]
    except (KeyError, TypeError, ValueError) as exc:
        raise DomainError(f"malformed RLE mask: {exc}") from exc
    offset = tuple(int(v) for v in doc.get("offset", (0, 0)))
    if len(shape) != 2 or min(shape) < 1 or any(r < 0 for r in runs):
        raise DomainError("RLE mask needs a 2-D shape and non-negative runs")
    if sum(runs) != shape[0] * shape[1]:
        raise DomainError(f"RLE runs cover {sum(runs)} cells, shape needs {shape[0] * shape[1]}")
    values = np.arange(len(runs)) % 2 == 1
    flat = np.repeat(values, runs)
    return flat.reshape(shape), offset


def write_pgm(path, image: np.ndarray, maxval: int | None = None) -> None:
    """Plain (P2) graymap; image[i, j] with i along x becomes column i, row from the top = max y."""
    img = np.asarray(image, dtype=np.int64)
    if img.min(initial=0) < 0:
        raise DomainError("PGM values must be non-negative")
    if maxval is None:
        maxval = max(int(img.max(initial=0)), 1)
    rows = np.flipud(img.T)
    lines = [f"P2\n{rows.shape[1]} {rows.shape[0]}\n{maxval}"]
    lines.extend(" ".join(str(v) for v in r) for r in rows)
    Path(path).write_text("\n".join(lines) + "\n", encoding="ascii")


# ---------------------------------------------------------------------------
# grid fields
# ---------------------------------------------------------------------------


def write_field_csv(path, field) -> None:
    gx, gy = np.meshgrid(field.x, field.y, indexing="ij")
    rows = ({"x": x, "y": y, "value": v}
            for x, y, v in zip(gx.ravel(), gy.ravel(), np.asarray(field.values).ravel()))
    write_csv(path, ("x", "y", "value"), rows)


def write_field_binary(path, field) -> Path:
    """values as little-endian float64 in (i, j) row-major order plus a JSON sidecar."""
    path = Path(path)
    np.asarray(field.values, dtype="<f8").tofile(path)
    sidecar = path.with_name(path.name + ".json")
    write_json(sidecar, {
        "Nx": len(field.x) - 1, "Ny": len(field.y) - 1,
        "bounds": [float(field.x[0]), float(field.x[-1]), float(field.y[0]), float(field.y[-1])],
        "dtype": "<f8", "order": "x-major",
    })
    return sidecar


def read_field_binary(path):
    from .spectral import GridField

    path = Path(path)
    meta = read_json(path.with_name(path.name + ".json"))
    nx, ny = int(meta["Nx"]), int(meta["Ny"])
    x0, x1, y0, y1 = meta["bounds"]
    vals = np.fromfile(path, dtype="<f8").reshape(nx + 1, ny + 1)
    return GridField(np.linspace(x0, x1, nx + 1), np.linspace(y0, y1, ny + 1), vals)
