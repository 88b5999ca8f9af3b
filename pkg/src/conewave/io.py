"""File formats: boundary/field/forcing CSV, binary fields, JSON reports, manifests."""
from __future__ import annotations

import csv
import hashlib
import json
import struct
from pathlib import Path

import numpy as np

from . import geometry as geo
from .errors import ValidationError
from .sampling import BoundaryPair
from .solver import DiscreteField

MAGIC = b"CWAV1"
IMPORT_NORM_TOL = 1e-6
MANIFEST_VERSION = 1


def _coord_header(d: int) -> list[str]:
    return [f"x{i}" for i in range(d + 1)]


def _check_norms(points: np.ndarray, what: str) -> None:
    dev = np.abs(geo.norm(points) - 1.0)
    if dev.size and dev.max() > IMPORT_NORM_TOL:
        raise ValidationError(f"{what}: point norms deviate from 1 by up to {dev.max():.3e}")


def write_boundary_csv(path, boundary: BoundaryPair) -> None:
    """Rows ``side,index,x0..xd``: minus side descending, then plus side ascending."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["side", "index"] + _coord_header(boundary.d))
        for n in range(boundary.N, -1, -1):
            w.writerow(["minus", n] + [repr(float(c)) for c in boundary.y_minus[n]])
        for m in range(boundary.M + 1):
            w.writerow(["plus", m] + [repr(float(c)) for c in boundary.y_plus[m]])


def read_boundary_csv(path) -> BoundaryPair:
    plus: dict[int, list[float]] = {}
    minus: dict[int, list[float]] = {}
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if not header or header[:2] != ["side", "index"] or len(header) < 4:
            raise ValidationError(f"{path}: bad boundary header {header}")
        for row in reader:
            if not row:
                continue
            side, idx, coords = row[0], int(row[1]), [float(c) for c in row[2:]]
            if len(coords) != len(header) - 2:
                raise ValidationError(f"{path}: row has wrong number of coordinates")
            target = {"plus": plus, "minus": minus}.get(side)
            if target is None:
                raise ValidationError(f"{path}: unknown side {side!r}")
            target[idx] = coords
    for name, seq in (("plus", plus), ("minus", minus)):
        if sorted(seq) != list(range(len(seq))) or not seq:
            raise ValidationError(f"{path}: {name} indices must be 0..K without gaps")
    yp = np.array([plus[i] for i in range(len(plus))])
    ym = np.array([minus[i] for i in range(len(minus))])
    _check_norms(yp, str(path))
    _check_norms(ym, str(path))
    if np.max(np.abs(yp[0] - ym[0])) > 1e-12:
        raise ValidationError(f"{path}: plus and minus sides disagree at index 0")
    ym[0] = yp[0]
    return BoundaryPair(y_plus=yp, y_minus=ym)


def write_field_csv(path, field: DiscreteField) -> None:
    """Rows ``m,n,x0..xd`` in row-major (m outer) order."""
    V = field.values
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["m", "n"] + _coord_header(field.d))
        for m in range(V.shape[0]):
            for n in range(V.shape[1]):
                w.writerow([m, n] + [repr(float(c)) for c in V[m, n]])


def _grid_from_rows(rows: list[list[str]], ncoord: int, what: str) -> np.ndarray:
    idx = np.array([[int(r[0]), int(r[1])] for r in rows])
    vals = np.array([[float(c) for c in r[2:]] for r in rows])
    if vals.shape[1] != ncoord:
        raise ValidationError(f"{what}: wrong number of coordinates")
    shape = (idx[:, 0].max() + 1, idx[:, 1].max() + 1)
    if shape[0] * shape[1] != len(rows):
        raise ValidationError(f"{what}: grid is incomplete")
    out = np.full(shape + (ncoord,), np.nan)
    out[idx[:, 0], idx[:, 1]] = vals
    if np.isnan(out).any():
        raise ValidationError(f"{what}: duplicate or missing cells")
    return out


def read_field_csv(path, validate: bool = True) -> DiscreteField:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if not header or header[:2] != ["m", "n"]:
            raise ValidationError(f"{path}: bad field header {header}")
        rows = [r for r in reader if r]
    V = _grid_from_rows(rows, len(header) - 2, str(path))
    if validate:
        _check_norms(V, str(path))
    return DiscreteField(values=V)


def write_forcing_csv(path, forcing: np.ndarray) -> None:
    forcing = np.asarray(forcing)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["m", "n"] + _coord_header(forcing.shape[-1] - 1))
        for m in range(forcing.shape[0]):
            for n in range(forcing.shape[1]):
                w.writerow([m, n] + [repr(float(c)) for c in forcing[m, n]])


def read_forcing_csv(path) -> np.ndarray:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if not header or header[:2] != ["m", "n"]:
            raise ValidationError(f"{path}: bad forcing header {header}")
        rows = [r for r in reader if r]
    F = _grid_from_rows(rows, len(header) - 2, str(path))
    if not np.all(np.isfinite(F)):
        raise ValidationError(f"{path}: non-finite forcing")
    return F


def write_field_binary(path, field: DiscreteField) -> None:
    """``CWAV1``, little-endian u32 (d, M, N), then float64 values row-major."""
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<III", field.d, field.M, field.N))
        fh.write(np.ascontiguousarray(field.values, dtype="<f8").tobytes())


def read_field_binary(path, validate: bool = True) -> DiscreteField:
    data = Path(path).read_bytes()
    if data[:5] != MAGIC:
        raise ValidationError(f"{path}: not a CWAV1 file")
    d, M, N = struct.unpack("<III", data[5:17])
    count = (M + 1) * (N + 1) * (d + 1)
    body = data[17:]
    if len(body) != 8 * count:
        raise ValidationError(f"{path}: expected {count} values, found {len(body) // 8}")
    V = np.frombuffer(body, dtype="<f8").reshape(M + 1, N + 1, d + 1).astype(np.float64)
    if validate:
        _check_norms(V, str(path))
    return DiscreteField(values=V)


def read_field(path, validate: bool = True) -> DiscreteField:
    with open(path, "rb") as fh:
        head = fh.read(5)
    return read_field_binary(path, validate) if head == MAGIC else read_field_csv(path, validate)


def canonical_json(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True, allow_nan=True) + "\n"


def write_json(path, obj) -> None:
    Path(path).write_text(canonical_json(obj))


def write_table_csv(path, header: list[str], rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([repr(float(x)) if isinstance(x, float) else x for x in row])


def sha256_file(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 20), b""):
            h.update(block)
    return h.hexdigest()


def write_manifest(out_dir, command: str, params: dict, outputs: list[str], duration: float,
                   tool_version: str) -> Path:
    """Write ``manifest.json`` listing every output with its SHA-256 digest."""
    out_dir = Path(out_dir)
    manifest = {
        "manifest_version": MANIFEST_VERSION,
        "command": command,
        "params": params,
        "tool_version": tool_version,
        "duration_seconds": duration,
        "outputs": [{"path": name, "sha256": sha256_file(out_dir / name)} for name in sorted(outputs)],
    }
    path = out_dir / "manifest.json"
    write_json(path, manifest)
    return path
