"""Deterministic file emission: CSV with 17-significant-digit floats, flat
little-endian f64 field dumps with JSON sidecars, content hashing."""

from __future__ import annotations

import hashlib
import json
import os

import numpy as np

from .grids import FrontCurve, ScalarField


def fmt(x) -> str:
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return format(float(x), ".17g")


def write_csv(path, header, rows):
    with open(path, "w", newline="\n") as f:
        f.write(",".join(header) + "\n")
        for row in rows:
            f.write(",".join(fmt(v) if not isinstance(v, str) else v for v in row) + "\n")


def write_field_f64(path, field: ScalarField, extra=None):
    """Row-major little-endian float64 dump plus a JSON sidecar."""
    data = np.ascontiguousarray(field.data, dtype="<f8")
    data.tofile(path)
    side = {"shape": list(field.data.shape), "box": field.box, "dtype": "<f8",
            "order": "C"}
    side.update(extra or {})
    write_json(path + ".json", side)


def read_field_f64(path) -> ScalarField:
    with open(path + ".json") as f:
        side = json.load(f)
    data = np.fromfile(path, dtype="<f8").reshape(side["shape"])
    return ScalarField(data, side["box"])


def write_json(path, obj):
    with open(path, "w") as f:
        json.dump(obj, f, indent=1, sort_keys=True)
        f.write("\n")


def write_front_csv(path, front: FrontCurve):
    rows = []
    for cid, (curve, closed) in enumerate(zip(front.curves, front.closed)):
        for x, y in curve:
            rows.append((cid, x, y, int(closed)))
    write_csv(path, ["curve_id", "x", "y", "closed"], rows)


def read_front_csv(path) -> FrontCurve:
    raw = np.genfromtxt(path, delimiter=",", names=True)
    raw = np.atleast_1d(raw)
    curves, closed = [], []
    for cid in np.unique(raw["curve_id"]):
        sel = raw["curve_id"] == cid
        curves.append(np.stack([raw["x"][sel], raw["y"][sel]], axis=1))
        closed.append(bool(raw["closed"][sel][0]))
    return FrontCurve(curves=curves, closed=closed)


def sha256_file(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def inventory(directory, skip=("manifest.json",)):
    files = []
    for name in sorted(os.listdir(directory)):
        full = os.path.join(directory, name)
        if not os.path.isfile(full) or name in skip:
            continue
        files.append({"name": name, "sha256": sha256_file(full),
                      "bytes": os.path.getsize(full)})
    return files
