"""On-disk artifacts: atomic writes, canonical JSON and CSV, (de)serializers.

Every JSON artifact carries ``schema_version`` and is written with sorted keys
so that reading and re-writing reproduces the same bytes. Floats are written
with ``repr`` and therefore round-trip exactly.
"""
from __future__ import annotations

import csv
import io
import json
import math
import os
import tempfile
from pathlib import Path

import numpy as np

from .cluster import Clustering
from .errors import InputError, StageError
from .metric import DistanceMatrix
from .mogp import HyperParams, MOGPModel, TaskMatrix
from .persistence import PersistenceDiagram

SCHEMA_VERSION = 1


def atomic_write(path, text: str) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return path


def _plain(obj):
    """numpy containers and scalars to JSON-native values; non-finite floats to None."""
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        if obj.dtype.kind in "iub" or (obj.dtype.kind == "f" and np.isfinite(obj).all()):
            return obj.tolist()
        return _plain(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer, int)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        return float(obj) if math.isfinite(obj) else None
    return obj


def dumps(obj) -> str:
    """Canonical JSON: one top-level key per line, values compact.

    Indenting nested values would force the slow pure-Python encoder.
    """
    obj = _plain(obj)
    if not isinstance(obj, dict) or not obj:
        return json.dumps(obj, sort_keys=True, allow_nan=False) + "\n"
    lines = [f"  {json.dumps(k)}: {json.dumps(obj[k], sort_keys=True, allow_nan=False)}"
             for k in sorted(obj)]
    return "{\n" + ",\n".join(lines) + "\n}\n"


def write_json(path, obj: dict) -> Path:
    return atomic_write(path, dumps({**obj, "schema_version": SCHEMA_VERSION}))


def read_json(path, producer: str | None = None) -> dict:
    path = Path(path)
    if not path.exists():
        hint = f" (run `{producer}` first)" if producer else ""
        raise StageError(f"missing artifact {path}{hint}")
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise InputError(f"{path}: invalid JSON ({exc})") from None
    if data.get("schema_version") != SCHEMA_VERSION:
        raise InputError(f"{path}: unsupported schema_version {data.get('schema_version')!r}")
    return data


def table_text(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in row])
    return buf.getvalue()


def write_table(path, header, rows) -> Path:
    return atomic_write(path, table_text(header, rows))


def read_table(path, producer: str | None = None):
    """``(header, rows)`` with cells left as strings."""
    path = Path(path)
    if not path.exists():
        hint = f" (run `{producer}` first)" if producer else ""
        raise StageError(f"missing artifact {path}{hint}")
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise InputError(f"{path}: empty table")
    return rows[0], rows[1:]


# persistence diagrams

def diagram_to_dict(diag: PersistenceDiagram, component: int) -> dict:
    pairs = [{"birth": b, "death": d, "dim": int(k)} for b, d, k in diag.pairs]
    return {"component": component, "field_char": diag.field_char, "max_scale": diag.max_scale,
            "diameter": diag.diameter, "pairs": pairs}


def diagram_from_dict(data: dict) -> PersistenceDiagram:
    rows = [(p["birth"], np.inf if p["death"] is None else p["death"], p["dim"])
            for p in data["pairs"]]
    pairs = np.array(rows, dtype=float).reshape(-1, 3)
    return PersistenceDiagram(pairs, data["field_char"], [], data["max_scale"], data["diameter"])


# distance matrix

def write_distance_matrix(path, D: DistanceMatrix) -> Path:
    rows = [[name, *map(float, D.entries[i])] for i, name in enumerate(D.names)]
    return write_table(path, ["", *D.names], rows)


def read_distance_matrix(path, producer: str | None = None) -> DistanceMatrix:
    header, rows = read_table(path, producer)
    names = tuple(header[1:])
    try:
        E = np.array([[float(x) for x in r[1:]] for r in rows])
    except ValueError:
        raise InputError(f"{path}: non-numeric distance entry") from None
    if [r[0] for r in rows] != list(names):
        raise InputError(f"{path}: row labels do not match header")
    return DistanceMatrix(E.reshape(len(rows), -1), names)


# clustering

def clustering_to_dict(clustering: Clustering, names) -> dict:
    return {"r": clustering.r,
            "assignments": {n: int(a) for n, a in zip(names, clustering.assignments)}}


def clustering_from_dict(data: dict, names) -> Clustering:
    assign = data["assignments"]
    missing = [n for n in names if n not in assign]
    if missing:
        raise InputError(f"clustering lacks curves {missing}")
    return Clustering(np.array([assign[n] for n in names]))


# GP model

def model_to_dict(model: MOGPModel) -> dict:
    h = model.hyper
    return {
        "hyperparameters": {"variance": h.variance, "length_scale": h.length_scale,
                            "noise_variance": h.noise_variance},
        "lambda1": model.task.lambda1,
        "lambda2": model.task.lambda2,
        "B": model.task.B,
        "clustering": model.task.clustering.assignments,
        "task_names": list(model.task_names),
        "times": model.times,
        "values": model.values,
        "mask": model.mask.astype(int),
        "mean_slopes": model.slopes,
        "mean_intercepts": model.intercepts,
        "log_likelihood": model.log_likelihood,
        "jitter": model.jitter,
        "grid_size": model.grid_size,
        "grid_log_likelihood": model.diagnostics.get("grid_log_likelihood", []),
    }


def model_from_dict(data: dict) -> MOGPModel:
    h = data["hyperparameters"]
    clustering = Clustering(np.array(data["clustering"]))
    task = TaskMatrix(np.array(data["B"], dtype=float), data["lambda1"], data["lambda2"], clustering)
    grid_ll = [np.nan if v is None else v for v in data.get("grid_log_likelihood", [])]
    return MOGPModel(task, HyperParams(h["variance"], h["length_scale"], h["noise_variance"]),
                     np.array(data["times"], dtype=float), np.array(data["values"], dtype=float),
                     np.array(data["mask"], dtype=bool), np.array(data["mean_slopes"], dtype=float),
                     np.array(data["mean_intercepts"], dtype=float), data["log_likelihood"],
                     data["jitter"], tuple(data["task_names"]), data["grid_size"],
                     {"grid_log_likelihood": grid_ll})


def read_hyper_grid(path) -> list:
    """CSV with columns variance, length_scale, noise_variance (header required)."""
    path = Path(path)
    if not path.exists():
        raise InputError(f"grid file {path} not found")
    header, rows = read_table(path)
    want = ["variance", "length_scale", "noise_variance"]
    if [h.strip() for h in header] != want:
        raise InputError(f"{path}: header must be {','.join(want)}")
    try:
        return [HyperParams(*(float(x) for x in r)) for r in rows if r]
    except (TypeError, ValueError) as exc:
        raise InputError(f"{path}: bad grid row ({exc})") from None
