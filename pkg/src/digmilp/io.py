"""JSON persistence for instances and their labels.

Schema of one instance::

    {"name": ..., "mode": "Binary" | "GeneralInteger", "n_vars": n, "n_cons": m,
     "a": [[row, col, coeff], ...], "b": [...], "c": [...],
     "objective_sign": 1 | -1,                       (optional)
     "labels": {"x": [...], "y": [...], "s": [...], "r": [...], "y2": [...]}}   (optional)

Floats are written with ``repr`` precision so a store/load cycle is bit-exact.
A file holds either one instance object or ``{"instances": [...]}``; a
directory is read as its ``*.json`` files in sorted order.
"""
from __future__ import annotations

import json
import os
from pathlib import Path

import numpy as np
import scipy.sparse as sp

from .exceptions import ParseError, ValidationError
from .instance import FTuple, MilpInstance, Mode

_KEYS = {"name", "mode", "n_vars", "n_cons", "a", "b", "c", "objective_sign", "labels"}


def instance_to_dict(inst: MilpInstance, labels: FTuple | None = None) -> dict:
    coo = inst.a.tocoo()
    order = np.lexsort((coo.col, coo.row))
    d = {
        "name": inst.name,
        "mode": inst.mode.value,
        "n_vars": inst.n_vars,
        "n_cons": inst.n_cons,
        "a": [[int(coo.row[k]), int(coo.col[k]), float(coo.data[k])] for k in order],
        "b": [float(v) for v in inst.b],
        "c": [float(v) for v in inst.c],
    }
    if inst.objective_sign != 1:
        d["objective_sign"] = inst.objective_sign
    if labels is not None:
        d["labels"] = labels_to_dict(labels)
    return d


def labels_to_dict(t: FTuple) -> dict:
    d = {k: [float(v) for v in getattr(t, k)] for k in ("x", "y", "s", "r")}
    if t.y2 is not None:
        d["y2"] = [float(v) for v in t.y2]
    return d


def instance_from_dict(d: dict) -> tuple[MilpInstance, FTuple | None]:
    if not isinstance(d, dict):
        raise ValidationError("instance entry must be a JSON object")
    unknown = set(d) - _KEYS
    if unknown:
        raise ValidationError(f"unknown instance keys: {sorted(unknown)}")
    try:
        m, n = int(d["n_cons"]), int(d["n_vars"])
        trip = d["a"]
        if trip:
            arr = np.asarray(trip, dtype=np.float64)
            if arr.ndim != 2 or arr.shape[1] != 3:
                raise ValidationError("'a' must be a list of [row, col, coeff] triplets")
            rows, cols = arr[:, 0].astype(np.int64), arr[:, 1].astype(np.int64)
            if rows.min() < 0 or cols.min() < 0 or rows.max() >= m or cols.max() >= n:
                raise ValidationError("triplet index out of range")
            if np.any(arr[:, 2] == 0):
                raise ValidationError("explicit zero coefficient in 'a'")
            a = sp.csr_matrix((arr[:, 2], (rows, cols)), shape=(m, n))
            if a.nnz != len(trip):
                raise ValidationError("duplicate triplet in 'a'")
        else:
            a = sp.csr_matrix((m, n))
        inst = MilpInstance(a, d["b"], d["c"], d["mode"], d.get("name", "instance"), int(d.get("objective_sign", 1)))
    except KeyError as e:
        raise ValidationError(f"missing key {e.args[0]!r}") from None
    labels = None
    if "labels" in d:
        lab = d["labels"]
        labels = FTuple(inst.a, lab["x"], lab["y"], lab["s"], lab["r"], inst.mode, lab.get("y2"))
    return inst, labels


def _read_json(path: Path):
    text = path.read_text()
    try:
        return json.loads(text)
    except json.JSONDecodeError as e:
        raise ParseError(f"{path}: {e.msg} at line {e.lineno}, column {e.colno} (offset {e.pos})") from None


def load_labeled(path) -> tuple[list[MilpInstance], list[FTuple | None]]:
    path = Path(path)
    files = sorted(path.glob("*.json")) if path.is_dir() else [path]
    insts, labels = [], []
    for f in files:
        doc = _read_json(f)
        entries = doc["instances"] if isinstance(doc, dict) and "instances" in doc else [doc]
        for e in entries:
            inst, lab = instance_from_dict(e)
            insts.append(inst)
            labels.append(lab)
    return insts, labels


def load_instances(path) -> list[MilpInstance]:
    return load_labeled(path)[0]


def store_instances(instances, path, labels=None) -> list[Path]:
    """Write instances. A path ending in ``.json`` gets one bundle file;
    anything else is treated as a directory with one file per instance."""
    path = Path(path)
    labels = labels if labels is not None else [None] * len(instances)
    if path.suffix == ".json":
        path.parent.mkdir(parents=True, exist_ok=True)
        doc = {"instances": [instance_to_dict(i, t) for i, t in zip(instances, labels)]}
        _atomic_write(path, json.dumps(doc))
        return [path]
    path.mkdir(parents=True, exist_ok=True)
    out = []
    width = max(4, len(str(len(instances))))
    for k, (inst, lab) in enumerate(zip(instances, labels)):
        f = path / f"{k:0{width}d}.json"
        _atomic_write(f, json.dumps(instance_to_dict(inst, lab)))
        out.append(f)
    return out


def _atomic_write(path: Path, text: str):
    tmp = path.with_suffix(path.suffix + ".tmp")
    tmp.write_text(text)
    os.replace(tmp, path)


def modes_of(instances) -> set[Mode]:
    return {i.mode for i in instances}
