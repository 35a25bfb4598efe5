"""Plain-text persistence: matrix grids, dataset CSVs, model/report JSON, manifests.

Reals are written with ``repr`` so every float round-trips exactly.
"""
from __future__ import annotations

import csv
import hashlib
import json
import os
from pathlib import Path

import numpy as np

from .envmodel import LabeledDataset
from .solvers import LinearModel


class DataParseError(ValueError):
    """Malformed input file; ``line`` is 1-based, ``field`` names the culprit."""

    def __init__(self, path, line, field, message):
        self.path = str(path)
        self.line = line
        self.field = field
        super().__init__(f"{self.path}:{line}: {field}: {message}")


def _num(x) -> str:
    return repr(float(x))


# --------------------------------------------------------------------------- matrices

def write_matrix(path, M) -> None:
    """Row-major whitespace grid, header line ``d <rows> <cols>``."""
    M = np.atleast_2d(np.asarray(M, dtype=float))
    lines = [f"d {M.shape[0]} {M.shape[1]}"]
    lines += [" ".join(_num(v) for v in row) for row in M]
    Path(path).write_text("\n".join(lines) + "\n")


def read_matrix(path) -> np.ndarray:
    text = Path(path).read_text().splitlines()
    if not text:
        raise DataParseError(path, 1, "header", "empty file")
    head = text[0].split()
    if head and head[0] == "d":
        head = head[1:]
    if len(head) != 2:
        raise DataParseError(path, 1, "header", "expected 'd rows cols'")
    try:
        rows, cols = int(head[0]), int(head[1])
    except ValueError:
        raise DataParseError(path, 1, "header", "rows and cols must be integers") from None
    body = [ln for ln in text[1:] if ln.strip()]
    if len(body) != rows:
        raise DataParseError(path, len(text), "rows", f"expected {rows} rows, found {len(body)}")
    out = np.empty((rows, cols))
    for i, ln in enumerate(body):
        parts = ln.split()
        if len(parts) != cols:
            raise DataParseError(path, i + 2, f"row {i}", f"expected {cols} values, found {len(parts)}")
        try:
            out[i] = [float(p) for p in parts]
        except ValueError as exc:
            raise DataParseError(path, i + 2, f"row {i}", str(exc)) from None
    return out


# --------------------------------------------------------------------------- datasets

def save_datasets(path, datasets) -> None:
    """One CSV (``env_id,y,x_1..x_d``) plus a JSON sidecar ``<path>.json``."""
    datasets = list(datasets)
    if not datasets:
        raise ValueError("nothing to save")
    d = datasets[0].dim
    task = datasets[0].task
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["env_id", "y"] + [f"x_{j + 1}" for j in range(d)])
        for ds in datasets:
            if ds.dim != d or ds.task != task:
                raise ValueError("all datasets must share dimension and task")
            ys = ds.y.tolist() if task == "classify" else [_num(v) for v in ds.y]
            for yi, row in zip(ys, ds.X):
                w.writerow([ds.env_id, yi] + [_num(v) for v in row])
    meta = {"task": task, "dim": d, "n_classes": max(ds.n_classes for ds in datasets),
            "envs": [ds.env_id for ds in datasets]}
    Path(str(path) + ".json").write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")


def load_datasets(path) -> list[LabeledDataset]:
    side = Path(str(path) + ".json")
    try:
        meta = json.loads(side.read_text())
    except FileNotFoundError:
        raise DataParseError(side, 0, "sidecar", "missing metadata file") from None
    except json.JSONDecodeError as exc:
        raise DataParseError(side, exc.lineno, "sidecar", exc.msg) from None
    for key in ("task", "dim", "n_classes", "envs"):
        if key not in meta:
            raise DataParseError(side, 0, key, "missing key")
    d = int(meta["dim"])
    rows: dict[str, tuple[list, list]] = {str(e): ([], []) for e in meta["envs"]}
    with open(path, newline="") as fh:
        r = csv.reader(fh)
        header = next(r, None)
        expected = ["env_id", "y"] + [f"x_{j + 1}" for j in range(d)]
        if header != expected:
            raise DataParseError(path, 1, "header", f"expected {len(expected)} columns "
                                 f"env_id,y,x_1..x_{d}")
        for lineno, rec in enumerate(r, start=2):
            if len(rec) != d + 2:
                raise DataParseError(path, lineno, f"row {lineno - 1}",
                                     f"expected {d + 2} columns, found {len(rec)}")
            env = rec[0]
            if env not in rows:
                raise DataParseError(path, lineno, "env_id", f"unknown environment {env!r}")
            try:
                y = int(rec[1]) if meta["task"] == "classify" else float(rec[1])
            except ValueError:
                raise DataParseError(path, lineno, "y", f"bad value {rec[1]!r}") from None
            try:
                x = [float(v) for v in rec[2:]]
            except ValueError as exc:
                raise DataParseError(path, lineno, f"row {lineno - 1}", str(exc)) from None
            rows[env][0].append(x)
            rows[env][1].append(y)
    out = []
    for env, (X, y) in rows.items():
        if not X:
            raise DataParseError(path, 0, "env_id", f"environment {env!r} has no rows")
        out.append(LabeledDataset(np.array(X), np.array(y), env_id=env, task=meta["task"],
                                  n_classes=int(meta["n_classes"])))
    return out


# --------------------------------------------------------------------------- models

def model_to_dict(model: LinearModel) -> dict:
    return {
        "method_tag": model.method_tag,
        "task": model.task,
        "shape": list(model.beta.shape),
        "beta": model.beta.ravel().tolist(),
        "bias": model.bias.tolist(),
        "test_whitener": model.test_whitener.tolist(),
        "lambda": float(model.lam),
        "convergence": {"iters": int(model.convergence.get("iters", 0)),
                        "grad_norm": float(model.convergence.get("grad_norm", float("nan")))},
    }


def model_from_dict(obj: dict, source="<dict>") -> LinearModel:
    for key in ("method_tag", "task", "beta", "bias", "test_whitener", "lambda"):
        if key not in obj:
            raise DataParseError(source, 0, key, "missing key")
    bias = np.asarray(obj["bias"], dtype=float)
    k = bias.size
    beta = np.asarray(obj["beta"], dtype=float)
    if k == 0 or beta.size % k:
        raise DataParseError(source, 0, "beta", "length is not a multiple of the bias length")
    W = np.asarray(obj["test_whitener"], dtype=float)
    d = beta.size // k
    if W.shape != (d, d):
        raise DataParseError(source, 0, "test_whitener", f"expected {d}x{d}")
    return LinearModel(beta.reshape(d, k), bias, obj["task"], W, obj["method_tag"],
                       lam=float(obj["lambda"]), convergence=dict(obj.get("convergence", {})))


def save_model(path, model: LinearModel) -> None:
    Path(path).write_text(json.dumps(model_to_dict(model), indent=2) + "\n")


def load_model(path) -> LinearModel:
    try:
        obj = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise DataParseError(path, exc.lineno, "json", exc.msg) from None
    return model_from_dict(obj, path)


# --------------------------------------------------------------------------- reports

def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, np.ndarray):
        return _jsonable(x.tolist())
    if isinstance(x, (np.bool_, bool)):
        return bool(x)
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, (np.floating, float)):
        v = float(x)
        return v if np.isfinite(v) else str(v)
    return x


def write_json(path, obj) -> None:
    Path(path).write_text(json.dumps(_jsonable(obj), indent=2, sort_keys=True) + "\n")


def read_json(path):
    try:
        return json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise DataParseError(path, exc.lineno, "json", exc.msg) from None


def write_long_csv(path, rows) -> None:
    """Rows of ``(grid_point, trial, metric, value)``."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["grid_point", "trial", "metric", "value"])
        for g, t, m, v in rows:
            w.writerow([g, t, m, _num(v)])


def read_long_csv(path) -> list[tuple]:
    out = []
    with open(path, newline="") as fh:
        r = csv.reader(fh)
        header = next(r, None)
        if header != ["grid_point", "trial", "metric", "value"]:
            raise DataParseError(path, 1, "header", "expected grid_point,trial,metric,value")
        for lineno, rec in enumerate(r, start=2):
            if len(rec) != 4:
                raise DataParseError(path, lineno, f"row {lineno - 1}",
                                     f"expected 4 columns, found {len(rec)}")
            try:
                out.append((rec[0], int(rec[1]), rec[2], float(rec[3])))
            except ValueError as exc:
                raise DataParseError(path, lineno, f"row {lineno - 1}", str(exc)) from None
    return out


# --------------------------------------------------------------------------- manifest

def config_hash(config: dict) -> str:
    blob = json.dumps(_jsonable(config), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()


def sha256_file(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


MANIFEST = "manifest.json"
TIMING = "timing.json"


def list_outputs(out_dir) -> list[str]:
    out_dir = Path(out_dir)
    files = []
    for root, _, names in os.walk(out_dir):
        for name in names:
            rel = (Path(root) / name).relative_to(out_dir).as_posix()
            if rel != MANIFEST:
                files.append(rel)
    return sorted(files)


def write_manifest(out_dir, config: dict, versions: dict, results: dict) -> dict:
    """Write ``manifest.json`` listing every other file under ``out_dir``.

    Wall-clock data lives in ``timing.json``; it is listed without a digest
    so the manifest itself stays byte-identical across repeated runs.
    """
    out_dir = Path(out_dir)
    inventory = []
    for rel in list_outputs(out_dir):
        digest = None if rel.endswith(TIMING) else sha256_file(out_dir / rel)
        inventory.append({"path": rel, "sha256": digest})
    manifest = {
        "config_hash": config_hash(config),
        "versions": versions,
        "results": {k: results[k] for k in sorted(results)},
        "files": inventory,
    }
    write_json(out_dir / MANIFEST, manifest)
    return manifest
