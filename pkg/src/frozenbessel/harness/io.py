"""Deterministic file output: CSV at 17 significant digits, versioned JSON and the manifest.

Nothing written here depends on wall-clock time, so rerunning an experiment
with the same configuration reproduces every file byte for byte.
"""
from __future__ import annotations

import csv
import hashlib
import json
import platform
from pathlib import Path

import numpy as np
import scipy

SCHEMA_VERSION = 1


def fmt(v) -> str:
    return f"{float(v):.17g}"


def write_table(path, header, rows) -> Path:
    """RFC-4180 CSV with a header row; floats are written at full precision."""
    path = Path(path)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\r\n")
        w.writerow(header)
        for row in rows:
            w.writerow([v if isinstance(v, (str, int, np.integer)) else fmt(v) for v in row])
    return path


def write_series(path, t, values, prefix) -> Path:
    values = np.asarray(values, dtype=float)
    header = ["t"] + [f"{prefix}_{i + 1}" for i in range(values.shape[1])]
    return write_table(path, header, (np.concatenate([[ti], row]) for ti, row in zip(t, values)))


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return v if np.isfinite(v) else repr(v)
    return obj


def write_json(path, payload: dict) -> Path:
    path = Path(path)
    body = {"schema_version": SCHEMA_VERSION, **_jsonable(payload)}
    path.write_text(json.dumps(body, indent=2, sort_keys=True) + "\n")
    return path


def sha256_file(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def versions() -> dict:
    from .. import __version__

    return {
        "frozenbessel": __version__,
        "python": platform.python_version(),
        "numpy": np.__version__,
        "scipy": scipy.__version__,
    }


def write_manifest(out_dir, config: dict, target: str, files, seed: int, scheme: dict | None) -> Path:
    """``manifest.json`` with the config echo, versions, seed, scheme and file digests."""
    out_dir = Path(out_dir)
    entries = {Path(f).name: sha256_file(f) for f in sorted(files, key=lambda p: Path(p).name)}
    return write_json(out_dir / "manifest.json", {
        "config": config,
        "target": target,
        "seed": seed,
        "scheme": scheme,
        "versions": versions(),
        "files": entries,
    })
