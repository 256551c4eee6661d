"""Serialization: CSV curves with 17-significant-digit floats, JSON run
manifests with content hashes, and the no-overwrite run-directory policy."""

from __future__ import annotations

import hashlib
import json
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__


def fmt(value) -> str:
    """Canonical float formatting: 17 significant digits, ints unchanged."""
    if isinstance(value, (bool, np.bool_)):
        return "1" if value else "0"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return "%.17g" % float(value)


def write_csv(path: Path, header, rows) -> Path:
    path = Path(path)
    with open(path, "w") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(fmt(v) for v in row) + "\n")
    return path


def sha256_file(path: Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 16), b""):
            h.update(block)
    return h.hexdigest()


def allocate_run_dir(out_dir: str | Path, name: str) -> Path:
    """Fresh run directory; existing ones are never overwritten (suffix policy)."""
    base = Path(out_dir)
    base.mkdir(parents=True, exist_ok=True)
    cand = base / name
    k = 1
    while cand.exists():
        k += 1
        cand = base / f"{name}-{k}"
    cand.mkdir()
    return cand


@dataclass
class RunManifest:
    """One per run directory: config echo, counts, derived constants, hashes."""

    subcommand: str
    config: dict
    config_hash: str
    seed: int
    code_version: str = __version__
    wall_time_s: float = 0.0
    trajectory_count: int = 0
    excluded_count: int = 0
    derived_constants: dict = field(default_factory=dict)
    results: dict = field(default_factory=dict)
    files: dict = field(default_factory=dict)

    def add_file(self, path: Path):
        self.files[Path(path).name] = sha256_file(path)

    def write(self, run_dir: Path) -> Path:
        path = Path(run_dir) / "manifest.json"
        if path.exists():
            raise FileExistsError(f"{path} already exists; one manifest per run")
        payload = {
            "subcommand": self.subcommand,
            "code_version": self.code_version,
            "config_hash": self.config_hash,
            "seed": self.seed,
            "wall_time_s": self.wall_time_s,
            "trajectory_count": self.trajectory_count,
            "excluded_count": self.excluded_count,
            "derived_constants": self.derived_constants,
            "results": self.results,
            "files": self.files,
            "config": self.config,
        }
        with open(path, "w") as fh:
            json.dump(payload, fh, indent=2, sort_keys=True, default=_jsonable)
            fh.write("\n")
        return path


def _jsonable(obj):
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"not JSON-serializable: {type(obj)}")


class Stopwatch:
    def __enter__(self):
        self.t0 = time.perf_counter()
        return self

    def __exit__(self, *exc):
        self.elapsed = time.perf_counter() - self.t0
        return False
