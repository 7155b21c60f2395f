"""Deterministic CSV writers and the per-run manifest."""

from __future__ import annotations

import csv
import hashlib
import io
import json
import os
import platform
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .graph import N_EDGES

SPECTRUM_HEADER = ("lambda", "c1", "c2", "c3", "family", "eigen_index", "eigenvalue",
                   "morse_index", "kernel_dim", "mu_plus")
SNAPSHOT_HEADER = ("time", "edge", "x", "u", "v")
ENERGY_HEADER = ("time", "energy", "vertex_term", "boundary_flux_estimate")
RATE_HEADER = ("lambda", "nu0", "mu_spectral", "sigma_measured", "rel_err", "r_squared")
GROWTH_HEADER = ("time", "perturbation_norm")


def fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return str(int(x))
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return f"{float(x):.17g}"
    return str(x)


def csv_text(header: Sequence[str], rows: Iterable[Sequence]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([fmt(x) for x in r])
    return buf.getvalue()


def write_text(path: Path, text: str) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as f:
        f.write(text)
    return path


def write_csv(path: Path, header: Sequence[str], rows: Iterable[Sequence]) -> Path:
    return write_text(path, csv_text(header, rows))


def spectrum_rows(lam, speeds, family, report, mu_plus):
    for i, nu in enumerate(report.eigenvalues):
        yield (float(lam), *map(float, speeds), family, i, float(nu),
               report.morse_index, report.kernel_dim, float(mu_plus))


def snapshot_rows(trajectory, stride: int = 1):
    x = trajectory.grid.nodes
    idx = np.arange(0, x.size, stride)
    if idx[-1] != x.size - 1:
        idx = np.append(idx, x.size - 1)
    for s in trajectory.snapshots:
        for j in range(N_EDGES):
            u, v = s.u.values[j], s.v.values[j]
            for i in idx:
                yield (s.time, j + 1, x[i], u[i], v[i])


def energy_rows(rep):
    return zip(rep.times, rep.energy, rep.vertex_term, rep.boundary_flux_estimate)


def sha256(path: Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def write_manifest(out: Path, version: str, config: dict, wall_seconds: float, files: Sequence[Path],
                   extra: dict | None = None) -> Path:
    out = Path(out)
    entries = {}
    for p in sorted(Path(f) for f in files):
        entries[os.path.relpath(p, out)] = {"sha256": sha256(p), "bytes": p.stat().st_size}
    manifest = {
        "tool": "tricrystal",
        "version": version,
        "python": platform.python_version(),
        "config": config,
        "wall_clock_seconds": round(wall_seconds, 6),
        "files": entries,
    }
    if extra:
        manifest.update(extra)
    return write_text(out / "manifest.json", json.dumps(manifest, indent=2, sort_keys=False) + "\n")
