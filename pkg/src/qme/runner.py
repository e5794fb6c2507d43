"""Execute scenarios and presets and write CSV tables plus a run manifest."""
from __future__ import annotations

import csv
import json
import platform
import time
from importlib import metadata
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import __version__
from .bath import coefficients_nq
from .config import ConfigError, Scenario, build, config_hash, sweep_values, with_parameter
from .dynamics import evolve_me, steady_states
from .experiments import Table, run_preset
from .liouvillian import build_liouvillian_nondiagonal, charge_sector, number_difference_charges

DENSE_LIMIT = 64


def _support(sc: Scenario) -> Optional[np.ndarray]:
    """Conserved n1 - n2 sector for two oscillators under a bath living on |gg>, |ee>."""
    if len(sc.specs) != 2 or any(s.kind != "oscillator" for s in sc.specs):
        return None
    r = sc.bath.rho.data
    if max(np.max(np.abs(r[[1, 2], :])), np.max(np.abs(r[:, [1, 2]]))) > 0:
        return None
    d1, d2 = sc.specs[0].dim, sc.specs[1].dim
    return charge_sector(number_difference_charges(d1, d2))


def simulate(sc: Scenario) -> list[list]:
    """Rows of ``[time, observables...]`` for one scenario."""
    side = int(np.prod([s.dim for s in sc.specs]))
    coeffs = coefficients_nq(sc.bath, sc.coupling)
    if sc.method == "steady":
        if side > DENSE_LIMIT:
            raise ConfigError("steady-state solves are limited to dense problems")
        liou = build_liouvillian_nondiagonal(coeffs, sc.specs)
        state = steady_states(liou, sc.rho0).state
        return [[float("inf")] + [f(state) for f in sc.observables.values()]]
    sparse = side > DENSE_LIMIT
    support = _support(sc) if sparse else None
    liou = build_liouvillian_nondiagonal(coeffs, sc.specs, sparse=sparse, support=support)
    traj = evolve_me(liou, sc.rho0, sc.dt, sc.t_end, stride=sc.stride, observables=sc.observables)
    cols = [traj.observables[k] for k in sc.observables]
    return [[t] + [c[i] for c in cols] for i, t in enumerate(traj.times)]


def _run_point(cfg: dict) -> list[list]:
    return simulate(build(cfg))


def run_config(cfg: dict, jobs: int = 1, name: str = "scenario") -> Table:
    """Evaluate a validated config; sweep rows are ordered by parameter value."""
    obs = list(cfg["outputs"]["observables"])
    values = sweep_values(cfg)
    if values is None:
        return Table(name, ["time"] + obs, _run_point(cfg))
    param = cfg["sweep"]["parameter"]
    points = [with_parameter(cfg, param, v) for v in values]
    if jobs > 1 and len(points) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_run_point, points))
    else:
        results = [_run_point(p) for p in points]
    rows = [[v] + row for v, block in zip(values, results) for row in block]
    return Table(name, [param, "time"] + obs, rows)


def format_cell(x) -> str:
    if isinstance(x, str):
        return x
    if isinstance(x, (bool, np.bool_)):
        return str(int(x))
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return format(float(x), ".17g")


def write_table(table: Table, path: Path) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(table.columns)
        for row in table.rows:
            w.writerow([format_cell(x) for x in row])
    return path


def versions() -> dict[str, str]:
    out = {"qme": __version__, "python": platform.python_version()}
    for pkg in ("numpy", "scipy", "jsonschema"):
        out[pkg] = metadata.version(pkg)
    return out


def write_manifest(out_dir: Path, *, source: dict, outputs: Sequence[Path], runtime: float,
                   notes: Sequence[str] = (), stem: str = "manifest") -> Path:
    manifest = {
        "config_sha256": config_hash(source),
        "source": source,
        "outputs": [p.name for p in outputs],
        "versions": versions(),
        "runtime_seconds": round(runtime, 6),
        "notes": list(notes),
    }
    path = out_dir / f"{stem}.json"
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return path


def run_scenario(cfg: dict, out_dir: Path, jobs: int = 1, stem: str = "scenario") -> list[Path]:
    start = time.perf_counter()
    name = cfg.get("name", stem)
    table = run_config(cfg, jobs=jobs, name=name)
    csv_path = write_table(table, out_dir / cfg["outputs"].get("file", f"{name}.csv"))
    manifest = write_manifest(out_dir, source=cfg, outputs=[csv_path], runtime=time.perf_counter() - start,
                              stem=f"{Path(csv_path).stem}_manifest")
    return [csv_path, manifest]


def run_named_preset(name: str, out_dir: Path) -> list[Path]:
    start = time.perf_counter()
    tables = run_preset(name)
    paths = [write_table(t, out_dir / f"{t.name}.csv") for t in tables]
    notes = [n for t in tables for n in t.notes]
    manifest = write_manifest(out_dir, source={"preset": name}, outputs=paths,
                              runtime=time.perf_counter() - start, notes=notes, stem=f"{name}_manifest")
    return paths + [manifest]
