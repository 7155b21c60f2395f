"""Command-line front end.

    tricrystal {profile,spectrum,evolve,instability,sweep} [--config PATH] [--out DIR]
               [--plot] [--jobs N] [key=value ...]

Trailing key=value pairs are merged over the config file.  Exit codes:
0 ok, 1 configuration error, 2 numerical failure, 3 I/O failure.
"""

from __future__ import annotations

import argparse
import dataclasses
import logging
import math
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__, records, svg
from .config import COMMANDS, ConfigError, RunConfig, from_pairs, parse_pairs
from .dynamics import (BlowUpError, ConfigurationError, EvolveConfig, State, evolve, instability_run)
from .graph import EdgeGrid, GraphField, field_to_csv
from .profiles import OutOfRangeError, make_family
from .spectral import (InconclusiveSpectrumError, OperatorSpec, analytic_kernel_vectors, growing_mode_rate,
                       morse_and_kernel, spectrum)

log = logging.getLogger("tricrystal")

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_IO = 0, 1, 2, 3
EDGE_LABELS = ("edge 1", "edge 2", "edge 3")


def _grid(cfg: RunConfig) -> EdgeGrid:
    return EdgeGrid(cfg.L, cfg.n)


def _edge_series(f: GraphField):
    x = f.grid.nodes
    return [(EDGE_LABELS[j], x, f.values[j]) for j in range(3)]


# -- pipelines; each returns the list of files written -------------------------


def run_profile(cfg: RunConfig, out: Path) -> list[Path]:
    fam = make_family(cfg.family, cfg.spec)
    grid = _grid(cfg)
    phi, dphi = fam.sample(grid, 0), fam.sample(grid, 1)
    files = [records.write_text(out / "profile.csv", field_to_csv(phi)),
             records.write_text(out / "fluxon.csv", field_to_csv(dphi))]
    if cfg.plot:
        tag = f"{cfg.family}, lambda={cfg.lam:g}, {fam.shape.value}"
        files.append(records.write_text(out / "profile.svg", svg.line_plot(
            _edge_series(phi), f"phase profile ({tag})", "x", "phi_j(x)")))
        files.append(records.write_text(out / "fluxon.svg", svg.line_plot(
            _edge_series(dphi), f"fluxon ({tag})", "x", "phi_j'(x)")))
    return files


def _opspec(cfg: RunConfig, grid: EdgeGrid, restricted: bool) -> OperatorSpec:
    if cfg.family == "free":
        return OperatorSpec.free(cfg.spec, grid, restricted)
    return OperatorSpec.linearized(make_family(cfg.family, cfg.spec), grid, restricted)


def spectrum_table(cfg: RunConfig, restricted: bool) -> list[tuple]:
    rep = spectrum(_opspec(cfg, _grid(cfg), restricted), k=cfg.k, kernel_tol=cfg.kernel_tol)
    morse_and_kernel(rep)
    mu = growing_mode_rate(rep).mu_plus
    return list(records.spectrum_rows(cfg.lam, cfg.speeds, cfg.family, rep, mu))


def _spectrum_plot(rows, title) -> str:
    idx = [r[5] for r in rows]
    nu = [r[6] for r in rows]
    return svg.line_plot([("eigenvalue", idx, nu)], title, "index", "eigenvalue", markers=True)


def run_spectrum(cfg: RunConfig, out: Path) -> list[Path]:
    rows = spectrum_table(cfg, cfg.restricted)
    files = [records.write_csv(out / "spectrum.csv", records.SPECTRUM_HEADER, rows)]
    extra = None
    if not cfg.restricted and len(set(cfg.speeds)) == 1:
        extra = spectrum_table(cfg, True)
        files.append(records.write_csv(out / "spectrum_restricted.csv", records.SPECTRUM_HEADER, extra))
    if cfg.plot:
        files.append(records.write_text(out / "spectrum.svg", _spectrum_plot(
            rows, f"lowest eigenvalues ({cfg.family}, lambda={cfg.lam:g})")))
    return files


def _initial_state(cfg: RunConfig, fam, grid: EdgeGrid):
    """Initial state and the predicted rate mu (0 when not seeding an unstable mode)."""
    if cfg.seed == "none":
        return State.from_background(fam, grid), 0.0
    if cfg.seed == "pulse":
        x = grid.nodes
        bump = cfg.pulse_amplitude * np.exp(-(((x - cfg.pulse_center) / cfg.pulse_width) ** 2))
        return State.from_background(fam, grid, du=GraphField(grid, np.tile(bump, (3, 1)))), 0.0
    if cfg.seed == "kernel":
        psi = analytic_kernel_vectors(fam, grid)[0]
        return State.from_background(fam, grid, du=(cfg.eps / psi.norm()) * psi), 0.0
    rep = spectrum(OperatorSpec.linearized(fam, grid), k=cfg.k, kernel_tol=cfg.kernel_tol)
    mu = growing_mode_rate(rep).mu_plus
    psi = rep.eigenvectors[0]
    psi = psi * (1.0 / psi.norm())
    # moving along the growing mode: v = mu * u; mu = 0 leaves the seed at rest
    return State.from_background(fam, grid, du=cfg.eps * psi, v=(cfg.eps * mu) * psi), mu


def run_evolve(cfg: RunConfig, out: Path) -> list[Path]:
    fam = make_family(cfg.family, cfg.spec)
    grid = _grid(cfg)
    s0, _ = _initial_state(cfg, fam, grid)
    t_end = cfg.t_end if cfg.t_end is not None else 20.0
    ecfg = EvolveConfig(t_end=t_end, dt=cfg.dt, background=fam, vertex=cfg.vertex, backend=cfg.backend,
                        record_every=1)
    nsteps = max(1, round(t_end / ecfg.time_step(grid, cfg.spec)))
    ecfg = dataclasses.replace(ecfg, record_every=cfg.record_every or max(1, nsteps // 50))
    traj, rep = evolve(s0, ecfg, cfg.spec)
    files = [
        records.write_csv(out / "snapshots.csv", records.SNAPSHOT_HEADER,
                          records.snapshot_rows(traj, cfg.snapshot_stride)),
        records.write_csv(out / "energy.csv", records.ENERGY_HEADER, records.energy_rows(rep)),
    ]
    if cfg.plot:
        files.append(records.write_text(out / "final_state.svg", svg.line_plot(
            _edge_series(traj.snapshots[-1].u), f"u at t={traj.times[-1]:g}", "x", "u_j(x)")))
        e = np.asarray(rep.energy)
        files.append(records.write_text(out / "energy.svg", svg.line_plot(
            [("H(t) - H(0)", rep.times, e - e[0])], "energy deviation", "t", "H - H(0)")))
    return files


def instability_summary(cfg: RunConfig):
    fam = make_family(cfg.family, cfg.spec)
    grid = _grid(cfg)
    res = instability_run(fam, grid, eps=cfg.eps, t_end=cfg.t_end, dt=cfg.dt, k=cfg.k,
                          record_every=cfg.record_every or 10, vertex=cfg.vertex, backend=cfg.backend)
    row = (cfg.lam, res.nu0, res.mu, res.fit.sigma, res.rel_err, res.fit.r_squared)
    return row, res


def run_instability(cfg: RunConfig, out: Path) -> list[Path]:
    row, res = instability_summary(cfg)
    t = res.trajectory.times
    norms = res.trajectory.perturbation_norms
    files = [
        records.write_csv(out / "rate.csv", records.RATE_HEADER, [row]),
        records.write_csv(out / "growth.csv", records.GROWTH_HEADER, zip(t, norms)),
        records.write_csv(out / "energy.csv", records.ENERGY_HEADER, records.energy_rows(res.energy)),
    ]
    if cfg.plot:
        series = [("log ||u - Phi||", t, np.log(norms))]
        if res.fit.fit_window is not None:
            t0, t1 = res.fit.fit_window
            i0 = int(np.searchsorted(t, t0))
            series.append((f"slope {res.fit.sigma:.4g}", [t0, t1],
                           [math.log(norms[i0]), math.log(norms[i0]) + res.fit.sigma * (t1 - t0)]))
        files.append(records.write_text(out / "growth.svg", svg.line_plot(
            series, f"perturbation growth ({cfg.family}, lambda={cfg.lam:g}, mu={res.mu:.4g})", "t", "log norm")))
    return files


def _sweep_worker(args):
    cfg, index, out = args
    cfg = dataclasses.replace(cfg, lam=cfg.lambdas[index], command=cfg.task)
    if cfg.task == "spectrum":
        rows = spectrum_table(cfg, cfg.restricted)
        path = records.write_csv(Path(out) / "parts" / f"spectrum_{index:03d}.csv", records.SPECTRUM_HEADER, rows)
    else:
        row, _ = instability_summary(cfg)
        rows = [row]
        path = records.write_csv(Path(out) / "parts" / f"rate_{index:03d}.csv", records.RATE_HEADER, rows)
    return str(path), rows


def run_sweep(cfg: RunConfig, out: Path) -> list[Path]:
    jobs = [(cfg, i, str(out)) for i in range(len(cfg.lambdas))]
    if cfg.jobs > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=min(cfg.jobs, len(jobs))) as pool:
            results = list(pool.map(_sweep_worker, jobs))
    else:
        results = [_sweep_worker(j) for j in jobs]
    header = records.SPECTRUM_HEADER if cfg.task == "spectrum" else records.RATE_HEADER
    rows = [r for _, part in results for r in part]
    files = [Path(p) for p, _ in results]
    files.append(records.write_csv(out / "sweep.csv", header, rows))
    if cfg.plot:
        if cfg.task == "spectrum":
            nmax = max(r[5] for r in rows) + 1
            series = []
            for i in range(nmax):
                pts = [(r[0], r[6]) for r in rows if r[5] == i]
                series.append((f"nu_{i}", [p[0] for p in pts], [p[1] for p in pts]))
            doc = svg.line_plot(series, f"eigenvalues vs lambda ({cfg.family})", "lambda", "eigenvalue", markers=True)
        else:
            doc = svg.line_plot([("mu (spectral)", [r[0] for r in rows], [r[2] for r in rows]),
                                 ("sigma (measured)", [r[0] for r in rows], [r[3] for r in rows])],
                                f"growth rate vs lambda ({cfg.family})", "lambda", "rate", markers=True)
        files.append(records.write_text(out / "sweep.svg", doc))
    return files


PIPELINES = {
    "profile": run_profile,
    "spectrum": run_spectrum,
    "evolve": run_evolve,
    "instability": run_instability,
    "sweep": run_sweep,
}


def load_config(command: str, path: str | None, overrides: list[str], out: str | None, plot: bool,
                jobs: int | None) -> RunConfig:
    text = ""
    if path is not None:
        try:
            text = Path(path).read_text(encoding="utf-8")
        except OSError as exc:
            raise OSError(f"cannot read config {path}: {exc.strerror or exc}") from exc
    pairs = parse_pairs(text)
    extra = parse_pairs("\n".join(overrides))
    pairs.update(extra)
    if pairs.get("command", command) != command:
        raise ConfigError(f"command in config ({pairs['command']}) does not match subcommand {command}")
    pairs["command"] = command
    if out is not None:
        pairs["out"] = out
    if plot:
        pairs["plot"] = "true"
    if jobs is not None:
        pairs["jobs"] = str(jobs)
    return from_pairs(pairs)


def run(cfg: RunConfig) -> list[Path]:
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    t0 = time.perf_counter()
    files = PIPELINES[cfg.command](cfg, out)
    wall = time.perf_counter() - t0
    records.write_manifest(out, __version__, cfg.echo(), wall, files)
    return files


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="tricrystal", description=__doc__.split("\n\n")[0])
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        s = sub.add_parser(name)
        s.add_argument("--config", metavar="PATH")
        s.add_argument("--out", metavar="DIR")
        s.add_argument("--plot", action="store_true")
        s.add_argument("--jobs", metavar="N", type=int)
        s.add_argument("-v", "--verbose", action="store_true")
        s.add_argument("params", nargs="*", metavar="key=value")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = load_config(args.command, args.config, args.params, args.out, args.plot, args.jobs)
        files = run(cfg)
    except (ConfigError, ConfigurationError, OutOfRangeError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (FloatingPointError, BlowUpError, InconclusiveSpectrumError, ArithmeticError,
            np.linalg.LinAlgError, RuntimeError) as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except ValueError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    for f in files:
        print(f)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
