"""Time integration of the sine-Gordon system on the truncated Y-junction.

    u_t = v,    v_t = c_j^2 u_xx - sin(u)    on each edge,

with the delta' vertex rule and the far node clamped to its asymptotic value.
When a stationary background Phi is supplied the integrator evolves the
perturbation P = u - Phi,

    P_tt = c_j^2 P_xx - (sin(Phi + P) - sin(Phi)),

so Phi itself is an exact fixed point of the discrete scheme.  Norms used for
instability measurements are always norms of u - Phi.
"""

from __future__ import annotations

import logging
import math
import time as _time
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import _kernels
from .graph import EdgeGrid, GraphField, YGraphSpec
from .profiles import ProfileFamily
from .spectral import OperatorSpec, growing_mode_rate, spectrum

log = logging.getLogger(__name__)

MAX_CFL = 0.9
DEFAULT_CFL = 0.4
NORM_CEILING = 1e-2
VERTEX_MODES = {"weak": _kernels.MODE_WEAK, "projection": _kernels.MODE_PROJECTION}


class ConfigurationError(ValueError):
    pass


class BlowUpError(FloatingPointError):
    def __init__(self, t: float):
        super().__init__(f"non-finite values in the solution at t = {t:.6g}")
        self.time = t


@dataclass(frozen=True)
class State:
    u: GraphField
    v: GraphField
    time: float = 0.0

    @classmethod
    def from_background(cls, fam: ProfileFamily, grid: EdgeGrid, du: Optional[GraphField] = None,
                        v: Optional[GraphField] = None) -> "State":
        u = fam.sample(grid)
        if du is not None:
            u = u + du
        return cls(u, v if v is not None else GraphField.zeros(grid), 0.0)


@dataclass(frozen=True)
class EvolveConfig:
    t_end: float
    dt: Optional[float] = None
    record_every: int = 1
    background: Optional[ProfileFamily] = None
    vertex: str = "weak"
    far_boundary: str = "clamp"
    keep_snapshots: bool = True
    backend: Optional[str] = None

    def __post_init__(self):
        if self.vertex not in VERTEX_MODES:
            raise ConfigurationError(f"vertex must be one of {sorted(VERTEX_MODES)}, got {self.vertex!r}")
        if self.far_boundary != "clamp":
            raise ConfigurationError("only the clamp-to-asymptote far boundary is supported")
        if self.record_every < 1:
            raise ConfigurationError("record_every must be >= 1")
        if not self.t_end >= 0:
            raise ConfigurationError("t_end must be >= 0")

    def time_step(self, grid: EdgeGrid, spec: YGraphSpec) -> float:
        cmax = max(spec.speeds)
        dt = DEFAULT_CFL * grid.spacing / cmax if self.dt is None else float(self.dt)
        if not dt > 0:
            raise ConfigurationError(f"dt must be positive, got {dt}")
        if dt * cmax / grid.spacing > MAX_CFL + 1e-12:
            raise ConfigurationError(
                f"CFL number {dt * cmax / grid.spacing:.3f} exceeds {MAX_CFL} (dt={dt:g}, h={grid.spacing:g})"
            )
        return dt


def projection_matrix(spec: YGraphSpec, h: float) -> np.ndarray:
    """G with u(0) = G (4 u_1 - u_2) solving the three vertex equations.

    Equations use D_j = (-3 u_j(0) + 4 u_j1 - u_j2) / 2h:
    c1 D1 = c2 D2, c2 D2 = c3 D3, sum c_j u_j(0) = lam c1 D1.
    """
    c1, c2, c3 = spec.speeds
    lam = spec.lam
    k = 1.0 / (2.0 * h)
    A = np.array([
        [-3 * k * c1, 3 * k * c2, 0.0],
        [0.0, -3 * k * c2, 3 * k * c3],
        [c1 + 3 * k * lam * c1, c2, c3],
    ])
    B = np.array([
        [-k * c1, k * c2, 0.0],
        [0.0, -k * c2, k * c3],
        [k * lam * c1, 0.0, 0.0],
    ])
    det = np.linalg.det(A)
    if abs(det) < 1e-14:
        raise ConfigurationError(f"singular vertex projection system (det={det:.3g}) for speeds {spec.speeds}, lambda={lam}")
    return np.linalg.solve(A, B)


class Stepper:
    """Holds the working arrays of one run and advances them in place."""

    def __init__(self, s0: State, cfg: EvolveConfig, spec: YGraphSpec):
        grid = s0.u.grid
        self.grid, self.spec, self.cfg = grid, spec, cfg
        self.dt = cfg.time_step(grid, spec)
        self.mode = VERTEX_MODES[cfg.vertex]
        self.backend, self._verlet, self._accel = _kernels.get_backend(cfg.backend)
        self.c = spec.c.copy()
        self.h = grid.spacing
        self.kirchhoff = spec.kirchhoff
        self.inv_lam = 0.0 if spec.kirchhoff else 1.0 / spec.lam
        self.G = projection_matrix(spec, self.h) if self.mode == _kernels.MODE_PROJECTION else np.zeros((3, 3))
        if cfg.background is not None:
            self.bg = np.ascontiguousarray(cfg.background.sample(grid).values)
        else:
            self.bg = np.zeros((3, grid.n_points))
        self.P = np.ascontiguousarray(s0.u.values - self.bg)
        self.Q = np.ascontiguousarray(s0.v.values.copy())
        self.Q[:, -1] = 0.0
        self.time = float(s0.time)
        self._enforce_vertex()
        self.a = self._accel(self.P, self.bg, self.c, self.h, self.inv_lam, self.kirchhoff, self.mode)

    def _enforce_vertex(self):
        if self.mode == _kernels.MODE_PROJECTION:
            for X in (self.P, self.Q):
                X[:, 0] = self.G @ (4.0 * X[:, 1] - X[:, 2])
        elif self.kirchhoff:
            cc = float(self.c @ self.c)
            for X in (self.P, self.Q):
                X[:, 0] -= self.c * (float(self.c @ X[:, 0]) / cc)

    def advance(self, nsteps: int):
        if nsteps <= 0:
            return
        self._verlet(self.P, self.Q, self.bg, self.c, self.h, self.dt, int(nsteps), self.mode,
                     self.inv_lam, self.kirchhoff, self.G, self.a)
        self.time += nsteps * self.dt
        if not (np.all(np.isfinite(self.P)) and np.all(np.isfinite(self.Q))):
            raise BlowUpError(self.time)

    def state(self) -> State:
        return State(GraphField(self.grid, self.P + self.bg), GraphField(self.grid, self.Q.copy()), self.time)

    def perturbation_norm(self) -> float:
        w = self.grid.weights()
        return float(math.sqrt(np.sum(self.P * self.P * w)))


def step(s: State, cfg: EvolveConfig, spec: YGraphSpec) -> State:
    """One Stoermer-Verlet step (half kick, drift, vertex update, half kick)."""
    st = Stepper(s, cfg, spec)
    st.advance(1)
    return st.state()


def _discrete_energy(P, Q, bg, grid: EdgeGrid, spec: YGraphSpec):
    """Energy conserved by the weak-vertex scheme, split as (total, vertex term).

    Without background this is the trapezoid/P1 discretization of
    sum_j int v^2/2 + c_j^2 u_x^2/2 + (1 - cos u) dx + (sum_j c_j u_j(0))^2 / (2 lam).
    With background it returns H(Phi) + E(P, Q), where E is the relative energy
    whose gradient is the perturbation force; both agree with H(u) up to O(h^2).
    """
    h = grid.spacing
    w = grid.weights()
    c = spec.c

    def base(U, V):
        kin = 0.5 * np.sum(w * V * V)
        grad = 0.5 * np.sum((c * c)[:, None] * np.diff(U, axis=1) ** 2) / h
        return kin + grad

    def vertex(U):
        s = float(c @ U[:, 0])
        return (0.0, s) if spec.kirchhoff else (s * s / (2.0 * spec.lam), s * s / (2.0 * spec.lam))

    pot_p = np.sum(w * (np.cos(bg) - np.cos(bg + P) - np.sin(bg) * P))
    e_pert = base(P, Q) + pot_p + vertex(P)[0]
    e_bg = base(bg, np.zeros_like(bg)) + np.sum(w * (1.0 - np.cos(bg))) + vertex(bg)[0]
    total = e_bg + e_pert
    if spec.kirchhoff:
        vterm = float(c @ (bg + P)[:, 0])
    else:
        vterm = vertex(bg + P)[1]
    return float(total), float(vterm)


def energy(s: State, spec: YGraphSpec, background: Optional[ProfileFamily] = None) -> float:
    """Discrete Hamiltonian of a state.

    For lam = 0 the vertex term is dropped; the constraint violation is
    reported separately by the energy series of :func:`evolve`.
    """
    grid = s.u.grid
    bg = background.sample(grid).values if background is not None else np.zeros((3, grid.n_points))
    return _discrete_energy(s.u.values - bg, s.v.values, bg, grid, spec)[0]


@dataclass
class EnergyReport:
    times: list = field(default_factory=list)
    energy: list = field(default_factory=list)
    vertex_term: list = field(default_factory=list)
    boundary_flux_estimate: list = field(default_factory=list)

    def relative_drift(self) -> float:
        e = np.asarray(self.energy)
        if e.size == 0 or e[0] == 0.0:
            return float(np.max(np.abs(e - e[0]))) if e.size else 0.0
        return float(np.max(np.abs(e - e[0])) / abs(e[0]))


@dataclass
class Trajectory:
    grid: EdgeGrid
    spec: YGraphSpec
    background: Optional[ProfileFamily]
    times: list = field(default_factory=list)
    snapshots: list = field(default_factory=list)
    perturbation_norms: list = field(default_factory=list)
    backend: str = ""
    wall_seconds: float = 0.0


def _flux_estimate(P, Q, bg, grid: EdgeGrid, spec: YGraphSpec) -> float:
    U = P + bg
    c2 = spec.c ** 2
    return float(np.sum(c2 * (U[:, -1] - U[:, -2]) / grid.spacing * Q[:, -2]))


def evolve(s0: State, cfg: EvolveConfig, spec: YGraphSpec) -> tuple[Trajectory, EnergyReport]:
    """Integrate to cfg.t_end, recording every cfg.record_every steps (and the final step)."""
    st = Stepper(s0, cfg, spec)
    nsteps = int(round(cfg.t_end / st.dt))
    traj = Trajectory(s0.u.grid, spec, cfg.background, backend=st.backend)
    rep = EnergyReport()

    def record():
        traj.times.append(st.time)
        traj.perturbation_norms.append(st.perturbation_norm())
        if cfg.keep_snapshots:
            traj.snapshots.append(st.state())
        e, vt = _discrete_energy(st.P, st.Q, st.bg, st.grid, spec)
        rep.times.append(st.time)
        rep.energy.append(e)
        rep.vertex_term.append(vt)
        rep.boundary_flux_estimate.append(_flux_estimate(st.P, st.Q, st.bg, st.grid, spec))

    t0 = _time.perf_counter()
    record()
    done = 0
    while done < nsteps:
        chunk = min(cfg.record_every, nsteps - done)
        st.advance(chunk)
        done += chunk
        record()
    traj.wall_seconds = _time.perf_counter() - t0
    log.debug("evolve: %d steps, dt=%g, backend=%s, %.2fs", nsteps, st.dt, st.backend, traj.wall_seconds)
    return traj, rep


@dataclass(frozen=True)
class GrowthFit:
    sigma: float
    fit_window: Optional[tuple[float, float]]
    r_squared: float
    exponential: bool


def _linear_fit(t, y):
    t = np.asarray(t)
    y = np.asarray(y)
    A = np.vstack([t, np.ones_like(t)]).T
    (slope, icept), *_ = np.linalg.lstsq(A, y, rcond=None)
    ss_res = float(np.sum((y - (slope * t + icept)) ** 2))
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
    return float(slope), r2


def growth_rate(traj: Trajectory, background: Optional[ProfileFamily] = None, eps: Optional[float] = None,
                ceiling: float = NORM_CEILING, min_points: int = 8) -> GrowthFit:
    """Least-squares slope of log ||u(t) - Phi|| over the window where the norm lies in [10 eps, ceiling].

    ``eps`` defaults to the initial perturbation norm.  A run whose norm never
    enters the window is reported as non-exponential with the slope of the
    whole record.
    """
    if background is None or background == traj.background:
        norms = np.asarray(traj.perturbation_norms)
    else:
        if not traj.snapshots:
            raise ValueError("trajectory has no snapshots to measure against a different background")
        phi = background.sample(traj.grid)
        norms = np.array([(s.u - phi).norm() for s in traj.snapshots])
    t = np.asarray(traj.times)
    if eps is None:
        eps = float(norms[0])
    lo = 10.0 * eps
    start = np.argmax(norms >= lo) if np.any(norms >= lo) else None
    if start is not None:
        over = np.nonzero(norms[start:] > ceiling)[0]
        stop = start + (over[0] if over.size else norms.size - start)
        if stop - start >= min_points:
            sl = slice(start, stop)
            sigma, r2 = _linear_fit(t[sl], np.log(norms[sl]))
            return GrowthFit(sigma, (float(t[start]), float(t[stop - 1])), r2, True)
    sigma, r2 = _linear_fit(t, np.log(np.maximum(norms, 1e-300)))
    return GrowthFit(sigma, None, r2, False)


@dataclass
class InstabilityResult:
    family: ProfileFamily
    nu0: float
    mu: float
    fit: Optional[GrowthFit]
    trajectory: Trajectory
    energy: EnergyReport

    @property
    def rel_err(self) -> float:
        if self.fit is None or self.mu == 0.0:
            return float("nan")
        return abs(self.fit.sigma - self.mu) / self.mu


def instability_run(fam: ProfileFamily, grid: EdgeGrid, eps: float = 1e-6, t_end: Optional[float] = None,
                    dt: Optional[float] = None, k: int = 4, record_every: int = 10, vertex: str = "weak",
                    backend: Optional[str] = None) -> InstabilityResult:
    """Seed Phi with eps * (lowest eigenvector) moving along the growing mode and measure the rate."""
    if not 1e-7 <= eps <= 1e-4:
        raise ConfigurationError(f"seed amplitude must lie in [1e-7, 1e-4], got {eps:g}")
    spec = fam.spec
    rep = spectrum(OperatorSpec.linearized(fam, grid), k=k)
    nu0 = float(rep.eigenvalues[0])
    gm = growing_mode_rate(rep)
    psi = rep.eigenvectors[0]
    psi = psi * (1.0 / psi.norm())
    if t_end is None:
        t_end = (grid.length - 10.0) / max(spec.speeds)
    s0 = State(fam.sample(grid) + eps * psi, (eps * gm.mu_plus) * psi, 0.0)
    cfg = EvolveConfig(t_end=t_end, dt=dt, record_every=record_every, background=fam, vertex=vertex,
                       keep_snapshots=False, backend=backend)
    traj, erep = evolve(s0, cfg, spec)
    fit = growth_rate(traj, eps=eps)
    return InstabilityResult(fam, nu0, gm.mu_plus, fit, traj, erep)
