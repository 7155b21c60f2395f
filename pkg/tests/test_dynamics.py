import math

import numpy as np
import pytest

from tricrystal import _kernels, dynamics
from tricrystal.dynamics import (BlowUpError, ConfigurationError, EvolveConfig, State, energy, evolve,
                                 growth_rate, instability_run, projection_matrix, step)
from tricrystal.graph import EdgeGrid, GraphField, YGraphSpec, bc_residual
from tricrystal.profiles import make_family
from tricrystal.spectral import OperatorSpec, analytic_kernel_vectors, assemble, quadratic_form

EQ = (1.0, 1.0, 1.0)


def pulse(grid, amp=0.05, x0=10.0, w=1.0):
    return GraphField(grid, np.tile(amp * np.exp(-(((grid.nodes - x0) / w) ** 2)), (3, 1)))


def test_default_dt_and_cfl_guard():
    g = EdgeGrid(10.0, 1001)
    spec = YGraphSpec((1.0, 2.0, 1.0), -5.0)
    assert EvolveConfig(t_end=1.0).time_step(g, spec) == pytest.approx(0.4 * g.spacing / 2.0)
    with pytest.raises(ConfigurationError, match="CFL"):
        EvolveConfig(t_end=1.0, dt=0.0046).time_step(g, spec)
    with pytest.raises(ConfigurationError):
        EvolveConfig(t_end=1.0, vertex="ghost")


def test_zero_state_stays_zero():
    g = EdgeGrid(10.0, 201)
    spec = YGraphSpec(EQ, -2.0)
    s0 = State(GraphField.zeros(g), GraphField.zeros(g))
    traj, rep = evolve(s0, EvolveConfig(t_end=2.0, record_every=50), spec)
    assert all(np.all(s.u.values == 0) and np.all(s.v.values == 0) for s in traj.snapshots)
    assert all(e == 0.0 for e in rep.energy)
    assert energy(s0, spec) == 0.0


@pytest.mark.parametrize("kind,lam", [("kink", -1.5 * math.pi), ("antikink", -0.5 * math.pi)])
def test_flat_profiles_are_discrete_fixed_points(grid, kind, lam):
    fam = make_family(kind, YGraphSpec(EQ, lam))
    s0 = State.from_background(fam, grid)
    traj, rep = evolve(s0, EvolveConfig(t_end=1000 * 0.004, background=fam, record_every=1000), fam.spec)
    assert len(traj.times) == 2
    phi = fam.sample(grid)
    assert np.max(np.abs(traj.snapshots[-1].u.values - phi.values)) <= 1e-6
    e = np.asarray(rep.energy)
    assert abs(e[-1] - e[0]) <= 1e-6 * abs(e[0])


def test_step_projection_restores_vertex_rule():
    g = EdgeGrid(10.0, 1001)
    spec = YGraphSpec(EQ, -2.0)
    u0 = GraphField(g, np.full((3, g.n_points), 0.3))
    assert abs(bc_residual(u0, spec)[2]) > 0.5
    s1 = step(State(u0, GraphField.zeros(g)), EvolveConfig(t_end=1.0, vertex="projection"), spec)
    assert max(abs(r) for r in bc_residual(s1.u, spec)) <= 1e-10


def test_weak_vertex_keeps_kirchhoff_constraint():
    g = EdgeGrid(10.0, 1001)
    spec = YGraphSpec((1.0, 2.0, 0.5), 0.0)
    u0 = pulse(g, 0.2, 0.0, 1.5)
    traj, _ = evolve(State(u0, GraphField.zeros(g)), EvolveConfig(t_end=2.0, record_every=100), spec)
    for s in traj.snapshots[1:]:
        assert abs(float(spec.c @ s.u.values[:, 0])) <= 1e-13


def test_projection_matrix_singular_value_rejected():
    h = 0.01
    # det of the vertex system is 27 c1 c2 c3 (1 + lam / 2h) / (4h^2): singular at lam = -2h
    with pytest.raises(ConfigurationError, match="singular"):
        projection_matrix(YGraphSpec(EQ, -2 * h), h)
    G = projection_matrix(YGraphSpec((1.0, 2.0, 3.0), -4.0), h)
    assert np.all(np.isfinite(G))


def test_energy_scaling_of_kinetic_part(grid):
    fam = make_family("antikink", YGraphSpec(EQ, 1.0))
    u = fam.sample(grid)
    v = pulse(grid, 0.3)
    spec = fam.spec
    e0 = energy(State(u, GraphField.zeros(grid)), spec)
    e1 = energy(State(u, v), spec)
    e2 = energy(State(u, 2.0 * v), spec)
    assert (e2 - e0) == pytest.approx(4.0 * (e1 - e0), rel=1e-12)


def test_energy_with_background_matches_plain_energy(grid):
    fam = make_family("kink", YGraphSpec(EQ, -4.0))
    s = State.from_background(fam, grid, du=pulse(grid, 0.1, 3.0), v=pulse(grid, 0.05, 5.0))
    # the two differ by <grad H_h(Phi), u - Phi>, which is O(h^2) since Phi is stationary only up to O(h^2)
    assert energy(s, fam.spec, fam) == pytest.approx(energy(s, fam.spec), rel=grid.spacing**2)


@pytest.mark.parametrize("kind,lam", [("kink", -4.0), ("antikink", -1.0), ("antikink", 2.0)])
def test_energy_second_variation_is_linearized_form(grid, kind, lam):
    fam = make_family(kind, YGraphSpec(EQ, lam))
    phi = fam.sample(grid)
    x = grid.nodes
    w = GraphField(grid, np.vstack([np.exp(-x) * (1 + 0.2 * j) for j in range(3)]))
    w = GraphField(grid, w.values - np.outer(np.ones(3), np.exp(-x[-1])))
    eps = 1e-4
    zero = GraphField.zeros(grid)

    def E(f):
        return energy(State(f, zero), fam.spec)

    d2 = (E(phi + eps * w) + E(phi - eps * w) - 2 * E(phi)) / eps**2
    q = quadratic_form(assemble(OperatorSpec.linearized(fam, grid)), w)
    assert d2 == pytest.approx(q, rel=1e-3)


def test_energy_drift_second_order_in_dt(grid):
    fam = make_family("antikink", YGraphSpec(EQ, 1.0))
    drifts = []
    for dt in (0.004, 0.002):
        s0 = State.from_background(fam, grid, du=pulse(grid, 0.1))
        _, rep = evolve(s0, EvolveConfig(t_end=20.0, dt=dt, background=fam, record_every=50,
                                         keep_snapshots=False), fam.spec)
        drifts.append(rep.relative_drift())
    assert drifts[0] <= 1e-6
    assert 3.5 <= drifts[0] / drifts[1] <= 4.5


def test_global_error_second_order_in_dt():
    g = EdgeGrid(20.0, 401)
    spec = YGraphSpec(EQ, -2.0)
    s0 = State(pulse(g, 0.5, 5.0, 1.0), GraphField.zeros(g))
    finals = []
    for dt in (0.02, 0.01, 0.005):
        traj, _ = evolve(s0, EvolveConfig(t_end=4.0, dt=dt, record_every=10_000), spec)
        finals.append(traj.snapshots[-1].u.values)
    e1 = np.max(np.abs(finals[0] - finals[1]))
    e2 = np.max(np.abs(finals[1] - finals[2]))
    assert 3.5 <= e1 / e2 <= 4.5


@pytest.mark.parametrize("vertex", ["weak", "projection"])
def test_time_reversible(vertex):
    g = EdgeGrid(20.0, 1001)
    fam = make_family("kink", YGraphSpec(EQ, -4.0))
    s0 = State.from_background(fam, g, du=pulse(g, 0.05, 4.0), v=pulse(g, 0.02, 6.0))
    cfg = EvolveConfig(t_end=3.0, background=fam, vertex=vertex, record_every=100_000)
    if vertex == "projection":
        # the projection scheme starts by placing the vertex values on the discrete rule
        s0 = step(s0, dataclasses_replace(cfg, t_end=0.0), fam.spec)
    fwd, _ = evolve(s0, cfg, fam.spec)
    s1 = fwd.snapshots[-1]
    back, _ = evolve(State(s1.u, -1.0 * s1.v), cfg, fam.spec)
    s2 = back.snapshots[-1]
    assert np.max(np.abs(s2.u.values - s0.u.values)) <= 1e-8
    assert np.max(np.abs(s2.v.values + s0.v.values)) <= 1e-8


def dataclasses_replace(cfg, **kw):
    import dataclasses
    return dataclasses.replace(cfg, **kw)


def test_blow_up_reported_with_time(monkeypatch):
    def nan_verlet(P, Q, *args):
        P[0, 5] = np.nan

    real = _kernels.get_backend
    monkeypatch.setattr(_kernels, "get_backend", lambda name=None: (real(name)[0], nan_verlet, real(name)[2]))
    g = EdgeGrid(5.0, 101)
    spec = YGraphSpec(EQ, -2.0)
    with pytest.raises(BlowUpError) as err:
        evolve(State(GraphField.zeros(g), GraphField.zeros(g)), EvolveConfig(t_end=1.0, record_every=10), spec)
    assert err.value.time > 0


def test_growth_rate_matches_spectrum(grid):
    fam = make_family("kink", YGraphSpec(EQ, -4.0))
    res = instability_run(fam, grid, eps=1e-6)
    assert res.fit.exponential
    assert abs(res.fit.sigma - res.mu) / res.mu <= 0.05
    assert res.fit.r_squared >= 0.999
    half = instability_run(fam, grid, eps=5e-7)
    assert half.fit.sigma == pytest.approx(res.fit.sigma, rel=1e-2)
    norms = np.asarray(res.trajectory.perturbation_norms)
    t = np.asarray(res.trajectory.times)
    grow = norms[t >= 1.0]
    assert np.all(np.diff(grow[grow < 1e-2]) > 0)


def test_kernel_seed_gives_no_exponential_window(grid):
    fam = make_family("kink", YGraphSpec(EQ, -1.5 * math.pi))
    psi = analytic_kernel_vectors(fam, grid)[0]
    eps = 1e-6
    s0 = State.from_background(fam, grid, du=(eps / psi.norm()) * psi)
    traj, _ = evolve(s0, EvolveConfig(t_end=15.0, background=fam, record_every=25, keep_snapshots=False),
                     fam.spec)
    fit = growth_rate(traj, eps=eps)
    assert not fit.exponential and fit.fit_window is None
    assert abs(fit.sigma) <= 0.05
    assert max(traj.perturbation_norms) <= 10 * eps


def test_growth_rate_against_other_background_needs_snapshots(grid):
    fam = make_family("kink", YGraphSpec(EQ, -4.0))
    other = make_family("kink", YGraphSpec(EQ, -5.0))
    s0 = State.from_background(fam, grid)
    traj, _ = evolve(s0, EvolveConfig(t_end=0.1, background=fam, keep_snapshots=False), fam.spec)
    with pytest.raises(ValueError, match="snapshots"):
        growth_rate(traj, other)


def test_seed_amplitude_range(grid):
    fam = make_family("kink", YGraphSpec(EQ, -4.0))
    with pytest.raises(ConfigurationError, match=r"1e-7, 1e-4"):
        instability_run(fam, grid, eps=1e-3)


def test_projection_scheme_tracks_weak_scheme(grid):
    fam = make_family("antikink", YGraphSpec(EQ, 1.0))
    out = []
    for vertex in ("weak", "projection"):
        s0 = State.from_background(fam, grid, du=pulse(grid, 0.05, 3.0))
        traj, _ = evolve(s0, EvolveConfig(t_end=5.0, background=fam, vertex=vertex, record_every=100_000),
                         fam.spec)
        out.append(traj.snapshots[-1].u.values)
    assert np.max(np.abs(out[0] - out[1])) <= 1e-4
