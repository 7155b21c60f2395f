"""Stoermer-Verlet inner loops for the perturbation form of the sine-Gordon system.

The evolved unknown is P = u - Phi with velocity Q, where Phi is a stationary
background (zero when absent).  Per edge j and interior node i

    dQ/dt = c_j^2 (P[i+1] - 2 P[i] + P[i-1]) / h^2 - (sin(Phi + P) - sin(Phi))

and the last node is clamped.  Two vertex treatments are implemented:

* MODE_WEAK: the vertex nodes carry the half-cell lumped mass h/2 and the
  delta' rule enters through the flux term c_j^2 (P1 - P0)/h - c_j S / lam,
  S = sum_k c_k P_k(0).  For lam = 0 (inv_lam = 0, kirchhoff = True) the
  vertex acceleration is projected onto the plane sum_k c_k a_k = 0.
* MODE_PROJECTION: the vertex values are recomputed after every drift from
  the three one-sided-stencil vertex equations, P0 = G (4 P1 - P2).

Two implementations share one signature: numba-compiled loops and a
vectorized numpy fallback.  Set TRICRYSTAL_DISABLE_NUMBA=1 to force numpy.
"""

from __future__ import annotations

import os

import numpy as np

MODE_WEAK = 0
MODE_PROJECTION = 1

_DISABLE = os.environ.get("TRICRYSTAL_DISABLE_NUMBA", "").strip().lower() in ("1", "true", "yes", "on")

try:
    if _DISABLE:
        raise ImportError("disabled by TRICRYSTAL_DISABLE_NUMBA")
    from numba import njit

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - exercised only without numba
    HAVE_NUMBA = False


def _accel_numpy(P, bg, c2, cw, h, inv_lam, kirchhoff, mode, a):
    n = P.shape[1]
    a[:, 1:n - 1] = (c2[:, None] * (P[:, 2:] - 2.0 * P[:, 1:n - 1] + P[:, :n - 2]) / (h * h)
                     - 2.0 * np.cos(bg[:, 1:n - 1] + 0.5 * P[:, 1:n - 1]) * np.sin(0.5 * P[:, 1:n - 1]))
    a[:, n - 1] = 0.0
    if mode == MODE_WEAK:
        s = np.dot(cw, P[:, 0])
        a[:, 0] = ((c2 * (P[:, 1] - P[:, 0]) / h - cw * s * inv_lam) * (2.0 / h)
                   - 2.0 * np.cos(bg[:, 0] + 0.5 * P[:, 0]) * np.sin(0.5 * P[:, 0]))
        if kirchhoff:
            a[:, 0] -= cw * (np.dot(cw, a[:, 0]) / np.dot(cw, cw))
    else:
        a[:, 0] = 0.0


def _project_numpy(X, G):
    X[:, 0] = G @ (4.0 * X[:, 1] - X[:, 2])


def verlet_numpy(P, Q, bg, c, h, dt, nsteps, mode, inv_lam, kirchhoff, G, a):
    """Advance (P, Q) in place by nsteps; ``a`` holds the acceleration at P on entry and exit."""
    c2 = c * c
    lo = 0 if mode == MODE_WEAK else 1
    n = P.shape[1]
    half = 0.5 * dt
    for _ in range(nsteps):
        Q[:, lo:n - 1] += half * a[:, lo:n - 1]
        P[:, lo:n - 1] += dt * Q[:, lo:n - 1]
        if mode == MODE_PROJECTION:
            _project_numpy(P, G)
        _accel_numpy(P, bg, c2, c, h, inv_lam, kirchhoff, mode, a)
        Q[:, lo:n - 1] += half * a[:, lo:n - 1]
        if mode == MODE_PROJECTION:
            _project_numpy(Q, G)


def accel_numpy(P, bg, c, h, inv_lam, kirchhoff, mode):
    a = np.empty_like(P)
    _accel_numpy(P, bg, c * c, c, h, inv_lam, kirchhoff, mode, a)
    return a


if HAVE_NUMBA:

    @njit(cache=True)
    def _accel_nb(P, bg, c, h, inv_lam, kirchhoff, mode, a):
        m, n = P.shape
        ih2 = 1.0 / (h * h)
        for j in range(m):
            cj2 = c[j] * c[j]
            for i in range(1, n - 1):
                p = P[j, i]
                a[j, i] = (cj2 * (P[j, i + 1] - 2.0 * p + P[j, i - 1]) * ih2
                           - 2.0 * np.cos(bg[j, i] + 0.5 * p) * np.sin(0.5 * p))
            a[j, n - 1] = 0.0
        if mode == MODE_WEAK:
            s = 0.0
            for j in range(m):
                s += c[j] * P[j, 0]
            for j in range(m):
                p = P[j, 0]
                a[j, 0] = ((c[j] * c[j] * (P[j, 1] - p) / h - c[j] * s * inv_lam) * (2.0 / h)
                           - 2.0 * np.cos(bg[j, 0] + 0.5 * p) * np.sin(0.5 * p))
            if kirchhoff:
                ca = 0.0
                cc = 0.0
                for j in range(m):
                    ca += c[j] * a[j, 0]
                    cc += c[j] * c[j]
                for j in range(m):
                    a[j, 0] -= c[j] * ca / cc
        else:
            for j in range(m):
                a[j, 0] = 0.0

    @njit(cache=True)
    def _project_nb(X, G):
        m = X.shape[0]
        r = np.empty(m)
        for j in range(m):
            r[j] = 4.0 * X[j, 1] - X[j, 2]
        for j in range(m):
            acc = 0.0
            for k in range(m):
                acc += G[j, k] * r[k]
            X[j, 0] = acc

    @njit(cache=True)
    def verlet_numba(P, Q, bg, c, h, dt, nsteps, mode, inv_lam, kirchhoff, G, a):
        m, n = P.shape
        lo = 0 if mode == MODE_WEAK else 1
        half = 0.5 * dt
        for _ in range(nsteps):
            for j in range(m):
                for i in range(lo, n - 1):
                    Q[j, i] += half * a[j, i]
                    P[j, i] += dt * Q[j, i]
            if mode == MODE_PROJECTION:
                _project_nb(P, G)
            _accel_nb(P, bg, c, h, inv_lam, kirchhoff, mode, a)
            for j in range(m):
                for i in range(lo, n - 1):
                    Q[j, i] += half * a[j, i]
            if mode == MODE_PROJECTION:
                _project_nb(Q, G)

    def accel_numba(P, bg, c, h, inv_lam, kirchhoff, mode):
        a = np.empty_like(P)
        _accel_nb(P, bg, c, h, inv_lam, kirchhoff, mode, a)
        return a


def get_backend(name: str | None = None):
    """Return (name, verlet, accel) for 'numba', 'numpy' or the default."""
    if name is None:
        name = "numba" if HAVE_NUMBA else "numpy"
    if name == "numba":
        if not HAVE_NUMBA:
            raise RuntimeError("numba backend requested but numba is unavailable or disabled")
        return "numba", verlet_numba, accel_numba
    if name == "numpy":
        return "numpy", verlet_numpy, accel_numpy
    raise ValueError(f"unknown backend {name!r}")
