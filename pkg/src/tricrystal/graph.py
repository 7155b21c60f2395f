"""Tricrystal (star) graph geometry, truncated edge grids and fields on the graph.

Each of the three edges is a copy of the half-line ``(0, inf)`` truncated to
``[0, L]`` and sampled on one shared uniform grid.  Fields are stored as a
``(3, n)`` float array, row ``j`` holding edge ``j``.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

N_EDGES = 3
MIN_POINTS = 8


class GridMismatchError(ValueError):
    """Two fields (or a field and an operator) live on different grids."""


@dataclass(frozen=True)
class YGraphSpec:
    """Edge speeds ``c_j`` and the vertex parameter ``lam`` of the delta' condition

        c_1 u_1'(0) = c_2 u_2'(0) = c_3 u_3'(0),
        sum_j c_j u_j(0) = lam * c_1 u_1'(0).

    ``lam == 0`` is the Kirchhoff case, where the second line reduces to the
    constraint ``sum_j c_j u_j(0) = 0``.
    """

    speeds: tuple[float, float, float]
    lam: float

    def __post_init__(self):
        speeds = tuple(float(c) for c in self.speeds)
        if len(speeds) != N_EDGES:
            raise ValueError(f"expected 3 edge speeds, got {len(speeds)}")
        if not all(np.isfinite(c) and c > 0 for c in speeds):
            raise ValueError(f"edge speeds must be finite and positive, got {speeds}")
        if not np.isfinite(self.lam):
            raise ValueError(f"lambda must be finite, got {self.lam}")
        object.__setattr__(self, "speeds", speeds)
        object.__setattr__(self, "lam", float(self.lam))

    @property
    def c(self) -> np.ndarray:
        return np.array(self.speeds)

    @property
    def kirchhoff(self) -> bool:
        return self.lam == 0.0

    @property
    def equal_speeds(self) -> bool:
        return self.speeds[0] == self.speeds[1] == self.speeds[2]

    def speed_sum(self) -> float:
        return float(sum(self.speeds))

    def with_lambda(self, lam: float) -> "YGraphSpec":
        return YGraphSpec(self.speeds, lam)


@dataclass(frozen=True)
class EdgeGrid:
    length: float
    n_points: int
    nodes: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if not (np.isfinite(self.length) and self.length > 0):
            raise ValueError(f"grid length must be positive, got {self.length}")
        if int(self.n_points) != self.n_points or self.n_points < MIN_POINTS:
            raise ValueError(f"n_points must be an integer >= {MIN_POINTS}, got {self.n_points}")
        object.__setattr__(self, "length", float(self.length))
        object.__setattr__(self, "n_points", int(self.n_points))
        nodes = np.linspace(0.0, self.length, self.n_points)
        nodes.setflags(write=False)
        object.__setattr__(self, "nodes", nodes)

    @property
    def spacing(self) -> float:
        return self.length / (self.n_points - 1)

    h = spacing

    def weights(self) -> np.ndarray:
        """Composite trapezoid weights on one edge."""
        w = np.full(self.n_points, self.spacing)
        w[0] = w[-1] = 0.5 * self.spacing
        return w


def build_grid(length: float, n_points: int) -> EdgeGrid:
    return EdgeGrid(length, n_points)


@dataclass(frozen=True)
class GraphField:
    """Per-edge samples of a real function on the truncated graph."""

    grid: EdgeGrid
    values: np.ndarray

    def __post_init__(self):
        vals = np.array(self.values, dtype=float)
        if vals.shape != (N_EDGES, self.grid.n_points):
            raise GridMismatchError(
                f"field shape {vals.shape} does not match grid (3, {self.grid.n_points})"
            )
        bad = np.argwhere(~np.isfinite(vals))
        if bad.size:
            j, i = bad[0]
            raise FloatingPointError(
                f"non-finite value on edge {j + 1} at node {i} (x={self.grid.nodes[i]:.6g})"
            )
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)

    @classmethod
    def zeros(cls, grid: EdgeGrid) -> "GraphField":
        return cls(grid, np.zeros((N_EDGES, grid.n_points)))

    def flat(self) -> np.ndarray:
        return self.values.reshape(-1)

    def _check(self, other: "GraphField"):
        if self.grid != other.grid:
            raise GridMismatchError(f"grid mismatch: {self.grid} vs {other.grid}")

    def __add__(self, other: "GraphField") -> "GraphField":
        self._check(other)
        return GraphField(self.grid, self.values + other.values)

    def __sub__(self, other: "GraphField") -> "GraphField":
        self._check(other)
        return GraphField(self.grid, self.values - other.values)

    def __mul__(self, a: float) -> "GraphField":
        return GraphField(self.grid, a * self.values)

    __rmul__ = __mul__

    def norm(self) -> float:
        return float(np.sqrt(inner_product(self, self)))


def sample(f: Sequence[Callable[[np.ndarray], np.ndarray]] | Callable, grid: EdgeGrid) -> GraphField:
    """Evaluate ``f`` at the grid nodes of each edge.

    ``f`` is either a sequence of three callables or a single callable
    ``f(j, x)`` taking the 0-based edge index.
    """
    x = grid.nodes
    if callable(f):
        rows = [np.broadcast_to(np.asarray(f(j, x), dtype=float), x.shape) for j in range(N_EDGES)]
    else:
        if len(f) != N_EDGES:
            raise ValueError(f"need one function per edge, got {len(f)}")
        rows = [np.broadcast_to(np.asarray(fj(x), dtype=float), x.shape) for fj in f]
    return GraphField(grid, np.vstack(rows))


def inner_product(u: GraphField, v: GraphField) -> float:
    """Trapezoid approximation of sum_j int_0^L u_j v_j dx."""
    u._check(v)
    w = u.grid.weights()
    return float(np.sum(u.values * v.values * w))


@dataclass(frozen=True)
class VertexTrace:
    values_at_zero: np.ndarray
    derivatives_at_zero: np.ndarray


def vertex_trace(u: GraphField) -> VertexTrace:
    """Vertex values and one-sided second-order derivatives (-3u0 + 4u1 - u2) / 2h."""
    v = u.values
    h = u.grid.spacing
    d = (-3.0 * v[:, 0] + 4.0 * v[:, 1] - v[:, 2]) / (2.0 * h)
    return VertexTrace(v[:, 0].copy(), d)


def bc_residual(u: GraphField, spec: YGraphSpec) -> tuple[float, float, float]:
    """Residuals of the delta' vertex conditions.

    r1 = c1 u1' - c2 u2', r2 = c2 u2' - c3 u3', r3 = sum c_j u_j - lam c1 u1'.
    For ``lam == 0`` r3 is the Kirchhoff constraint violation.
    """
    tr = vertex_trace(u)
    c = spec.c
    flux = c * tr.derivatives_at_zero
    r1 = flux[0] - flux[1]
    r2 = flux[1] - flux[2]
    r3 = float(np.dot(c, tr.values_at_zero)) - spec.lam * flux[0]
    return float(r1), float(r2), float(r3)


def field_to_csv(u: GraphField, columns: tuple[str, str, str] = ("edge_index", "x", "value")) -> str:
    """Serialize as CSV rows (edge_index, x, value), edges numbered 1..3, 17 significant digits."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    x = u.grid.nodes
    for j in range(N_EDGES):
        for xi, val in zip(x, u.values[j]):
            w.writerow((j + 1, f"{xi:.17g}", f"{val:.17g}"))
    return buf.getvalue()


def field_from_csv(text: str) -> GraphField:
    rows = list(csv.reader(io.StringIO(text)))
    if not rows or rows[0][:3] != ["edge_index", "x", "value"]:
        raise ValueError("missing header row 'edge_index,x,value'")
    data = np.array([[float(t) for t in r[:3]] for r in rows[1:] if r], dtype=float)
    n = len(data) // N_EDGES
    if n * N_EDGES != len(data):
        raise ValueError("row count is not a multiple of 3")
    x = data[:n, 1]
    grid = EdgeGrid(float(x[-1]), n)
    if not np.allclose(grid.nodes, x, rtol=0, atol=1e-12 * max(1.0, grid.length)):
        raise ValueError("x column is not a uniform grid starting at 0")
    vals = np.empty((N_EDGES, n))
    for j in range(N_EDGES):
        block = data[j * n:(j + 1) * n]
        if not np.all(block[:, 0] == j + 1):
            raise ValueError(f"edge block {j + 1} is not contiguous")
        vals[j] = block[:, 2]
    return GraphField(grid, vals)
