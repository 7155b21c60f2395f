"""Linearized operators on the Y-junction and their low-lying spectrum.

The operators -c_j^2 d^2/dx^2 + V_j(x) with delta' vertex conditions are
discretized through their quadratic form

    Q(u) = (1/lam) (sum_j c_j u_j(0))^2 + sum_j int c_j^2 (u_j')^2 + V_j u_j^2 dx

using P1 elements on each edge.  The vertex conditions are natural for this
form, so the stiffness matrix is symmetric by construction; the only coupling
between edges is the rank-one term (1/lam) w w^T with w = (c_1, c_2, c_3) at
the three x = 0 nodes.  The far end x = L is pinned to zero.  For lam = 0 the
rank-one term is replaced by the constraint sum_j c_j u_j(0) = 0.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import NamedTuple, Optional

import numpy as np
import scipy.linalg
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .graph import N_EDGES, EdgeGrid, GraphField, GridMismatchError, YGraphSpec
from .profiles import Kind, OutOfRangeError, ProfileFamily, Shape

DENSE_MAX_DOF = 600
RESIDUAL_RTOL = 1e-8
FAR_FIELD_FRACTION = 0.25


class InconclusiveSpectrumError(RuntimeError):
    """Too few eigenpairs were computed to count negative and zero eigenvalues."""


class Potential(str, enum.Enum):
    FREE = "free"
    KINK_COS = "kink"
    ANTIKINK_COS = "antikink"


@dataclass(frozen=True)
class OperatorSpec:
    potential: Potential
    spec: YGraphSpec
    grid: EdgeGrid
    family: Optional[ProfileFamily] = None
    restricted: bool = False

    def __post_init__(self):
        object.__setattr__(self, "potential", Potential(self.potential))
        if self.potential is not Potential.FREE:
            if self.family is None:
                raise ValueError(f"{self.potential.value} potential needs a profile family")
            expected = Kind.KINK if self.potential is Potential.KINK_COS else Kind.ANTIKINK
            if self.family.kind is not expected:
                raise ValueError(f"family kind {self.family.kind.value} does not match potential")
            if self.family.spec != self.spec:
                raise ValueError("family was built for a different junction")
        if self.restricted and not self.spec.equal_speeds:
            raise ValueError("restricted (symmetric-subspace) operator requires c1 = c2 = c3")

    @classmethod
    def free(cls, spec: YGraphSpec, grid: EdgeGrid, restricted: bool = False) -> "OperatorSpec":
        return cls(Potential.FREE, spec, grid, None, restricted)

    @classmethod
    def linearized(cls, fam: ProfileFamily, grid: EdgeGrid, restricted: bool = False) -> "OperatorSpec":
        pot = Potential.KINK_COS if fam.kind is Kind.KINK else Potential.ANTIKINK_COS
        return cls(pot, fam.spec, grid, fam, restricted)

    def potential_samples(self) -> np.ndarray:
        """cos(phi_j) at the grid nodes, shape (3, n); zeros for the free operator."""
        x = self.grid.nodes
        if self.family is None:
            return np.zeros((N_EDGES, x.size))
        return np.vstack([np.cos(self.family.eval(j, x, 0)) for j in range(N_EDGES)])


@dataclass(frozen=True, eq=False)
class AssembledOperator:
    """Stiffness/mass pair in reduced coordinates z, with full nodal vector u = basis @ z.

    Full vectors are ordered edge-major (edge j, node i) -> j*n + i; restricted
    operators carry one edge only.
    """

    opspec: OperatorSpec
    stiffness: sp.csr_matrix
    mass: sp.csr_matrix
    basis: sp.csr_matrix
    vertex_coef: Optional[float]
    trace_vector: np.ndarray
    full_stiffness: sp.csr_matrix = field(repr=False)

    @property
    def grid(self) -> EdgeGrid:
        return self.opspec.grid

    @property
    def n_dof(self) -> int:
        return self.stiffness.shape[0]

    @property
    def n_edges(self) -> int:
        return 1 if self.opspec.restricted else N_EDGES

    def restrict(self, u: GraphField) -> np.ndarray:
        if u.grid != self.grid:
            raise GridMismatchError("field and operator live on different grids")
        full = u.values[0] if self.opspec.restricted else u.flat()
        return self.basis.T @ full

    def prolong(self, z: np.ndarray) -> GraphField:
        full = self.basis @ z
        if self.opspec.restricted:
            return GraphField(self.grid, np.tile(full, (N_EDGES, 1)))
        return GraphField(self.grid, full.reshape(N_EDGES, -1))


def _edge_blocks(c: float, v: np.ndarray, h: float):
    """P1 stiffness c^2 int u'w' + int V u w (V linear per element) and consistent mass."""
    n = v.size
    kd = np.zeros(n)
    kd[:-1] += 1.0
    kd[1:] += 1.0
    ko = -np.ones(n - 1)
    pd = np.zeros(n)
    pd[:-1] += h * (3.0 * v[:-1] + v[1:]) / 12.0
    pd[1:] += h * (v[:-1] + 3.0 * v[1:]) / 12.0
    po = h * (v[:-1] + v[1:]) / 12.0
    stiff = sp.diags([c * c / h * kd + pd, c * c / h * ko + po, c * c / h * ko + po], [0, 1, -1])
    md = np.zeros(n)
    md[:-1] += h / 3.0
    md[1:] += h / 3.0
    mo = np.full(n - 1, h / 6.0)
    mass = sp.diags([md, mo, mo], [0, 1, -1])
    return stiff, mass


def kirchhoff_basis(speeds) -> np.ndarray:
    """Orthonormal 3x2 basis of the plane sum_j c_j u_j(0) = 0."""
    c = np.asarray(speeds, dtype=float)
    w = c / np.linalg.norm(c)
    z1 = np.array([c[1], -c[0], 0.0])
    z1 /= np.linalg.norm(z1)
    z2 = np.cross(w, z1)
    z2 /= np.linalg.norm(z2)
    return np.column_stack([z1, z2])


def assemble(opspec: OperatorSpec) -> AssembledOperator:
    grid, spec = opspec.grid, opspec.spec
    n, h = grid.n_points, grid.spacing
    c = spec.c
    pot = opspec.potential_samples()
    kirchhoff = spec.kirchhoff

    if opspec.restricted:
        cc = c[0]
        stiff, mass = _edge_blocks(cc, pot[0], h)
        stiff = stiff.tolil()
        if not kirchhoff:
            # (1/lam)(3 c w(0))^2 spread over the three identical edges
            stiff[0, 0] += 3.0 * cc * cc / spec.lam
        full_k = stiff.tocsr()
        keep = np.arange(1 if kirchhoff else 0, n - 1)
        basis = sp.csr_matrix((np.ones(keep.size), (keep, np.arange(keep.size))), shape=(n, keep.size))
        trace = np.array([3.0 * cc])
    else:
        blocks = [_edge_blocks(c[j], pot[j], h) for j in range(N_EDGES)]
        full_k = sp.block_diag([b[0] for b in blocks], format="csr")
        mass = sp.block_diag([b[1] for b in blocks], format="csr")
        vidx = np.arange(N_EDGES) * n
        if not kirchhoff:
            r, q = np.meshgrid(vidx, vidx, indexing="ij")
            vertex = sp.csr_matrix((np.outer(c, c).ravel() / spec.lam, (r.ravel(), q.ravel())), shape=full_k.shape)
            full_k = (full_k + vertex).tocsr()
        interior = np.array([j * n + i for j in range(N_EDGES) for i in range(1, n - 1)])
        if kirchhoff:
            zb = kirchhoff_basis(c)
            rows = np.concatenate([interior, np.repeat(vidx, 2)])
            cols = np.concatenate([np.arange(interior.size), np.tile(interior.size + np.arange(2), N_EDGES)])
            vals = np.concatenate([np.ones(interior.size), zb.ravel()])
            basis = sp.csr_matrix((vals, (rows, cols)), shape=(N_EDGES * n, interior.size + 2))
        else:
            keep = np.sort(np.concatenate([vidx, interior]))
            basis = sp.csr_matrix((np.ones(keep.size), (keep, np.arange(keep.size))), shape=(N_EDGES * n, keep.size))
        trace = c.copy()

    k_red = (basis.T @ full_k @ basis).tocsr()
    m_red = (basis.T @ mass @ basis).tocsr()
    # exact symmetry: average away round-off from the triple product
    k_red = ((k_red + k_red.T) * 0.5).tocsr()
    m_red = ((m_red + m_red.T) * 0.5).tocsr()
    return AssembledOperator(
        opspec=opspec,
        stiffness=k_red,
        mass=m_red,
        basis=basis,
        vertex_coef=None if kirchhoff else 1.0 / spec.lam,
        trace_vector=trace,
        full_stiffness=full_k,
    )


def potential_floor(opspec: OperatorSpec) -> float:
    """Lower bound of the form without its vertex term (min of the potential)."""
    return 0.0 if opspec.potential is Potential.FREE else -1.0


def spectrum_lower_bound(opspec: OperatorSpec) -> float:
    """Lower bound for the spectrum (valid for the discrete problem too, by Rayleigh-Ritz)."""
    lam = opspec.spec.lam
    bound = potential_floor(opspec)
    if lam < 0.0:
        bound -= (opspec.spec.speed_sum() / lam) ** 2
    return bound


DEEP_SHIFT_GAP = 10.0


def _solve_sparse_split(K, M, k: int, opspec: OperatorSpec):
    """Shift-invert solve that stays fast when a deep vertex state exists.

    The vertex term has rank one, so at most one eigenvalue lies below the
    potential floor.  When that state can be far below the rest (lam -> 0-),
    a single shift under it leaves the others in a tight relative cluster and
    the iteration stalls.  It is then found on its own and the remaining k-1
    eigenpairs come from a shift just under the floor.
    """
    lo = spectrum_lower_bound(opspec) - 0.5
    floor = potential_floor(opspec) - 0.5
    if floor - lo <= DEEP_SHIFT_GAP:
        return _solve_sparse(K, M, k, lo)
    v_deep, x_deep = _solve_sparse(K, M, 1, lo)
    if v_deep[0] >= floor + 0.5 or k == 1:
        if k == 1:
            return v_deep, x_deep
        return _solve_sparse(K, M, k, floor)
    vals, vecs = _solve_sparse(K, M, k - 1, floor)
    return np.concatenate([v_deep, vals]), np.column_stack([x_deep, vecs])


def default_kernel_tol(grid: EdgeGrid) -> float:
    return max(5e-3, 10.0 * grid.spacing**2)


@dataclass(frozen=True, eq=False)
class SpectrumReport:
    eigenvalues: np.ndarray
    eigenvectors: list
    morse_index: int
    kernel_dim: int
    continuum_floor_estimate: float
    kernel_tol: float
    residuals: np.ndarray
    far_fraction: np.ndarray

    @property
    def conclusive(self) -> bool:
        return bool(self.eigenvalues[-1] > self.kernel_tol)


def _fix_sign(v: np.ndarray) -> np.ndarray:
    i = int(np.argmax(np.abs(v)))
    return -v if v[i] < 0 else v


def _solve_sparse(K, M, k: int, sigma: float):
    v0 = np.ones(K.shape[0]) / math.sqrt(K.shape[0])
    last = None
    for attempt in range(4):
        try:
            return spla.eigsh(K, k=k, M=M, sigma=sigma, which="LM", v0=v0, tol=0.0)
        except (RuntimeError, spla.ArpackError) as exc:  # singular factorization or no convergence
            last = exc
            sigma -= 0.1 * (1.0 + abs(sigma)) * (attempt + 1)
    raise RuntimeError(f"shift-invert eigensolve failed after 3 shift perturbations: {last}")


def lowest_eigenpairs(op: AssembledOperator, k: int = 8, kernel_tol: Optional[float] = None) -> SpectrumReport:
    """k smallest eigenpairs of K v = nu M v, M-orthonormal, ascending."""
    if k < 1:
        raise ValueError("k must be >= 1")
    K, M = op.stiffness, op.mass
    N = K.shape[0]
    k = min(k, N - 1)
    if N <= DENSE_MAX_DOF:
        vals, vecs = scipy.linalg.eigh(K.toarray(), M.toarray(), subset_by_index=[0, k - 1])
    else:
        vals, vecs = _solve_sparse_split(K, M, k, op.opspec)
    order = np.argsort(vals)
    vals, vecs = vals[order], vecs[:, order]

    tol = default_kernel_tol(op.grid) if kernel_tol is None else float(kernel_tol)
    fields, resid, far = [], np.empty(k), np.empty(k)
    n = op.grid.n_points
    far_mask = op.grid.nodes >= 0.5 * op.grid.length
    for i in range(k):
        v = vecs[:, i]
        v = v / math.sqrt(float(v @ (M @ v)))
        v = _fix_sign(v)
        kv, mv = K @ v, M @ v
        # kernel vectors have |Kv| ~ |nu| |Mv| -> 0, so scale by the larger of the two
        resid[i] = np.linalg.norm(kv - vals[i] * mv) / max(np.linalg.norm(kv), np.linalg.norm(mv))
        f = op.prolong(v)
        dens = f.values**2
        far[i] = dens[:, far_mask].sum() / max(dens.sum(), 1e-300)
        fields.append(f)
    if np.any(resid > RESIDUAL_RTOL):
        raise RuntimeError(f"eigenpair residuals {resid.max():.3g} exceed {RESIDUAL_RTOL:g}")
    extended = vals[far >= FAR_FIELD_FRACTION]
    floor = float(extended.min()) if extended.size else float("nan")
    return SpectrumReport(
        eigenvalues=vals,
        eigenvectors=fields,
        morse_index=int(np.sum(vals < -tol)),
        kernel_dim=int(np.sum(np.abs(vals) <= tol)),
        continuum_floor_estimate=floor,
        kernel_tol=tol,
        residuals=resid,
        far_fraction=far,
    )


def morse_and_kernel(report: SpectrumReport) -> tuple[int, int]:
    if not report.conclusive:
        raise InconclusiveSpectrumError(
            f"largest computed eigenvalue {report.eigenvalues[-1]:.3g} <= kernel_tol "
            f"{report.kernel_tol:.3g}; recompute with larger k"
        )
    return report.morse_index, report.kernel_dim


def spectrum(opspec: OperatorSpec, k: int = 8, kernel_tol: Optional[float] = None) -> SpectrumReport:
    return lowest_eigenpairs(assemble(opspec), k, kernel_tol)


def quadratic_form(op: AssembledOperator, u: GraphField) -> float:
    """Discrete Q(u) = z^T K z, vertex term included.

    For restricted operators this is the per-edge scalar form of u_1 (one third
    of the full form on the symmetric subspace).  For lam = 0 the vertex values
    are first projected onto the Kirchhoff plane.
    """
    z = op.restrict(u)
    return float(z @ (op.stiffness @ z))


def mass_norm2(op: AssembledOperator, u: GraphField) -> float:
    z = op.restrict(u)
    return float(z @ (op.mass @ z))


def rayleigh_quotient(op: AssembledOperator, u: GraphField) -> float:
    return quadratic_form(op, u) / mass_norm2(op, u)


def analytic_kernel_vectors(fam: ProfileFamily, grid: EdgeGrid) -> tuple[GraphField, GraphField]:
    """Two fields spanning the kernel at the threshold lambda (flat profile)."""
    if fam.shape is not Shape.FLAT:
        raise OutOfRangeError(
            f"the kernel is trivial away from the threshold lambda; this {fam.kind.value} "
            f"has lambda={fam.spec.lam:g} ({fam.shape.value} profile)"
        )
    d = fam.sample(grid, order=1).values
    z = np.zeros_like(d[0])
    if fam.kind is Kind.KINK:
        rows = ([d[0], -d[1], z], [z, d[1], -d[2]])
    else:
        rows = ([-d[0], d[1], z], [-d[0], z, d[2]])
    return GraphField(grid, np.vstack(rows[0])), GraphField(grid, np.vstack(rows[1]))


def form_decomposition_P(fam: ProfileFamily, u: GraphField) -> tuple[float, float]:
    """Split sum_j int c_j^2 u_j'^2 + cos(phi_j) u_j^2 into A + P.

    A = sum_j int c_j^2 (phi_j')^2 [d/dx (u_j / phi_j')]^2 dx >= 0,
    P = -sum_j c_j^2 u_j(0)^2 phi_j''(0) / phi_j'(0).
    """
    if fam.kind is not Kind.KINK:
        raise ValueError("form decomposition is defined for the kink family")
    grid = u.grid
    x, h = grid.nodes, grid.spacing
    xm = 0.5 * (x[:-1] + x[1:])
    A = P = 0.0
    for j, c in enumerate(fam.spec.speeds):
        d = fam.eval(j, x, 1)
        if np.any(d == 0.0) or not np.all(np.isfinite(d)):
            raise FloatingPointError(f"phi'_{j + 1} vanishes on the grid; ratio u/phi' undefined")
        r = u.values[j] / d
        dm = fam.eval(j, xm, 1)
        A += c * c * float(np.sum(h * dm * dm * (np.diff(r) / h) ** 2))
        P -= c * c * u.values[j, 0] ** 2 * float(fam.eval(j, 0.0, 2)) / float(d[0])
    return A, P


def negativity_witness_kink(fam: ProfileFamily, grid: EdgeGrid) -> float:
    """<W Phi, Phi> = sum_j int (-sin phi_j + cos(phi_j) phi_j) phi_j dx, negative for tail/flat kinks."""
    if fam.kind is not Kind.KINK:
        raise ValueError("witness is defined for the kink family")
    if fam.shape is Shape.BUMP:
        raise OutOfRangeError("bump kinks exceed pi at the vertex; the pointwise bound x cos x <= sin x does not apply")
    phi = fam.sample(grid).values
    integrand = (-np.sin(phi) + np.cos(phi) * phi) * phi
    value = float(np.sum(integrand * grid.weights()))
    if not value < 0.0:
        raise RuntimeError(f"expected a negative direction, got <W Phi, Phi> = {value:.6g}")
    return value


class GrowingMode(NamedTuple):
    mu_plus: float
    mu_minus: float
    unstable: bool


def growing_mode_rate(report: SpectrumReport) -> GrowingMode:
    """Real eigenvalues +-sqrt(-nu_0) of J E from the most negative eigenvalue nu_0.

    J E (u, v) = (v, -L u), so J E Psi = mu Psi needs L u = -mu^2 u.
    """
    if report.morse_index == 0:
        return GrowingMode(0.0, 0.0, False)
    mu = math.sqrt(-float(report.eigenvalues[0]))
    return GrowingMode(mu, -mu, True)


def free_oracle(spec: YGraphSpec) -> Optional[float]:
    """Closed-form negative eigenvalue -(sum c_j / lam)^2 of the free operator (lam < 0)."""
    if spec.lam < 0:
        return -((spec.speed_sum() / spec.lam) ** 2)
    return None
