"""Stationary kink and anti-kink/kink profiles on the tricrystal junction.

Kink (all edges decay to 0):

    phi_j(x) = 4 arctan(exp(-(x - b_j) / c_j)),   b_j / c_j = b_1 / c_1

Anti-kink/kink (edge 1 climbs to 2*pi, edges 2 and 3 rise to 0):

    phi_1(x) = 4 arctan(exp((x - a_1) / c_1))
    phi_j(x) = 4 arctan(exp((x - a_j) / c_j)) - 2*pi,   a_j / c_j = a_1 / c_1

The common shift is fixed by the vertex rule sum_j c_j phi_j(0) = lam c_1 phi_1'(0),
which reduces to one scalar monotone equation in y = exp(b_1/c_1) (kink) or
y = exp(-a_1/c_1) (anti-kink).  Edges are indexed 0, 1, 2 throughout.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

from .graph import EdgeGrid, GraphField, YGraphSpec, sample

ROOT_TOL = 1e-12
THRESHOLD_TOL = 1e-12
TWO_PI = 2.0 * math.pi


class OutOfRangeError(ValueError):
    """Vertex parameter outside the existence range of a profile family."""


class Kind(str, enum.Enum):
    KINK = "kink"
    ANTIKINK = "antikink"


class Shape(str, enum.Enum):
    BUMP = "bump"
    TAIL = "tail"
    FLAT = "flat"


def kink_g(y):
    """g(y) = (1 + y^2) arctan(y) / y, increasing from 1 (y -> 0) to infinity."""
    y = np.asarray(y, dtype=float)
    return (1.0 + y * y) * np.arctan(y) / y


def antikink_F(y, speeds):
    """F(y) = (1 + y^2)/y * [(c1+c2+c3) arctan(y) - (c2+c3) pi/2], increasing onto R."""
    c1, c2, c3 = speeds
    y = np.asarray(y, dtype=float)
    return (1.0 + y * y) / y * ((c1 + c2 + c3) * np.arctan(y) - 0.5 * (c2 + c3) * math.pi)


def _solve_increasing(f, target: float, what: str) -> float:
    """Root of an increasing f(y) = target on (0, inf), bracketed from y = 1."""
    lo = hi = 1.0
    if f(1.0) > target:
        for _ in range(2000):
            lo *= 0.5
            if f(lo) <= target:
                break
        else:
            raise OutOfRangeError(f"{what}: could not bracket root below y=1 (target {target!r})")
    else:
        for _ in range(2000):
            hi *= 2.0
            if f(hi) >= target:
                break
        else:
            raise OutOfRangeError(f"{what}: could not bracket root above y=1 (target {target!r})")
    if f(lo) == target:
        return lo
    if f(hi) == target:
        return hi
    return brentq(lambda y: f(y) - target, lo, hi, xtol=1e-300, rtol=4 * np.finfo(float).eps, maxiter=500)


def kink_root(spec: YGraphSpec) -> float:
    """Positive root y* of g(y) = -lam / (c1 + c2 + c3)."""
    s = spec.speed_sum()
    if not spec.lam < -s:
        raise OutOfRangeError(
            f"kink profiles exist only for lambda in (-inf, -(c1+c2+c3)) = (-inf, {-s:g}); got {spec.lam:g}"
        )
    return _solve_increasing(lambda y: float(kink_g(y)), -spec.lam / s, "kink shift")


def kink_shift(spec: YGraphSpec) -> float:
    """Shift b_1 = c_1 ln y* of the continuous kink profile."""
    return spec.speeds[0] * math.log(kink_root(spec))


def antikink_root(spec: YGraphSpec) -> float:
    return _solve_increasing(lambda y: float(antikink_F(y, spec.speeds)), spec.lam, "anti-kink shift")


def antikink_shift(spec: YGraphSpec) -> float:
    """Shift a_1 = -c_1 ln y* with F(y*) = lam."""
    return -spec.speeds[0] * math.log(antikink_root(spec))


def kink_threshold(spec: YGraphSpec) -> float:
    return -0.5 * math.pi * spec.speed_sum()


def antikink_threshold(spec: YGraphSpec) -> float:
    c1, c2, c3 = spec.speeds
    return -0.5 * math.pi * (c2 + c3 - c1)


def _shape_from_threshold(lam: float, threshold: float, below: Shape, above: Shape) -> Shape:
    if abs(lam - threshold) <= THRESHOLD_TOL:
        return Shape.FLAT
    return below if lam < threshold else above


def classify_kink(spec: YGraphSpec) -> Shape:
    s = spec.speed_sum()
    if not spec.lam < -s:
        raise OutOfRangeError(
            f"kink profiles exist only for lambda in (-inf, {-s:g}); got {spec.lam:g}"
        )
    return _shape_from_threshold(spec.lam, kink_threshold(spec), Shape.BUMP, Shape.TAIL)


def classify_antikink(spec: YGraphSpec) -> Shape:
    return _shape_from_threshold(spec.lam, antikink_threshold(spec), Shape.BUMP, Shape.TAIL)


def _sech(z):
    e = np.exp(-np.abs(z))
    return 2.0 * e / (1.0 + e * e)


def _four_arctan_exp(z):
    """4 arctan(exp(z)) without overflow and with full precision near 2*pi."""
    z = np.asarray(z, dtype=float)
    out = np.empty_like(z)
    neg = z <= 0
    out[neg] = 4.0 * np.arctan(np.exp(z[neg]))
    out[~neg] = TWO_PI - 4.0 * np.arctan(np.exp(-z[~neg]))
    return out


@dataclass(frozen=True)
class ProfileFamily:
    """A stationary solution: kind, junction data, per-edge shifts and shape."""

    kind: Kind
    spec: YGraphSpec
    shifts: tuple[float, float, float]
    shape: Shape

    def eval(self, j: int, x, order: int = 0) -> np.ndarray:
        if self.kind is Kind.KINK:
            return kink_eval(self, j, x, order)
        return antikink_eval(self, j, x, order)

    def sample(self, grid: EdgeGrid, order: int = 0) -> GraphField:
        return sample(lambda j, x: self.eval(j, x, order), grid)

    def asymptotes(self) -> np.ndarray:
        """Limits of phi_j at x -> +inf."""
        if self.kind is Kind.KINK:
            return np.zeros(3)
        return np.array([TWO_PI, 0.0, 0.0])

    def is_threshold(self) -> bool:
        return self.shape is Shape.FLAT


def kink_family(spec: YGraphSpec) -> ProfileFamily:
    b1 = kink_shift(spec)
    c = spec.speeds
    shifts = tuple(cj / c[0] * b1 for cj in c)
    return ProfileFamily(Kind.KINK, spec, shifts, classify_kink(spec))


def antikink_family(spec: YGraphSpec) -> ProfileFamily:
    a1 = antikink_shift(spec)
    c = spec.speeds
    shifts = tuple(cj / c[0] * a1 for cj in c)
    return ProfileFamily(Kind.ANTIKINK, spec, shifts, classify_antikink(spec))


def make_family(kind: Kind | str, spec: YGraphSpec) -> ProfileFamily:
    kind = Kind(kind)
    return kink_family(spec) if kind is Kind.KINK else antikink_family(spec)


def kink_eval(fam: ProfileFamily, j: int, x, order: int = 0) -> np.ndarray:
    c = fam.spec.speeds[j]
    z = (np.asarray(x, dtype=float) - fam.shifts[j]) / c
    if order == 0:
        return _four_arctan_exp(-z)
    if order == 1:
        return -2.0 / c * _sech(z)
    if order == 2:
        return 2.0 / c**2 * _sech(z) * np.tanh(z)
    raise ValueError(f"order must be 0, 1 or 2, got {order}")


def antikink_eval(fam: ProfileFamily, j: int, x, order: int = 0) -> np.ndarray:
    c = fam.spec.speeds[j]
    z = (np.asarray(x, dtype=float) - fam.shifts[j]) / c
    if order == 0:
        if j == 0:
            return _four_arctan_exp(z)
        # 4 arctan(e^z) - 2 pi == -4 arctan(e^-z), exact form avoids cancellation
        return -_four_arctan_exp(-z)
    if order == 1:
        return 2.0 / c * _sech(z)
    if order == 2:
        return -2.0 / c**2 * _sech(z) * np.tanh(z)
    raise ValueError(f"order must be 0, 1 or 2, got {order}")


def stationary_residual(fam: ProfileFamily, x) -> np.ndarray:
    """max_j |-c_j^2 phi_j'' + sin(phi_j)| pointwise, shape (3, len(x))."""
    x = np.asarray(x, dtype=float)
    rows = []
    for j, c in enumerate(fam.spec.speeds):
        rows.append(-(c**2) * fam.eval(j, x, 2) + np.sin(fam.eval(j, x, 0)))
    return np.abs(np.vstack(rows))


def vertex_identity_residual(fam: ProfileFamily) -> tuple[float, float]:
    """Exact-trace residuals of the vertex rule (flux spread, Kirchhoff-lambda line)."""
    c = fam.spec.c
    phi0 = np.array([fam.eval(j, 0.0, 0) for j in range(3)], dtype=float).ravel()
    dphi0 = np.array([fam.eval(j, 0.0, 1) for j in range(3)], dtype=float).ravel()
    flux = c * dphi0
    spread = float(flux.max() - flux.min())
    return spread, float(np.dot(c, phi0) - fam.spec.lam * flux[0])
