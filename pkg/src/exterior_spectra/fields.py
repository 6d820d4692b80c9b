"""Potentials, coefficient matrices and the pointwise ordering checks between them.

All evaluators are vectorised: they accept a single point of shape ``(2,)`` or
an array of points of shape ``(n, 2)``.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

ORDERING_TOL = 1e-12


class OrderingError(ValueError):
    """A declared strict-ordering ball fails its strictness check."""

    def __init__(self, message: str, point=None):
        super().__init__(message)
        self.point = point


def _as_points(x):
    pts = np.asarray(x, dtype=float)
    return pts.reshape(-1, 2), pts.ndim == 1


def _radii(x):
    pts, scalar = _as_points(x)
    return np.hypot(pts[:, 0], pts[:, 1]), scalar


def _finish(values, scalar):
    return float(values[0]) if scalar else values


class Potential:
    """Base class; subclasses implement ``values(points)``."""

    radial = False

    def values(self, pts: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def __call__(self, x):
        pts, scalar = _as_points(x)
        return _finish(self.values(pts), scalar)

    def __add__(self, other):
        if isinstance(other, (int, float)):
            other = ConstantPotential(float(other))
        return PotentialSum((self, other))

    __radd__ = __add__

    def breakpoints(self) -> tuple[float, ...]:
        """Radii where a radial potential jumps (used for exact cell averaging)."""
        return ()

    def of_radius(self, r):
        if not self.radial:
            raise TypeError(f"{self!r} is not radially symmetric")
        r = np.asarray(r, dtype=float)
        pts = np.stack([r.ravel(), np.zeros(r.size)], axis=1)
        return self.values(pts).reshape(r.shape)


@dataclass(frozen=True)
class ZeroPotential(Potential):
    radial = True

    def values(self, pts):
        return np.zeros(len(pts))


@dataclass(frozen=True)
class ConstantPotential(Potential):
    value: float
    radial = True

    def values(self, pts):
        return np.full(len(pts), float(self.value))


@dataclass(frozen=True)
class RadialPower(Potential):
    """``-alpha * r**(eps - 2)`` outside ``cutoff``, held constant inside it."""

    alpha: float
    eps: float
    cutoff: float = 0.0
    radial = True

    def __post_init__(self):
        if self.alpha <= 0 or self.eps <= 0 or self.cutoff < 0:
            raise ValueError("radial_power needs alpha > 0, eps > 0, cutoff >= 0")

    def values(self, pts):
        r = np.hypot(pts[:, 0], pts[:, 1])
        if self.cutoff > 0:
            r = np.maximum(r, self.cutoff)
        return -self.alpha * r ** (self.eps - 2.0)

    def capped_at(self, radius: float) -> "RadialPower":
        return RadialPower(self.alpha, self.eps, max(self.cutoff, radius))


@dataclass(frozen=True)
class RadialWell(Potential):
    """``-depth`` on the annulus ``inner <= r <= outer``, zero elsewhere."""

    depth: float
    inner: float
    outer: float
    radial = True

    def __post_init__(self):
        if self.depth <= 0 or not 0 <= self.inner < self.outer:
            raise ValueError("radial_well needs depth > 0 and 0 <= inner < outer")

    def values(self, pts):
        r = np.hypot(pts[:, 0], pts[:, 1])
        inside = (r >= self.inner) & (r <= self.outer)
        return np.where(inside, -self.depth, 0.0)

    def breakpoints(self):
        return (self.inner, self.outer)


@dataclass(frozen=True)
class BallBump(Potential):
    """``height`` times the indicator of the open ball ``|x - center| < radius``."""

    center: tuple[float, float]
    radius: float
    height: float

    def __post_init__(self):
        if self.radius <= 0:
            raise ValueError("ball_bump radius must be positive")
        object.__setattr__(self, "center", tuple(float(c) for c in self.center))

    def values(self, pts):
        d = np.hypot(pts[:, 0] - self.center[0], pts[:, 1] - self.center[1])
        return np.where(d < self.radius, float(self.height), 0.0)


@dataclass(frozen=True)
class PotentialSum(Potential):
    terms: tuple[Potential, ...]

    @property
    def radial(self):
        return all(t.radial for t in self.terms)

    def values(self, pts):
        out = np.zeros(len(pts))
        for t in self.terms:
            out = out + t.values(pts)
        return out

    def breakpoints(self):
        return tuple(sorted({b for t in self.terms for b in t.breakpoints()}))

    def __add__(self, other):
        if isinstance(other, (int, float)):
            other = ConstantPotential(float(other))
        return PotentialSum(self.terms + (other,))


def evaluate_potential(spec: Potential, x):
    return spec(x)


def check_bounded(spec: Potential, points) -> float:
    """Return ``max |V|`` over ``points``; raise if any value is not finite."""
    vals = spec(np.asarray(points, dtype=float).reshape(-1, 2))
    if not np.all(np.isfinite(vals)):
        raise ValueError(f"potential {spec!r} is not finite at every sample point")
    return float(np.max(np.abs(vals))) if len(vals) else 0.0


# ---------------------------------------------------------------------------
# second-order coefficients


_PROBES = np.array([[1.0, 0.0], [0.0, 1.0], [1 / np.sqrt(2), 1 / np.sqrt(2)],
                    [1 / np.sqrt(2), -1 / np.sqrt(2)]])


class CoefficientField:
    """Symmetric 2x2 matrix field ``a(x)``; subclasses implement ``matrices``."""

    def matrices(self, pts: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def __call__(self, x):
        pts, scalar = _as_points(x)
        a = self.matrices(pts)
        return a[0] if scalar else a

    @property
    def ellipticity_constant(self) -> float:
        raise NotImplementedError

    def check(self, points) -> None:
        """Assert symmetry and the ellipticity bound on the probe directions."""
        a = self.matrices(np.asarray(points, dtype=float).reshape(-1, 2))
        if not np.array_equal(a[:, 0, 1], a[:, 1, 0]):
            raise ValueError("coefficient field is not symmetric")
        quad = np.einsum("pi,nij,pj->np", _PROBES, a, _PROBES)
        if np.any(quad < self.ellipticity_constant * (1 - 1e-12)):
            raise ValueError("coefficient field violates its ellipticity constant")


@dataclass(frozen=True)
class ConstantCoefficient(CoefficientField):
    a11: float = 1.0
    a12: float = 0.0
    a22: float = 1.0

    def __post_init__(self):
        if self.a11 <= 0 or self.a11 * self.a22 - self.a12 ** 2 <= 0:
            raise ValueError("constant coefficient matrix is not positive definite")

    @property
    def base(self) -> np.ndarray:
        return np.array([[self.a11, self.a12], [self.a12, self.a22]])

    def matrices(self, pts):
        return np.broadcast_to(self.base, (len(pts), 2, 2)).copy()

    @property
    def ellipticity_constant(self):
        return float(np.linalg.eigvalsh(self.base)[0])


def identity() -> ConstantCoefficient:
    return ConstantCoefficient()


@dataclass(frozen=True)
class BallScaledCoefficient(CoefficientField):
    """``(1 + height * chi_ball(x)) * base``."""

    base: ConstantCoefficient
    center: tuple[float, float]
    radius: float
    height: float

    def __post_init__(self):
        if self.radius <= 0 or self.height <= -1:
            raise ValueError("ball scaling needs radius > 0 and height > -1")
        object.__setattr__(self, "center", tuple(float(c) for c in self.center))

    def matrices(self, pts):
        d = np.hypot(pts[:, 0] - self.center[0], pts[:, 1] - self.center[1])
        scale = np.where(d < self.radius, 1.0 + self.height, 1.0)
        return scale[:, None, None] * self.base.base

    @property
    def ellipticity_constant(self):
        return self.base.ellipticity_constant * min(1.0, 1.0 + self.height)


@dataclass(frozen=True)
class EllipticFields:
    """Coefficient matrix plus zeroth-order term: ``-div(a grad u) + V u``."""

    coefficient: CoefficientField = field(default_factory=identity)
    potential: Potential = field(default_factory=ZeroPotential)


# ---------------------------------------------------------------------------
# ordering


@dataclass(frozen=True)
class OrderingWitness:
    pointwise_psd: bool
    pointwise_scalar: bool
    strict_ball: tuple[tuple[float, float], float] | None = None
    strict_condition: str | None = None  # "a", "b" or "ab"
    n_points: int = 0
    n_ball_points: int = 0


def _difference(f1: EllipticFields, f2: EllipticFields, pts):
    a1 = f1.coefficient.matrices(pts)
    a2 = f2.coefficient.matrices(pts)
    v1 = f1.potential.values(pts)
    v2 = f2.potential.values(pts)
    dm = a2 - a1
    dv = v2 - v1
    mat_scale = 1.0 + np.maximum(np.abs(a1).max(axis=(1, 2)), np.abs(a2).max(axis=(1, 2)))
    pot_scale = 1.0 + np.maximum(np.abs(v1), np.abs(v2))
    return dm, dv, mat_scale, pot_scale


def check_ordering(f1: EllipticFields, f2: EllipticFields, quad_points,
                   strict_ball=None, tol: float = ORDERING_TOL) -> OrderingWitness:
    """Check ``a1 <= a2`` (as matrices) and ``V1 <= V2`` at the quadrature points.

    ``strict_ball`` is an optional ``(center, radius)``; when given, every
    quadrature point inside it must satisfy ``V2 - V1 > tol`` (condition a) or
    ``a2 - a1`` positive definite (condition b). A failing point raises
    :class:`OrderingError`.
    """
    pts = np.asarray(quad_points, dtype=float).reshape(-1, 2)
    dm, dv, ms, ps = _difference(f1, f2, pts)
    tr = dm[:, 0, 0] + dm[:, 1, 1]
    det = dm[:, 0, 0] * dm[:, 1, 1] - dm[:, 0, 1] * dm[:, 1, 0]
    psd = bool(np.all(tr >= -tol * ms) and np.all(det >= -tol * ms ** 2))
    scalar = bool(np.all(dv >= -tol * ps))

    if strict_ball is None:
        return OrderingWitness(psd, scalar, n_points=len(pts))

    center, radius = strict_ball
    center = (float(center[0]), float(center[1]))
    inside = np.hypot(pts[:, 0] - center[0], pts[:, 1] - center[1]) < radius
    if not inside.any():
        raise OrderingError(f"no quadrature point lies inside the ball {center}, r={radius}")
    cond_a = dv > tol * ps
    cond_b = (tr > tol * ms) & (det > tol * ms ** 2)
    ok = cond_a | cond_b
    bad = np.flatnonzero(inside & ~ok)
    if bad.size:
        p = pts[bad[0]]
        raise OrderingError(f"strict ordering fails inside the declared ball at x={tuple(p)}",
                            point=tuple(p))
    which = ("a" if np.all(cond_a[inside]) else "") + ("b" if np.all(cond_b[inside]) else "")
    return OrderingWitness(psd, scalar, (center, float(radius)), which or "mixed",
                           len(pts), int(inside.sum()))
