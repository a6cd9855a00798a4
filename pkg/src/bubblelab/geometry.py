"""Domains, boundary geometry and the regular part H of the Dirichlet Green's function.

Convention: G(x, y) = |x - y|^{2-n} - H(x, y), so H is the harmonic function of x
that equals |x - y|^{2-n} on the boundary.  For a ball H has the image-charge
closed form; for an annulus it is an alternating series of Kelvin images.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.interpolate import CubicHermiteSpline

from .errors import AccuracyError, ContractError, DegeneracyError, DomainError

_MEMBERSHIP_TOL = 1e-12


@dataclass(frozen=True)
class DomainSpec:
    """A ball of radius ``radius`` or an annulus ``inner < |x| < radius`` in R^dim."""

    kind: str
    dim: int
    radius: float = 1.0
    inner: float = 0.0

    def __post_init__(self):
        if self.kind not in ("ball", "annulus"):
            raise ContractError(f"domain kind must be 'ball' or 'annulus', got {self.kind!r}")
        if int(self.dim) != self.dim or self.dim < 3:
            raise ContractError("dim must be an integer >= 3")
        if self.radius <= 0:
            raise ContractError("radius must be positive")
        if self.kind == "annulus" and not (0 < self.inner < self.radius):
            raise ContractError("annulus needs 0 < inner < radius")
        if self.kind == "ball" and self.inner != 0.0:
            raise ContractError("a ball has no inner radius")

    @classmethod
    def ball(cls, dim, radius=1.0):
        return cls("ball", int(dim), float(radius))

    @classmethod
    def annulus(cls, dim, inner, radius=1.0):
        return cls("annulus", int(dim), float(radius), float(inner))

    @property
    def r_min(self):
        return self.inner if self.kind == "annulus" else 0.0

    @property
    def diameter(self):
        return 2.0 * self.radius

    def contains(self, x, tol=_MEMBERSHIP_TOL):
        r = np.linalg.norm(np.asarray(x, dtype=float), axis=-1)
        ok = r <= self.radius * (1 + tol)
        if self.kind == "annulus":
            ok &= r >= self.inner * (1 - tol)
        return ok

    def to_dict(self):
        d = {"kind": self.kind, "dim": self.dim, "radius": self.radius}
        if self.kind == "annulus":
            d["inner"] = self.inner
        return d


def _as_points(x, dim):
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != dim:
        raise DomainError(f"point dimension {x.shape[-1]} does not match domain dimension {dim}")
    return x


def dist_to_boundary(domain: DomainSpec, x):
    """Euclidean distance from x (array (..., n)) to the boundary."""
    x = _as_points(x, domain.dim)
    if not np.all(domain.contains(x)):
        raise DomainError("point outside the closed domain")
    r = np.linalg.norm(x, axis=-1)
    d = domain.radius - r
    if domain.kind == "annulus":
        d = np.minimum(d, r - domain.inner)
    d = np.maximum(d, 0.0)
    return float(d) if np.ndim(d) == 0 else d


def boundary_normal(domain: DomainSpec, x):
    """Outward unit normal at the boundary point nearest to x."""
    x = _as_points(x, domain.dim)
    if x.ndim != 1:
        raise ContractError("boundary_normal takes a single point")
    if not domain.contains(x):
        raise DomainError("point outside the closed domain")
    r = float(np.linalg.norm(x))
    if r < 1e-14 * domain.radius:
        raise DegeneracyError("nearest boundary point is not unique at the center")
    radial = x / r
    if domain.kind == "ball":
        return radial
    d_out = domain.radius - r
    d_in = r - domain.inner
    if abs(d_out - d_in) <= 1e-14 * domain.radius:
        raise DegeneracyError("point is equidistant from both boundary spheres")
    return radial if d_out < d_in else -radial


def _ball_H(R, n, x, y, want_gradient):
    m = 0.5 * (n - 2)
    xy = np.sum(x * y, axis=-1)
    xx = np.sum(x * x, axis=-1)
    yy = np.sum(y * y, axis=-1)
    q = R * R - 2.0 * xy + xx * yy / (R * R)
    h = q ** (-m)
    if not want_gradient:
        return h, None
    dq = 2.0 * x * (yy / (R * R))[..., None] - 2.0 * y
    grad = (-m * q ** (-m - 1))[..., None] * dq
    return h, grad


def _kelvin(q, z, rho, n):
    zz = float(np.dot(z, z))
    return q * (rho * rho / zz) ** (0.5 * (n - 2)), z * (rho * rho / zz)


def _annulus_H(r0, R, n, x, y, want_gradient, rel_tol=1e-12, max_terms=2000):
    x2 = x.reshape(-1, n)
    acc = np.zeros(x2.shape[0])
    grad = np.zeros_like(x2) if want_gradient else None
    bound = 0.0
    for first, second in ((R, r0), (r0, R)):
        q, z = _kelvin(1.0, y, first, n)
        sign = 1.0
        spheres = (second, first)
        k = 0
        while True:
            diff = x2 - z
            dist = np.linalg.norm(diff, axis=1)
            term = q * dist ** (2 - n)
            acc += sign * term
            if want_gradient:
                grad += (sign * q * (2 - n) * dist ** (-n))[:, None] * diff
            k += 1
            q, z = _kelvin(q, z, spheres[(k - 1) % 2], n)
            sign = -sign
            nxt = q * np.linalg.norm(x2 - z, axis=1) ** (2 - n)
            if np.all(nxt <= rel_tol * np.abs(acc)):
                bound += float(np.max(nxt))
                break
            if k > max_terms:
                raise AccuracyError("Kelvin reflection series did not converge", estimate=acc)
    shape = x.shape[:-1]
    h = acc.reshape(shape)
    g = grad.reshape(x.shape) if want_gradient else None
    return h, g, bound


def green_regular_part(domain: DomainSpec, x, y, want_gradient=False, return_bound=False):
    """Regular part H(x, y) and optionally its gradient in x.

    ``x`` may be an array of points (..., n); ``y`` is a single point.  For the
    annulus the alternating image series is truncated once the next term falls
    below 1e-12 of the accumulated value; since the series alternates with
    decreasing magnitude the next term bounds the truncation error, and it is
    returned when ``return_bound`` is set.
    """
    n = domain.dim
    x = _as_points(x, n)
    y = _as_points(y, n)
    if y.ndim != 1:
        raise ContractError("y must be a single point")
    if domain.kind == "ball":
        h, g = _ball_H(domain.radius, n, x, y, want_gradient)
        bound = 0.0
    else:
        if np.linalg.norm(y) <= domain.inner:
            raise DomainError("source point inside the hole of the annulus")
        h, g, bound = _annulus_H(domain.inner, domain.radius, n, x, y, want_gradient)
    h = float(h) if np.ndim(h) == 0 else h
    out = (h, g) if want_gradient else (h,)
    if return_bound:
        out = out + (bound,)
    return out if len(out) > 1 else out[0]


def robin_function(domain: DomainSpec, a):
    """H(a, a)."""
    return green_regular_part(domain, a, a)


def robin_gradient(domain: DomainSpec, a, total=True):
    """Gradient of a -> H(a, a).

    With ``total`` (default) this is the derivative of the diagonal map, which by
    symmetry equals twice the partial gradient in the first slot.  With
    ``total=False`` only the first-slot partial gradient is returned.
    """
    _, g = green_regular_part(domain, a, a, want_gradient=True)
    return 2.0 * g if total else g


@dataclass
class RadialFunction:
    """A radial scalar profile stored as grid values and slopes (cubic Hermite)."""

    r: np.ndarray
    u: np.ndarray
    du: np.ndarray
    _spline: Optional[CubicHermiteSpline] = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        self.r = np.asarray(self.r, dtype=float)
        self.u = np.asarray(self.u, dtype=float)
        self.du = np.asarray(self.du, dtype=float)
        if not (self.r.shape == self.u.shape == self.du.shape) or self.r.ndim != 1:
            raise ContractError("radial grid, values and slopes must be 1-D arrays of equal size")
        if np.any(np.diff(self.r) <= 0):
            raise ContractError("radial grid must be strictly increasing")
        self._spline = CubicHermiteSpline(self.r, self.u, self.du, extrapolate=False)

    @property
    def r_min(self):
        return float(self.r[0])

    @property
    def r_max(self):
        return float(self.r[-1])

    def value(self, rad):
        v = self._spline(np.asarray(rad, dtype=float))
        return np.nan_to_num(v, nan=0.0)

    def slope(self, rad):
        v = self._spline(np.asarray(rad, dtype=float), 1)
        return np.nan_to_num(v, nan=0.0)

    def at(self, x):
        return self.value(np.linalg.norm(np.asarray(x, dtype=float), axis=-1))

    def gradient(self, x):
        x = np.asarray(x, dtype=float)
        rad = np.linalg.norm(x, axis=-1)
        safe = np.where(rad > 0, rad, 1.0)
        return (self.slope(rad) / safe)[..., None] * x

    def scaled(self, t):
        return RadialFunction(self.r, t * self.u, t * self.du)

    def to_dict(self):
        return {"r": self.r.tolist(), "u": self.u.tolist(), "du": self.du.tolist()}

    @classmethod
    def from_dict(cls, d):
        return cls(np.asarray(d["r"]), np.asarray(d["u"]), np.asarray(d["du"]))


@dataclass
class ProblemSpec:
    """The problem -Lap u + V u = u^{p - eps} on a ball or annulus."""

    domain: DomainSpec
    eps: float
    potential: object
    u0: Optional[RadialFunction] = None

    def __post_init__(self):
        if self.eps < 0:
            raise ContractError("eps must be >= 0")
        vmin = self.potential.min_on(self.domain)
        if not vmin > 0:
            raise ContractError("V must be positive on the closed domain")
        if self.u0 is not None:
            tol = 1e-6 * max(1.0, float(np.max(np.abs(self.u0.u))))
            ends = [self.u0.value(self.domain.radius)]
            if self.domain.kind == "annulus":
                ends.append(self.u0.value(self.domain.inner))
            if any(abs(float(e)) > tol for e in ends):
                raise ContractError("residual mass profile must vanish on the boundary")
            if np.any(self.u0.u < -tol):
                raise ContractError("residual mass profile must be nonnegative")

    @property
    def dim(self):
        return self.domain.dim

    @property
    def p(self):
        n = self.domain.dim
        return (n + 2) / (n - 2)

    @property
    def has_u0(self):
        return self.u0 is not None and float(np.max(np.abs(self.u0.u))) > 0

    def u0_value(self, rad):
        if self.u0 is None:
            return np.zeros_like(np.asarray(rad, dtype=float))
        return self.u0.value(rad)

    def u0_slope(self, rad):
        if self.u0 is None:
            return np.zeros_like(np.asarray(rad, dtype=float))
        return self.u0.slope(rad)


def ball_boundary_law_ratio(n, d, radius=1.0):
    """H(a, a) (2d)^{n-2} for a at distance d from the sphere of a ball."""
    dom = DomainSpec.ball(n, radius)
    a = np.zeros(n)
    a[0] = radius - d
    return robin_function(dom, a) * (2.0 * d) ** (n - 2)


def axis_point(n, s):
    x = np.zeros(n)
    x[0] = s
    return x


def unit(n, k=0):
    e = np.zeros(n)
    e[k] = 1.0
    return e


def math_log_floor(v):
    """ln(max(e, v)), used for every logarithm inside remainder budgets."""
    return math.log(max(math.e, float(v)))
