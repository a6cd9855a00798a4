"""Named families of positive potentials V.

Each family exposes values, gradients and Hessians at arbitrary points, an
evaluator in axisymmetric coordinates (axial coordinate s, distance rho to the
axis) and a lower bound on a closed domain for validation.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.interpolate import CubicSpline

from .errors import ContractError


def _is_on_axis(c, axis, tol=1e-12):
    c = np.asarray(c, dtype=float)
    along = float(np.dot(c, axis))
    return np.linalg.norm(c - along * axis) <= tol * max(1.0, np.linalg.norm(c)), along


@dataclass(frozen=True)
class ConstantPotential:
    c: float

    kind = "constant"

    def value(self, x):
        x = np.asarray(x, dtype=float)
        return np.full(x.shape[:-1], float(self.c)) if x.ndim > 1 else float(self.c)

    def gradient(self, x):
        return np.zeros_like(np.asarray(x, dtype=float))

    def hessian(self, x):
        n = np.asarray(x).shape[-1]
        return np.zeros((n, n))

    def value_axial(self, s, rho, axis):
        return np.full(np.shape(s), float(self.c))

    def is_axisymmetric(self, axis):
        return True

    @property
    def is_radial(self):
        return True

    def radial_value(self, r):
        return np.full(np.shape(r), float(self.c))

    def radial_derivative(self, r, order=1):
        return np.zeros(np.shape(r))

    def min_on(self, domain):
        return float(self.c)

    def to_dict(self):
        return {"family": "constant", "c": float(self.c)}


@dataclass(frozen=True)
class QuadraticWell:
    """V(x) = V0 + curvature/2 * |x - center|^2."""

    v0: float
    center: tuple
    curvature: float

    kind = "quadratic_well"

    def _c(self, n):
        c = np.zeros(n)
        cc = np.asarray(self.center, dtype=float)
        c[: cc.size] = cc
        return c

    def value(self, x):
        x = np.asarray(x, dtype=float)
        d = x - self._c(x.shape[-1])
        return self.v0 + 0.5 * self.curvature * np.sum(d * d, axis=-1)

    def gradient(self, x):
        x = np.asarray(x, dtype=float)
        return self.curvature * (x - self._c(x.shape[-1]))

    def hessian(self, x):
        n = np.asarray(x).shape[-1]
        return self.curvature * np.eye(n)

    def is_axisymmetric(self, axis):
        return _is_on_axis(self._c(len(axis)), np.asarray(axis, dtype=float))[0]

    def value_axial(self, s, rho, axis):
        ok, cs = _is_on_axis(self._c(len(axis)), np.asarray(axis, dtype=float))
        if not ok:
            raise ContractError("quadratic-well center is off the symmetry axis")
        return self.v0 + 0.5 * self.curvature * ((s - cs) ** 2 + rho ** 2)

    @property
    def is_radial(self):
        return not np.any(np.asarray(self.center, dtype=float))

    def radial_value(self, r):
        if not self.is_radial:
            raise ContractError("quadratic well is not radial")
        return self.v0 + 0.5 * self.curvature * np.asarray(r) ** 2

    def radial_derivative(self, r, order=1):
        r = np.asarray(r, dtype=float)
        if order == 1:
            return self.curvature * r
        return np.full(r.shape, float(self.curvature) if order == 2 else 0.0)

    def min_on(self, domain):
        c = self._c(domain.dim)
        cn = float(np.linalg.norm(c))
        if self.curvature >= 0:
            if domain.kind == "ball":
                dmin = max(0.0, cn - domain.radius)
            else:
                dmin = max(0.0, cn - domain.radius, domain.inner - cn)
            return self.v0 + 0.5 * self.curvature * dmin ** 2
        return self.v0 + 0.5 * self.curvature * (domain.radius + cn) ** 2

    def to_dict(self):
        return {"family": "quadratic_well", "v0": float(self.v0),
                "center": [float(v) for v in self.center], "curvature": float(self.curvature)}


class RadialTable:
    """V(x) = spline(|x|) through tabulated (r_k, V_k), with zero slope at r = 0."""

    kind = "radial_table"

    def __init__(self, r, v):
        r = np.asarray(r, dtype=float)
        v = np.asarray(v, dtype=float)
        if r.ndim != 1 or r.shape != v.shape or r.size < 2 or np.any(np.diff(r) <= 0):
            raise ContractError("radial table needs increasing radii and matching values")
        self.r = r
        self.v = v
        bc = ((1, 0.0), "not-a-knot") if r[0] == 0.0 else "not-a-knot"
        self._s = CubicSpline(r, v, bc_type=bc, extrapolate=True)

    def radial_value(self, rad):
        return self._s(np.asarray(rad, dtype=float))

    def radial_derivative(self, rad, order=1):
        return self._s(np.asarray(rad, dtype=float), order)

    def value(self, x):
        return self._s(np.linalg.norm(np.asarray(x, dtype=float), axis=-1))

    def gradient(self, x):
        x = np.asarray(x, dtype=float)
        rad = np.linalg.norm(x, axis=-1)
        safe = np.where(rad > 0, rad, 1.0)
        return (self._s(rad, 1) / safe)[..., None] * x

    def hessian(self, x):
        x = np.asarray(x, dtype=float)
        n = x.shape[-1]
        rad = float(np.linalg.norm(x))
        if rad == 0:
            return float(self._s(0.0, 2)) * np.eye(n)
        e = x / rad
        outer = np.outer(e, e)
        return float(self._s(rad, 2)) * outer + float(self._s(rad, 1)) / rad * (np.eye(n) - outer)

    def value_axial(self, s, rho, axis):
        return self._s(np.hypot(s, rho))

    def is_axisymmetric(self, axis):
        return True

    @property
    def is_radial(self):
        return True

    def min_on(self, domain):
        grid = np.linspace(domain.r_min, domain.radius, 2001)
        return float(np.min(self._s(grid)))

    def to_dict(self):
        return {"family": "radial_table", "r": self.r.tolist(), "v": self.v.tolist()}


def potential_from_dict(d):
    fam = d.get("family")
    if fam == "constant":
        return ConstantPotential(float(d["c"]))
    if fam == "quadratic_well":
        return QuadraticWell(float(d["v0"]), tuple(float(v) for v in d.get("center", [0.0])),
                             float(d["curvature"]))
    if fam == "radial_table":
        return RadialTable(d["r"], d["v"])
    raise ContractError(f"unknown potential family {fam!r}")
