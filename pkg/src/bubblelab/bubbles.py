"""Bubble calculus: the standard bubble, its harmonic boundary correction,
the projected bubble and the pairwise interaction quantity.

The boundary correction theta is computed exactly.  On a ball the harmonic
extension of the bubble trace is again of bubble type, c0 lam^m E(x)^(-m)
with E a quadratic polynomial in x whose coefficients follow from matching on
the sphere; this holds for every center.  On an annulus the trace on each
sphere is expanded in zonal Gegenbauer harmonics about the axis through the
center, using the generating function of C_l^m, and each mode is matched to
the solid harmonics r^l and r^(-l-2m).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Optional

import numpy as np

from .constants import c0 as _c0
from .errors import ContractError, DomainError
from .geometry import DomainSpec, RadialFunction, dist_to_boundary, green_regular_part, math_log_floor

LAMBDA_D_FLOOR = 10.0


@dataclass(frozen=True)
class Bubble:
    center: tuple
    lam: float

    def __post_init__(self):
        object.__setattr__(self, "center", tuple(float(v) for v in np.ravel(self.center)))
        if not self.lam > 0:
            raise ContractError("bubble rate must be positive")

    @property
    def a(self):
        return np.asarray(self.center, dtype=float)

    @property
    def dim(self):
        return len(self.center)

    def to_dict(self):
        return {"center": list(self.center), "lambda": float(self.lam)}


@dataclass
class Configuration:
    """Gluing parameter alpha0 with residual mass u0 plus weighted bubbles."""

    alpha0: float = 1.0
    u0: Optional[RadialFunction] = None
    entries: list = field(default_factory=list)

    def __post_init__(self):
        self.entries = [(float(al), b) for al, b in self.entries]
        for al, _ in self.entries:
            if not 0.0 < al < 2.0:
                raise ContractError("every alpha must lie in (0, 2)")
        if self.u0 is not None and not 0.0 < self.alpha0 < 2.0:
            raise ContractError("alpha0 must lie in (0, 2)")
        for i in range(len(self.entries)):
            for j in range(i):
                bi, bj = self.entries[i][1], self.entries[j][1]
                if bi.center == bj.center and bi.lam == bj.lam:
                    raise ContractError("bubbles must be pairwise distinct")

    @property
    def N(self):
        return len(self.entries)

    @property
    def bubbles(self):
        return [b for _, b in self.entries]

    @property
    def alphas(self):
        return [al for al, _ in self.entries]

    @property
    def has_u0(self):
        return self.u0 is not None and bool(np.any(self.u0.u))

    def to_dict(self):
        return {
            "alpha0": float(self.alpha0),
            "u0": None if self.u0 is None else "attached",
            "bubbles": [{"alpha": al, **b.to_dict()} for al, b in self.entries],
        }

    @classmethod
    def from_dict(cls, d, u0=None):
        entries = [(e.get("alpha", 1.0), Bubble(tuple(e["center"]), float(e["lambda"])))
                   for e in d.get("bubbles", [])]
        return cls(float(d.get("alpha0", 1.0)), u0, entries)


def _m(n):
    return 0.5 * (n - 2)


def eval_delta(bubble: Bubble, x, derivative="value"):
    """The bubble and its scaled parameter derivatives at points x (..., n).

    ``lambda_scaled`` is lam * d/dlam, ``point_scaled`` is (1/lam) * grad_a and
    returns a vector per point.
    """
    x = np.asarray(x, dtype=float)
    n = bubble.dim
    if x.shape[-1] != n:
        raise DomainError("point dimension does not match the bubble")
    m = _m(n)
    lam = bubble.lam
    diff = x - bubble.a
    q = 1.0 + lam * lam * np.sum(diff * diff, axis=-1)
    d = _c0(n) * lam ** m * q ** (-m)
    if derivative == "value":
        return d
    if derivative == "lambda_scaled":
        return m * d * (2.0 - q) / q
    if derivative == "point_scaled":
        return ((n - 2) * d * lam / q)[..., None] * diff
    raise ContractError(f"unknown derivative mode {derivative!r}")


def check_floor(bubble: Bubble, domain: DomainSpec, floor=LAMBDA_D_FLOOR):
    d = dist_to_boundary(domain, bubble.a)
    if floor and bubble.lam * d <= floor:
        raise ContractError(f"lambda*d = {bubble.lam * d:.4g} is below the floor {floor}")
    return d


def _ball_theta(bubble, R, x, derivative, direction):
    n = bubble.dim
    m = _m(n)
    lam = bubble.lam
    w = lam * lam
    a = bubble.a
    s2 = float(a @ a)
    A = 1.0 + w * (R * R + s2)
    S = math.sqrt((1.0 + w * (R - math.sqrt(s2)) ** 2) * (1.0 + w * (R + math.sqrt(s2)) ** 2))
    u = np.sum(x * x, axis=-1) / (R * R)
    xa = x @ a
    E = 0.5 * A * (u + 1.0) + 0.5 * S * (1.0 - u) - 2.0 * w * xa
    th = _c0(n) * lam ** m * E ** (-m)
    if derivative == "value":
        return th
    if derivative == "lambda_scaled":
        dD = 4.0 * A * (A - 1.0) - 16.0 * w * w * s2 * R * R
        dE = (A - 1.0) * (u + 1.0) + (1.0 - u) * dD / (4.0 * S) - 4.0 * w * xa
        return th * (m - m * dE / E)
    if derivative == "point_scaled":
        coef_a = w * (u + 1.0) + (1.0 - u) * w * (A - 2.0 * w * R * R) / S
        grad = coef_a[..., None] * a - 2.0 * w * x
        vec = (-m * th / (lam * E))[..., None] * grad
        if direction is None:
            return vec
        return vec @ np.asarray(direction, dtype=float)
    raise ContractError(f"unknown derivative mode {derivative!r}")


def _sphere_coeffs(n, lam, s_a, rho_s, L):
    """Zonal coefficients g_l of the bubble trace on the sphere |x| = rho_s,
    with their lam-scaled and s_a-derivatives."""
    m = _m(n)
    w = lam * lam
    A = 1.0 + w * (rho_s ** 2 + s_a ** 2)
    B = 2.0 * w * rho_s * s_a
    S = math.sqrt((1.0 + w * (rho_s - s_a) ** 2) * (1.0 + w * (rho_s + s_a) ** 2))
    K = 0.5 * (A + S)
    h = B / (2.0 * K)
    ls = np.arange(L + 1, dtype=float)
    with np.errstate(under="ignore"):
        g = _c0(n) * lam ** m * K ** (-m) * h ** ls
    lS = (2.0 * A * (A - 1.0) - 2.0 * B * B) / S
    lK = 0.5 * (2.0 * (A - 1.0) + lS)
    g_lam = g * (m - m * lK / K + ls * (2.0 - lK / K))
    dA = 2.0 * w * s_a
    dB = 2.0 * w * rho_s
    dS = (A * dA - B * dB) / S
    dK = 0.5 * (dA + dS)
    dh = dB / (2.0 * K) - B * dK / (2.0 * K * K)
    g_s = g * (-m * dK / K + ls * dh / h)
    return g, g_lam, g_s, h


def _gegenbauer_norm(L, m):
    """C_l^m(1) = binom(l + 2m - 1, l)."""
    ls = np.arange(L + 1, dtype=float)
    from scipy.special import gammaln
    return np.exp(gammaln(ls + 2 * m) - gammaln(ls + 1) - gammaln(2 * m))


@lru_cache(maxsize=64)
def _annulus_coeffs(n, lam, s_a, r0, R, tol=1e-17, l_max=20000):
    m = _m(n)
    L = 64
    while True:
        gR = _sphere_coeffs(n, lam, s_a, R, L)
        g0 = _sphere_coeffs(n, lam, s_a, r0, L)
        ls = np.arange(L + 1, dtype=float)
        q = r0 / R
        den = 1.0 - q ** (2 * ls + 2 * m)
        with np.errstate(under="ignore"):
            qa = q ** (ls + 2 * m)
            qb = q ** ls
        coef = []
        for k in range(3):
            a_l = (gR[k] - qa * g0[k]) / den
            b_l = (g0[k] - qb * gR[k]) / den
            coef.append((a_l, b_l))
        norm = _gegenbauer_norm(L, m)
        mag = (np.abs(coef[0][0]) + np.abs(coef[0][1])) * norm
        mag_l = (np.abs(coef[1][0]) + np.abs(coef[1][1])) * norm
        scale = max(mag.max(), mag_l.max())
        tail = max(mag[-8:].max(), mag_l[-8:].max())
        if tail <= tol * scale:
            keep = np.nonzero((mag > tol * scale) | (mag_l > tol * scale))[0]
            Lk = int(keep.max()) + 8 if keep.size else 8
            Lk = min(Lk, L)
            return tuple((a[: Lk + 1], b[: Lk + 1]) for a, b in coef), Lk
        if L >= l_max:
            from .errors import AccuracyError
            raise AccuracyError("zonal series for the annulus correction did not converge",
                                estimate=float(tail))
        L *= 2


def _annulus_theta(bubble, r0, R, x, derivative, direction):
    n = bubble.dim
    m = _m(n)
    a = bubble.a
    s_a = float(np.linalg.norm(a))
    axis = a / s_a
    (cv, cl, cs), L = _annulus_coeffs(n, float(bubble.lam), s_a, float(r0), float(R))
    if derivative == "value":
        al, bl = cv
    elif derivative == "lambda_scaled":
        al, bl = cl
    elif derivative == "point_scaled":
        if direction is None:
            raise ContractError("annulus correction only supports the derivative along the "
                                "axis through the center; pass that direction explicitly")
        dvec = np.asarray(direction, dtype=float)
        along = float(dvec @ axis)
        if np.linalg.norm(dvec - along * axis) > 1e-12 * max(1.0, np.linalg.norm(dvec)):
            raise ContractError("transverse center derivatives are not available on an annulus")
        al, bl = cs
        al = al * along / bubble.lam
        bl = bl * along / bubble.lam
    else:
        raise ContractError(f"unknown derivative mode {derivative!r}")
    r = np.linalg.norm(x, axis=-1)
    t = np.clip((x @ axis) / r, -1.0, 1.0)
    xr = r / R
    yr = r0 / r
    base = yr ** (2 * m)
    c_prev = np.zeros_like(t)
    c_cur = np.ones_like(t)
    pa = np.ones_like(r)
    pb = base
    total = al[0] * pa + bl[0] * pb
    for l in range(1, L + 1):
        if l == 1:
            c_next = 2.0 * m * t
        else:
            c_next = (2.0 * t * (l - 1 + m) * c_cur - (l + 2 * m - 2) * c_prev) / l
        c_prev, c_cur = c_cur, c_next
        pa = pa * xr
        pb = pb * yr
        total = total + (al[l] * pa + bl[l] * pb) * c_cur
    return total


def eval_theta(bubble: Bubble, domain: DomainSpec, x, method="harmonic_extension",
               derivative="value", direction=None, floor=LAMBDA_D_FLOOR):
    """Harmonic function on the domain with the bubble's boundary values.

    ``method='leading_asymptotic'`` returns c0 H(a, x) / lam^m instead.
    ``derivative`` selects the value or the lam-scaled / (1/lam) center
    derivatives; for ``point_scaled`` a ``direction`` gives a directional
    derivative (required on an annulus, where it must point along the center).
    """
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != domain.dim or bubble.dim != domain.dim:
        raise DomainError("dimension mismatch between bubble, domain and points")
    if not np.all(domain.contains(x)):
        raise DomainError("evaluation point outside the domain")
    check_floor(bubble, domain, floor)
    n = domain.dim
    if method == "leading_asymptotic":
        if derivative != "value":
            raise ContractError("leading_asymptotic only provides values")
        return _c0(n) * green_regular_part(domain, x, bubble.a) / bubble.lam ** _m(n)
    if method != "harmonic_extension":
        raise ContractError(f"unknown method {method!r}")
    if domain.kind == "ball":
        return _ball_theta(bubble, domain.radius, x, derivative, direction)
    return _annulus_theta(bubble, domain.inner, domain.radius, x, derivative, direction)


def eval_pdelta(bubble: Bubble, domain: DomainSpec, x, derivative="value", direction=None,
                floor=LAMBDA_D_FLOOR):
    """Projected bubble delta - theta (or its scaled parameter derivatives)."""
    th = eval_theta(bubble, domain, x, derivative=derivative, direction=direction, floor=floor)
    d = eval_delta(bubble, x, derivative)
    if derivative == "point_scaled" and direction is not None:
        d = d @ np.asarray(direction, dtype=float)
    return d - th


def interaction_eps(bi: Bubble, bj: Bubble, want_derivatives=False):
    """eps_ij and optionally lam_i d/dlam_i eps_ij and (1/lam_i) grad_{a_i} eps_ij."""
    n = bi.dim
    li, lj = bi.lam, bj.lam
    diff = bi.a - bj.a
    r2 = float(diff @ diff)
    M = li / lj + lj / li + li * lj * r2
    e = M ** (-_m(n))
    if not want_derivatives:
        return e
    en = e ** (n / (n - 2))
    d_lam = -_m(n) * en * (li / lj - lj / li + li * lj * r2)
    d_a = -(n - 2) * en * lj * diff
    return e, d_lam, d_a


@dataclass(frozen=True)
class RemainderBudget:
    r33: tuple
    r34: tuple
    interaction: float
    eps: float
    total: float

    def to_dict(self):
        return {"r33": list(self.r33), "r34": list(self.r34), "interaction": self.interaction,
                "eps": self.eps, "total": self.total}


def _r33(n, lam):
    if n <= 5:
        return lam ** (-_m(n))
    if n == 6:
        return math_log_floor(lam) ** (2.0 / 3.0) / lam ** 2
    return lam ** -2.0


def _r34(n, ld):
    v = ld ** (-(n + 2) / 2.0)
    if n <= 5:
        v += ld ** (2.0 - n)
    elif n == 6:
        v += math_log_floor(ld) / ld ** 4
    return v


def remainder_R(config: Configuration, eps, domain: DomainSpec):
    """Size of the correction norm budget for the ansatz."""
    n = domain.dim
    r33, r34 = [], []
    for b in config.bubbles:
        d = dist_to_boundary(domain, b.a)
        r33.append(_r33(n, b.lam))
        r34.append(_r34(n, b.lam * d))
    inter = 0.0
    bs = config.bubbles
    for i, bi in enumerate(bs):
        for j, bj in enumerate(bs):
            if i == j:
                continue
            e = interaction_eps(bi, bj)
            inter += e ** ((n + 2) / (2.0 * (n - 2))) * math_log_floor(1.0 / e) ** ((n + 2) / (2.0 * n))
            if n <= 5:
                inter += e
    total = float(eps) + sum(r33) + sum(r34) + inter
    return RemainderBudget(tuple(r33), tuple(r34), inter, float(eps), total)


def axial_points(s, rho, dim, axis=None):
    """Embed axisymmetric coordinates (s, rho) into R^dim along ``axis`` (default e1)."""
    s = np.asarray(s, dtype=float)
    rho = np.asarray(rho, dtype=float)
    s, rho = np.broadcast_arrays(s, rho)
    x = np.zeros(s.shape + (dim,))
    if axis is None:
        x[..., 0] = s
        x[..., 1] = rho
        return x
    axis = np.asarray(axis, dtype=float)
    axis = axis / np.linalg.norm(axis)
    k = int(np.argmin(np.abs(axis)))
    perp = np.zeros(dim)
    perp[k] = 1.0
    perp -= (perp @ axis) * axis
    perp /= np.linalg.norm(perp)
    return s[..., None] * axis + rho[..., None] * perp
