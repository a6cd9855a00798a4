"""Dimension constants of the bubble calculus, evaluated by quadrature.

All integrals are over R^n of radial functions of (1 + r^2).  Integrands with
a factor (r^2 - 1) or r^2 are split algebraically into pure powers of
(1 + r^2) before quadrature so that no cancellation happens inside a panel.
Closed-form Gamma-function expressions are deliberately absent here; the test
suite uses them as an independent check.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from functools import lru_cache
from typing import Optional

import numpy as np

from .errors import ContractError, DivergenceError
from .quadrature import DEFAULT_ATOL, DEFAULT_RTOL, integrate_radial, integrate_whole_space_radial

CONSTANT_NAMES = ("c0", "Sn", "cbar1", "cbar2", "cbar3", "cbar5", "gamma", "rho")


def c0(n):
    """Normalization making the standard bubble solve -Lap u = u^p."""
    return float((n * (n - 2)) ** ((n - 2) / 4.0))


def _check_dim(n):
    if int(n) != n or n < 3:
        raise ContractError("dimension must be an integer >= 3")


@lru_cache(maxsize=None)
def _power_integral(n, k, with_log, rtol, atol):
    """Integral over R^n of (1+r^2)^{-k}, optionally weighted by ln(1+r^2)."""
    if with_log:
        def f(r):
            s = r * r
            return np.log1p(s) * (1.0 + s) ** (-k)
    else:
        def f(r):
            return (1.0 + r * r) ** (-k)
    return integrate_whole_space_radial(f, n, rtol=rtol, atol=atol).value


def _I(n, k, rtol, atol):
    return _power_integral(int(n), float(k), False, rtol, atol)


def _IL(n, k, rtol, atol):
    return _power_integral(int(n), float(k), True, rtol, atol)


@lru_cache(maxsize=None)
def compute_constant(name, n, rtol=DEFAULT_RTOL, atol=DEFAULT_ATOL):
    """Value of a named constant in dimension n.

    ``rho`` is finite only for n >= 5 and raises DivergenceError otherwise.
    ``gamma`` is 0 for n in {3, 4} by convention.
    """
    _check_dim(n)
    n = int(n)
    if name not in CONSTANT_NAMES:
        raise ContractError(f"unknown constant {name!r}; expected one of {CONSTANT_NAMES}")
    c = c0(n)
    p = (n + 2) / (n - 2)
    m = 0.5 * (n - 2)
    if name == "c0":
        return c
    if name == "Sn":
        return c ** (2.0 * n / (n - 2)) * _I(n, n, rtol, atol)
    if name == "cbar1":
        return c ** (p + 1) * _IL(n, n, rtol, atol)
    if name == "cbar2":
        return c ** p * _I(n, 0.5 * (n + 2), rtol, atol)
    if name == "cbar3":
        # (r^2 - 1)/(1+r^2)^{n+1} = (1+r^2)^{-n} - 2 (1+r^2)^{-n-1}
        return m * m * c ** (p + 1) * (_IL(n, n, rtol, atol) - 2.0 * _IL(n, n + 1, rtol, atol))
    if name == "cbar5":
        # r^2/(1+r^2)^{(n+4)/2} = (1+r^2)^{-(n+2)/2} - (1+r^2)^{-(n+4)/2}
        return (n - 2) / n * c ** p * (_I(n, 0.5 * (n + 2), rtol, atol)
                                       - _I(n, 0.5 * (n + 4), rtol, atol))
    if name == "gamma":
        if n <= 4:
            return 0.0
        return m * c * c * (_I(n, n - 2, rtol, atol) - 2.0 * _I(n, n - 1, rtol, atol))
    # rho
    if n <= 4:
        raise DivergenceError(f"rho is not integrable in dimension {n}: |x|^2 (1+|x|^2)^(1-n) "
                              f"decays like |x|^(4-2n)")
    return (n - 2) / n * c * c * (_I(n, n - 2, rtol, atol) - _I(n, n - 1, rtol, atol))


@dataclass(frozen=True)
class ConstantTable:
    n: int
    c0: float
    Sn: float
    cbar1: float
    cbar2: float
    cbar3: float
    cbar5: float
    gamma: float
    rho: Optional[float]
    c1: Optional[float] = None

    def to_dict(self):
        return asdict(self)


@lru_cache(maxsize=None)
def constant_table(n, rtol=DEFAULT_RTOL, atol=DEFAULT_ATOL):
    vals = {}
    for name in CONSTANT_NAMES:
        try:
            vals[name] = compute_constant(name, n, rtol, atol)
        except DivergenceError:
            vals[name] = None
    return ConstantTable(n=int(n), **vals)


def compute_c1(problem, rtol=DEFAULT_RTOL, atol=DEFAULT_ATOL):
    """Integral of u0^{p+1} over the domain; 0 when there is no residual mass."""
    if problem.u0 is None:
        return 0.0
    u0 = problem.u0
    p = problem.p
    dom = problem.domain

    def f(r):
        return np.maximum(u0.value(r), 0.0) ** (p + 1)

    if not np.any(u0.u):
        return 0.0
    return integrate_radial(f, dom.dim, dom.radius, dom.r_min, rtol=rtol, atol=atol).value


def table_with_c1(problem, rtol=DEFAULT_RTOL, atol=DEFAULT_ATOL):
    t = constant_table(problem.dim, rtol, atol)
    d = t.to_dict()
    d["c1"] = compute_c1(problem, rtol, atol)
    return ConstantTable(**d)


def rate_law_limit(n, v_at_b=1.0):
    """gamma_n V(b) / cbar3, the predicted limit of lambda^2 eps."""
    return compute_constant("gamma", n) * v_at_b / compute_constant("cbar3", n)


def log_floor(x):
    return math.log(max(math.e, float(x)))
