"""Radial solutions of -Lap u + V u = u^q on balls and annuli, q = p - eps.

The ODE u'' + (n-1)/r u' = V u - |u|^{q-1} u is shot from the center (ball,
unknown peak value) or from the inner sphere (annulus, unknown slope), with the
value at the outer radius as mismatch.  The odd extension of the nonlinearity
keeps the mismatch smooth after the profile changes sign, so a plain scan,
bisection and secant polish are enough.  The first sign change of the mismatch
along increasing shooting parameter is the positive (ground state) solution.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.integrate import solve_ivp
from scipy.optimize import least_squares

from .bubbles import Bubble, Configuration, eval_delta, eval_pdelta
from .constants import c0 as _c0
from .errors import BracketError, ContractError, IVPBlowUpError, ModelMismatchError
from .geometry import DomainSpec, ProblemSpec, RadialFunction

ODE_RTOL = 1e-12
BOUNDARY_TOL = 1e-8
RESIDUAL_TOL = 1e-8
WINDOW = 20.0


@dataclass
class RadialProfile:
    r: np.ndarray
    u: np.ndarray
    du: np.ndarray
    dim: int
    eps: float
    shooting_value: float
    boundary_residual: float
    ode_residual: float
    positive: bool
    kind: str = "ball"

    @property
    def peak(self):
        return float(np.max(self.u))

    @property
    def peak_location(self):
        return float(self.r[int(np.argmax(self.u))])

    def as_function(self):
        return RadialFunction(self.r, self.u, self.du)

    def invariants_hold(self):
        return (self.boundary_residual < BOUNDARY_TOL and self.ode_residual < RESIDUAL_TOL
                and self.positive)

    def to_dict(self):
        return {"dim": self.dim, "eps": self.eps, "kind": self.kind,
                "shooting_value": self.shooting_value, "peak": self.peak,
                "boundary_residual": self.boundary_residual, "ode_residual": self.ode_residual,
                "positive": self.positive, "r": self.r.tolist(), "u": self.u.tolist(),
                "du": self.du.tolist()}


def _radial_potential(problem):
    pot = problem.potential
    if not pot.is_radial:
        raise ContractError("radial solver needs a radial potential")
    return pot.radial_value


def _rhs(n, Vr, q):
    def f(r, y):
        u, v = y
        return [v, -(n - 1) / r * v + Vr(r) * u - abs(u) ** (q - 1) * u]
    return f


def _integrate(n, Vr, q, r_start, y0, r_end, dense=False, scale=1.0, rtol=ODE_RTOL):
    """RK45 from r_start to r_end; raises IVPBlowUpError if |u| escapes."""
    limit = 1e12 * max(scale, 1.0)

    def blow(r, y):
        return limit - abs(y[0])
    blow.terminal = True
    sol = solve_ivp(_rhs(n, Vr, q), (r_start, r_end), y0, method="RK45", rtol=rtol,
                    atol=1e-14 * max(scale, 1e-300), events=blow, dense_output=False)
    if sol.status == 1:
        raise IVPBlowUpError("radial initial value problem blew up", radius=float(sol.t[-1]))
    if sol.status < 0:
        raise IVPBlowUpError(f"integration failed: {sol.message}", radius=float(sol.t[-1]))
    return sol


def _ball_start(n, Vr, q, mu, R):
    ell = abs(mu) ** (-(q - 1) / 2.0) if mu != 0 else R
    rs = 1e-4 * min(ell, R)
    # Lap u = V u - u^q, so u''(0) = (V(0) mu - mu^q)/n: a maximum when mu^{q-1} > V(0)
    c = (float(Vr(0.0)) * mu - abs(mu) ** (q - 1) * mu) / n
    return rs, [mu + 0.5 * c * rs * rs, c * rs]


def ball_mismatch(problem, q, mu, rtol=ODE_RTOL):
    n = problem.dim
    R = problem.domain.radius
    Vr = _radial_potential(problem)
    rs, y0 = _ball_start(n, Vr, q, mu, R)
    sol = _integrate(n, Vr, q, rs, y0, R, scale=abs(mu), rtol=rtol)
    return float(sol.y[0, -1])


def annulus_mismatch(problem, q, slope, rtol=ODE_RTOL):
    n = problem.dim
    dom = problem.domain
    Vr = _radial_potential(problem)
    sol = _integrate(n, Vr, q, dom.inner, [0.0, slope], dom.radius,
                     scale=abs(slope) * (dom.radius - dom.inner), rtol=rtol)
    return float(sol.y[0, -1])


def _first_sign_change(fun, lo, hi, n_scan=60):
    grid = np.geomspace(lo, hi, n_scan)
    prev_x, prev_f = grid[0], fun(grid[0])
    if prev_f <= 0:
        raise BracketError("mismatch is not positive at the lower end of the bracket")
    for x in grid[1:]:
        fx = fun(x)
        if fx <= 0:
            return prev_x, prev_f, x, fx
        prev_x, prev_f = x, fx
    raise BracketError(f"no sign change of the boundary mismatch in [{lo:.4g}, {hi:.4g}]")


def _root(fun, a, fa, b, fb, xtol=1e-15, ftol=0.0, max_iter=200):
    """Bisection down to a relative width of 1e-7, then secant polish."""
    for _ in range(max_iter):
        if b - a <= 1e-7 * b:
            break
        c = 0.5 * (a + b)
        fc = fun(c)
        if fc > 0:
            a, fa = c, fc
        else:
            b, fb = c, fc
    x0, f0, x1, f1 = a, fa, b, fb
    for _ in range(50):
        if f1 == f0:
            break
        x2 = x1 - f1 * (x1 - x0) / (f1 - f0)
        if not a <= x2 <= b:
            x2 = 0.5 * (a + b)
        f2 = fun(x2)
        if f2 > 0:
            a, fa = x2, f2
        else:
            b, fb = x2, f2
        x0, f0, x1, f1 = x1, f1, x2, f2
        if abs(f2) <= ftol or abs(x1 - x0) <= xtol * abs(x1):
            break
    return x1


_GL_T, _GL_W = np.polynomial.legendre.leggauss(16)


def _gauss_panel(a, b, u, du, ddu, n, pot, q):
    h = b - a
    t = 0.5 * (_GL_T + 1.0)
    t2, t3 = t * t, t * t * t
    h0 = 1 - 10 * t3 + 15 * t2 * t2 - 6 * t3 * t2
    h1 = t - 6 * t3 + 8 * t2 * t2 - 3 * t3 * t2
    h2 = 0.5 * (t2 - 3 * t3 + 3 * t2 * t2 - t3 * t2)
    k2 = 0.5 * (t3 - 2 * t2 * t2 + t3 * t2)
    k1 = -4 * t3 + 7 * t2 * t2 - 3 * t3 * t2
    k0 = 1 - h0
    ui = (u[0] * h0 + u[1] * k0 + h * (du[0] * h1 + du[1] * k1)
          + h * h * (ddu[0] * h2 + ddu[1] * k2))
    x = a + h * t
    g = pot.radial_value(x) * ui - np.abs(ui) ** (q - 1) * ui
    return 0.5 * h * float(np.sum(_GL_W * x ** (n - 1) * g))


def _flux_residual(r, u, du, n, pot, q):
    """Panel-averaged ODE residual from the flux form (r^{n-1} u')' = r^{n-1} g.

    For each panel the jump of r^{n-1} u' is compared with the integral of
    r^{n-1} g, g = V u - |u|^{q-1} u, computed by the two-point Hermite rule
    that uses f, f' and f'' at the nodes (seventh order).  Dividing by the
    panel volume int r^{n-1} turns the mismatch into an average of the
    pointwise residual, so it is in the same units as u''.  Panels touching a
    near-zero of u, where |u|^{q-1} u is not smooth, are integrated by
    Gauss-Legendre on the quintic Hermite interpolant of u instead.
    """
    V = pot.radial_value(r)
    V1 = pot.radial_derivative(r, 1)
    V2 = pot.radial_derivative(r, 2)
    au = np.abs(u)
    up = au ** (q - 1)
    g = V * u - up * u
    rs = np.where(r > 0, r, 1.0)
    ddu = np.where(r > 0, -(n - 1) / rs * du + g, g / n)
    g1 = V1 * u + V * du - q * up * du
    small = au <= 1e-3 * np.max(au)
    safe = np.where(small, 1.0, au)
    g2 = V2 * u + 2 * V1 * du + V * ddu - q * up * ddu \
        - np.where(small, 0.0, q * (q - 1) * safe ** (q - 2) * np.sign(u) * du * du)
    w0 = r ** (n - 1)
    w1 = (n - 1) * r ** (n - 2)
    w2 = (n - 1) * (n - 2) * r ** (n - 3) if n > 3 else np.full_like(r, 2.0)
    f = w0 * g
    f1 = w1 * g + w0 * g1
    f2 = w2 * g + 2 * w1 * g1 + w0 * g2
    h = np.diff(r)
    quint = (0.5 * h * (f[:-1] + f[1:]) + h * h / 10.0 * (f1[:-1] - f1[1:])
             + h ** 3 / 120.0 * (f2[:-1] + f2[1:]))
    rough = small[:-1] | small[1:]
    integral = quint
    if np.any(rough):
        integral = quint.copy()
        for k in np.nonzero(rough)[0]:
            integral[k] = _gauss_panel(r[k], r[k + 1], u[k:k + 2], du[k:k + 2], ddu[k:k + 2], n, pot, q)
    flux = w0 * du
    vol = (r[1:] ** n - r[:-1] ** n) / n
    res = (np.diff(flux) - integral) / vol
    return float(np.max(np.abs(res)))


def _profile_from(problem, q, r_start, y0, eps, shoot, kind, scale, rtol=ODE_RTOL):
    n = problem.dim
    R = problem.domain.radius
    Vr = _radial_potential(problem)
    sol = _integrate(n, Vr, q, r_start, y0, R, scale=scale, rtol=rtol)
    r, u, du = sol.t, sol.y[0], sol.y[1]
    if kind == "ball":
        # close the grid at the origin with the even Taylor start
        r = np.concatenate([[0.0], r])
        u = np.concatenate([[shoot], u])
        du = np.concatenate([[0.0], du])
    umax = float(np.max(np.abs(u)))
    bres = abs(float(u[-1])) / umax
    res = _flux_residual(r, u, du, n, problem.potential, q) / umax ** q
    positive = bool(np.all(u[1:-1] > 0))
    return RadialProfile(r, u, du, n, float(eps), float(shoot), bres, res, positive, kind)


def solve_radial(problem: ProblemSpec, eps=None, bracket=None, n_scan=60, rtol=ODE_RTOL):
    """Positive radial solution by shooting.

    ``bracket`` is a (low, high) pair for the shooting parameter: the peak
    value u(0) on a ball, the inner slope u'(r0) on an annulus.  The first sign
    change of the outer boundary value along a geometric scan is refined.
    ``rtol`` is the Runge-Kutta tolerance used for every trajectory.
    """
    eps = problem.eps if eps is None else float(eps)
    n = problem.dim
    q = (n + 2) / (n - 2) - eps
    dom = problem.domain
    if q <= 1:
        raise ContractError("exponent p - eps must exceed 1")
    if dom.kind == "ball":
        lo, hi = bracket or (1e-3, 1e4)
        fun = lambda mu: ball_mismatch(problem, q, mu, rtol)
        a, fa, b, fb = _first_sign_change(fun, lo, hi, n_scan)
        mu = _root(fun, a, fa, b, fb)
        Vr = _radial_potential(problem)
        rs, y0 = _ball_start(n, Vr, q, mu, dom.radius)
        return _profile_from(problem, q, rs, y0, eps, mu, "ball", abs(mu), rtol)
    lo, hi = bracket or (1e-3, 1e5)
    fun = lambda s: annulus_mismatch(problem, q, s, rtol)
    a, fa, b, fb = _first_sign_change(fun, lo, hi, n_scan)
    s = _root(fun, a, fa, b, fb)
    return _profile_from(problem, q, dom.inner, [0.0, s], eps, s, "annulus",
                         abs(s) * (dom.radius - dom.inner), rtol)


def solve_ivp_profile(dim, potential, eps, peak, r_max):
    """Initial value mode: the profile started from u(0) = peak with no boundary condition."""
    q = (dim + 2) / (dim - 2) - eps
    Vr = potential.radial_value
    rs, y0 = _ball_start(dim, Vr, q, peak, r_max)
    sol = _integrate(dim, Vr, q, rs, y0, r_max, scale=peak)
    r = np.concatenate([[0.0], sol.t])
    u = np.concatenate([[peak], sol.y[0]])
    du = np.concatenate([[0.0], sol.y[1]])
    umax = float(np.max(np.abs(u)))
    res = _flux_residual(r, u, du, dim, potential, q) / umax ** q
    return RadialProfile(r, u, du, dim, float(eps), float(peak), 0.0, res, bool(np.all(u > 0)), "ivp")


# ---------------------------------------------------------------- fitting

@dataclass
class FitResult:
    config: Configuration
    residual: float
    lambda_fit: float
    alpha_fit: float
    alpha0_fit: Optional[float]
    center_fit: float
    lambda_peak: float
    window: float

    def to_dict(self):
        return {"lambda_fit": self.lambda_fit, "alpha_fit": self.alpha_fit,
                "alpha0_fit": self.alpha0_fit, "center_fit": self.center_fit,
                "lambda_peak": self.lambda_peak, "residual": self.residual, "window": self.window}


@dataclass
class FitTemplate:
    """Shape of the model: number of bubbles (currently one) and an optional u0."""

    n_bubbles: int = 1
    u0: Optional[RadialFunction] = None
    fit_center: bool = False


def _ray(n, r):
    x = np.zeros((np.size(r), n))
    x[:, 0] = r
    return x


def fit_decomposition(profile: RadialProfile, problem: ProblemSpec, template: FitTemplate = None,
                      n_fit=4000):
    """Least-squares fit of alpha0 u0 + alpha P delta to a profile along the e1 ray.

    The misfit is measured in the radial H^1 seminorm, int |u' - model'|^2 r^{n-1} dr,
    which is the energy norm that controls the correction term.  The bubble
    center is fixed at the origin on a ball and fitted along the ray on an
    annulus (or when ``template.fit_center``).
    """
    template = template or FitTemplate()
    if template.n_bubbles != 1:
        raise ContractError("only single-bubble templates are supported")
    n = problem.dim
    dom = problem.domain
    m = 0.5 * (n - 2)
    c = _c0(n)
    u = np.asarray(profile.u, dtype=float)
    if not np.any(u > 0) or float(np.max(u)) <= 0:
        raise ModelMismatchError("profile has no positive peak to fit")
    fun = RadialFunction(profile.r, profile.u, profile.du)
    k_peak = int(np.argmax(u))
    a_init = float(profile.r[k_peak])
    u_peak = float(u[k_peak])
    u0 = template.u0
    if u0 is not None:
        u_peak = max(u_peak - float(u0.value(a_init)), u_peak * 1e-3)
    lam_init = (u_peak / c) ** (2.0 / (n - 2))
    fit_center = template.fit_center or dom.kind == "annulus"
    r_lo = max(dom.r_min, float(profile.r[0]))
    r_hi = min(dom.radius, float(profile.r[-1]))
    peaks = np.geomspace(1e-4, 1.0, n_fit // 2) * (r_hi - r_lo)
    grid = np.unique(np.clip(np.concatenate([r_lo + peaks, a_init - peaks, a_init + peaks,
                                              np.linspace(r_lo, r_hi, n_fit // 2)]), r_lo, r_hi))
    w = np.sqrt(np.gradient(grid) * np.maximum(grid, 1e-300) ** (n - 1))
    target = fun.slope(grid)
    norm = float(np.sqrt(np.sum((w * target) ** 2)))

    def model(params, r):
        al, lam, a = params[0], params[1], params[2]
        a0 = params[3] if u0 is not None else 0.0
        b = Bubble(tuple([a] + [0.0] * (n - 1)), lam)
        x = _ray(n, r)
        v = al * eval_pdelta(b, dom, x, floor=0.0)
        if u0 is not None:
            v = v + a0 * u0.value(r)
        return v

    def dmodel(params, r):
        h = 1e-6 * min(1.0 / params[1], dom.radius)
        lo = np.clip(r - h, r_lo, r_hi)
        hi = np.clip(r + h, r_lo, r_hi)
        return (model(params, hi) - model(params, lo)) / (hi - lo)

    def resid(params):
        full = list(params)
        if not fit_center:
            full = [params[0], params[1], a_init if dom.kind == "annulus" else 0.0] + list(params[2:])
        return w * (dmodel(full, grid) - target) / norm

    x0 = [1.0, lam_init]
    lb, ub = [1e-3, 1e-6], [2.0, np.inf]
    if fit_center:
        x0.append(a_init)
        lb.append(r_lo + 1e-9)
        ub.append(r_hi - 1e-9)
    if u0 is not None:
        x0.append(1.0)
        lb.append(1e-3)
        ub.append(2.0)
    x0 = np.clip(x0, np.array(lb) + 1e-12, np.array(ub) - 1e-12)
    sol = least_squares(resid, x0, bounds=(lb, ub), x_scale="jac", xtol=1e-14, ftol=1e-14, gtol=1e-14,
                        max_nfev=2000)
    p_ = list(sol.x)
    if fit_center:
        al, lam, a = p_[0], p_[1], p_[2]
        rest = p_[3:]
    else:
        al, lam = p_[0], p_[1]
        a = a_init if dom.kind == "annulus" else 0.0
        rest = p_[2:]
    a0 = rest[0] if u0 is not None else None
    residual = float(np.sqrt(np.sum(resid(sol.x) ** 2)))
    if residual > 0.2:
        raise ModelMismatchError(f"fit residual {residual:.3g} exceeds 20% of the profile norm")
    center = tuple([a] + [0.0] * (n - 1))
    cfg = Configuration(a0 if a0 is not None else 1.0, u0, [(min(al, 1.999999), Bubble(center, lam))])
    lam_peak = (max(u_peak, 1e-300) / c) ** (2.0 / (n - 2))
    d = dom.radius - abs(a) if dom.kind == "ball" else min(dom.radius - a, a - dom.inner)
    return FitResult(cfg, residual, float(lam), float(al), None if a0 is None else float(a0),
                     float(a), float(lam_peak), float(lam * d))


# ---------------------------------------------------------------- continuation

@dataclass
class BranchPoint:
    eps: float
    profile: RadialProfile
    fit: Optional[FitResult]
    diagnostics: dict = field(default_factory=dict)

    @property
    def lambda2eps(self):
        if self.fit is None:
            return None
        return self.fit.lambda_fit ** 2 * self.eps

    def row(self):
        f = self.fit
        return {"eps": self.eps,
                "lambda_fit": None if f is None else f.lambda_fit,
                "alpha_fit": None if f is None else f.alpha_fit,
                "peak": self.profile.peak,
                "residual": None if f is None else f.residual,
                "lambda2eps": self.lambda2eps}


@dataclass
class Branch:
    points: list
    complete: bool
    lost_at: Optional[float] = None
    reason: str = ""

    def rows(self):
        return [p.row() for p in self.points]


def continue_in_eps(problem: ProblemSpec, ladder, bracket=None, warm_start="sqrt_law", fit=True,
                    template: FitTemplate = None):
    """Follow the positive solution along a strictly decreasing eps ladder.

    Each rung after the first is bracketed around the previous shooting value
    rescaled by the square-root rate law lam ~ eps^{-1/2} (peak ~ lam^m).
    A rung that cannot be solved ends the branch; the good rungs are returned.
    """
    ladder = [float(e) for e in ladder]
    if any(b >= a for a, b in zip(ladder, ladder[1:])):
        raise ContractError("eps ladder must be strictly decreasing")
    n = problem.dim
    m = 0.5 * (n - 2)
    points = []
    prev = None
    for k, e in enumerate(ladder):
        try:
            if prev is None:
                prof = solve_radial(problem, e, bracket)
            else:
                if warm_start == "sqrt_law" and e > 0:
                    ratio = math.sqrt(prev.eps / e) ** m if problem.domain.kind == "ball" else 1.0
                else:
                    ratio = 1.0
                guess = prev.profile.shooting_value * ratio
                lo = guess / 16.0
                if bracket is not None:
                    lo = min(lo, bracket[0])
                prof = solve_radial(problem, e, (lo, guess * 64.0))
            if not prof.invariants_hold():
                raise ContractError(
                    f"profile at eps={e} fails invariants (boundary {prof.boundary_residual:.2e}, "
                    f"ode {prof.ode_residual:.2e}, positive {prof.positive})")
        except (BracketError, IVPBlowUpError, ContractError) as exc:
            return Branch(points, False, e, str(exc))
        fr = None
        if fit:
            try:
                fr = fit_decomposition(prof, problem, template)
            except ModelMismatchError as exc:
                return Branch(points, False, e, str(exc))
        bp = BranchPoint(e, prof, fr, {"peak": prof.peak, "peak_location": prof.peak_location,
                                       "fit_residual": None if fr is None else fr.residual})
        points.append(bp)
        prev = bp
    return Branch(points, True)


# ---------------------------------------------------------------- rate law

@dataclass
class RateLawResult:
    limit: float
    half_width: float
    kappa: Optional[float]
    verdict: str
    sequence: list
    eps: list
    note: str = ""

    def to_dict(self):
        return dict(self.__dict__)


def _fit_power(eps, s, kmin, kmax):
    eps = np.asarray(eps, dtype=float)
    s = np.asarray(s, dtype=float)

    def best_for(kappa):
        A = np.column_stack([np.ones_like(eps), eps ** kappa])
        coef, *_ = np.linalg.lstsq(A, s, rcond=None)
        return coef, float(np.sum((A @ coef - s) ** 2))

    ks = np.linspace(kmin, kmax, 4001)
    errs = [best_for(k)[1] for k in ks]
    k = float(ks[int(np.argmin(errs))])
    from scipy.optimize import minimize_scalar
    lo = max(kmin, k - (kmax - kmin) / 4000)
    hi = min(kmax, k + (kmax - kmin) / 4000)
    if hi > lo:
        k = float(minimize_scalar(lambda t: best_for(t)[1], bounds=(lo, hi), method="bounded",
                                  options={"xatol": 1e-12}).x)
    coef, _ = best_for(k)
    return float(coef[0]), float(coef[1]), k


def extract_rate_law(branch, kappa_bounds=(0.05, 4.0)):
    """Limit of lam^2 eps as eps -> 0 by Richardson extrapolation with a fitted order.

    The model is s(eps) = L + C eps^kappa.  A non-monotone sequence, or a fitted
    kappa pinned at a bound, gives an INCONCLUSIVE verdict (the estimate is still
    returned).  The half-width is the change in L when the coarsest rung is
    dropped, or the distance to the last rung when only three rungs exist.
    """
    pts = branch.points if isinstance(branch, Branch) else list(branch)
    eps, s = [], []
    for p in pts:
        if isinstance(p, BranchPoint):
            if p.fit is None:
                continue
            eps.append(p.eps)
            s.append(p.lambda2eps)
        else:
            eps.append(float(p[0]))
            s.append(float(p[1]))
    if len(s) < 3:
        raise ContractError("rate-law extraction needs at least three fitted rungs")
    order = np.argsort(eps)[::-1]
    eps = [eps[k] for k in order]
    s = [s[k] for k in order]
    diffs = np.diff(s)
    scale = max(abs(v) for v in s)
    if np.all(np.abs(diffs) <= 1e-14 * scale):
        return RateLawResult(float(s[-1]), 0.0, None, "OK", s, eps, "constant sequence")
    monotone = bool(np.all(diffs >= 0) or np.all(diffs <= 0))
    L, C, kappa = _fit_power(eps, s, *kappa_bounds)
    if len(s) >= 4:
        L2, _, _ = _fit_power(eps[1:], s[1:], *kappa_bounds)
        half = abs(L - L2)
    else:
        half = abs(L - s[-1])
    at_bound = (kappa <= kappa_bounds[0] * (1 + 1e-6)) or (kappa >= kappa_bounds[1] * (1 - 1e-6))
    verdict = "OK"
    note = ""
    if not monotone:
        verdict, note = "INCONCLUSIVE", "sequence is not monotone"
    elif at_bound:
        verdict, note = "INCONCLUSIVE", f"fitted order {kappa:.3g} sits at a bound"
    return RateLawResult(float(L), float(half), float(kappa), verdict, s, eps, note)
