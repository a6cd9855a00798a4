"""Finite-dimensional reduced problems: cluster critical points, leading-order
profile predictions, and Newton refinement of the balancing systems.

The balancing residual is assembled from the term ledgers of
``expansions.expansion_rhs`` with the remainder envelopes dropped, so the
refined profile solves exactly the truncated system that the asymptotic
analysis balances.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .bubbles import Bubble, Configuration
from .constants import c0 as _c0
from .constants import compute_constant
from .errors import ContractError, ConvergenceError, SingularityError
from .expansions import expansion_rhs
from .geometry import ProblemSpec, boundary_normal, dist_to_boundary

NONDEGENERACY = 1e-6
GRAD_TOL = 1e-10
WINDOW = 20.0


# ---------------------------------------------------------------- cluster function

def _pair_data(ys):
    ys = np.asarray(ys, dtype=float)
    if ys.ndim != 2 or ys.shape[0] < 2:
        raise ContractError("cluster function needs N >= 2 points given as an (N, n) array")
    d = ys[:, None, :] - ys[None, :, :]
    r = np.linalg.norm(d, axis=-1)
    off = ~np.eye(ys.shape[0], dtype=bool)
    scale = max(float(np.max(r)), 1e-300)
    if np.any(r[off] <= 1e-14 * scale):
        raise SingularityError("coincident points in the cluster function")
    return ys, d, r, off


def F_cluster(hessV, ys, order="value"):
    """F(y) = sum_j D2V(y_j, y_j) - sum_{l != k} |y_l - y_k|^{2-n} and its derivatives.

    ``order`` is ``value`` (scalar), ``gradient`` ((N, n) array) or ``hessian``
    ((N n, N n) matrix, points flattened row-major).
    """
    ys, d, r, off = _pair_data(ys)
    N, n = ys.shape
    A = np.asarray(hessV, dtype=float)
    if A.shape != (n, n) or not np.allclose(A, A.T, atol=1e-14 * max(1.0, np.abs(A).max())):
        raise ContractError("hessV must be a symmetric n x n matrix")
    rr = np.where(off, r, 1.0)
    if order == "value":
        quad = float(np.einsum("ji,ik,jk->", ys, A, ys))
        return quad - float(np.sum(np.where(off, rr ** (2 - n), 0.0)))
    if order == "gradient":
        w = np.where(off, rr ** (-n), 0.0)
        return 2.0 * ys @ A.T + 2.0 * (n - 2) * np.einsum("jk,jki->ji", w, d)
    if order != "hessian":
        raise ContractError(f"unknown order {order!r}")
    Hm = np.zeros((N * n, N * n))
    eye = np.eye(n)
    for j in range(N):
        for k in range(N):
            if j == k:
                continue
            dj = d[j, k]
            rj = r[j, k]
            blk = 2.0 * (n - 2) * (eye / rj ** n - n * np.outer(dj, dj) / rj ** (n + 2))
            Hm[j * n:(j + 1) * n, j * n:(j + 1) * n] += blk
            Hm[j * n:(j + 1) * n, k * n:(k + 1) * n] -= blk
    for j in range(N):
        Hm[j * n:(j + 1) * n, j * n:(j + 1) * n] += 2.0 * A
    return Hm


def symmetric_pair_radius(n, kappa=-2.0):
    """Stationary half-separation t of y_2 = -y_1 when D2V = kappa I (kappa < 0)."""
    if kappa >= 0:
        raise ContractError("a symmetric stationary pair needs a negative definite Hessian")
    return ((n - 2) * 2.0 ** (1 - n) / -kappa) ** (1.0 / n)


@dataclass
class ClusterCritical:
    points: np.ndarray
    value: float
    grad_norm: float
    spectrum: np.ndarray
    nondegenerate: bool
    quotiented_modes: int
    seed: int
    start: int
    scale: float

    def to_dict(self):
        return {"points": self.points.tolist(), "value": self.value, "grad_norm": self.grad_norm,
                "spectrum": self.spectrum.tolist(), "nondegenerate": self.nondegenerate,
                "quotiented_modes": self.quotiented_modes, "seed": self.seed, "start": self.start,
                "scale": self.scale}


def _symmetry_modes(A, ys, tol=1e-10):
    """Tangent vectors of the rotations that commute with A, evaluated at ys."""
    N, n = ys.shape
    evals, Q = np.linalg.eigh(A)
    span = max(1.0, float(np.max(np.abs(evals))))
    vecs = []
    for a in range(n):
        for b in range(a + 1, n):
            if abs(evals[a] - evals[b]) <= tol * span:
                G = np.outer(Q[:, b], Q[:, a]) - np.outer(Q[:, a], Q[:, b])
                vecs.append((ys @ G.T).ravel())
    if not vecs:
        return np.zeros((N * n, 0))
    M = np.array(vecs).T
    U, s, _ = np.linalg.svd(M, full_matrices=False)
    keep = s > 1e-10 * max(1.0, float(s[0]) if s.size else 1.0)
    return U[:, keep]


def _canonical(A, ys):
    """Reflect so that the first point lies on +e1 when A is a multiple of I."""
    n = ys.shape[1]
    lam = float(np.trace(A)) / n
    if not np.allclose(A, lam * np.eye(n), atol=1e-14 * max(1.0, abs(lam))):
        return ys
    v = ys[0]
    t = float(np.linalg.norm(v))
    target = np.zeros(n)
    target[0] = t
    w = v - target
    if np.linalg.norm(w) <= 1e-15 * t:
        return ys
    w = w / np.linalg.norm(w)
    Hh = np.eye(n) - 2.0 * np.outer(w, w)
    out = ys @ Hh.T
    out[0] = target
    return out


def _newton_step(A, y):
    N, n = y.shape
    g = F_cluster(A, y, "gradient").ravel()
    Hm = F_cluster(A, y, "hessian")
    step, *_ = np.linalg.lstsq(Hm, -g, rcond=1e-12)
    return step.reshape(N, n), float(np.linalg.norm(g))


def _damped_newton(A, y, tol, max_iter=100):
    y = y.copy()
    gnorm = float(np.linalg.norm(F_cluster(A, y, "gradient")))
    for _ in range(max_iter):
        if gnorm < tol:
            return y, gnorm, True
        step, _ = _newton_step(A, y)
        t = 1.0
        while t > 1e-6:
            trial = y + t * step
            try:
                gt = float(np.linalg.norm(F_cluster(A, trial, "gradient")))
            except SingularityError:
                gt = math.inf
            if gt < gnorm:
                y, gnorm = trial, gt
                break
            t *= 0.5
        else:
            return y, gnorm, False
        if not np.all(np.isfinite(y)):
            return y, gnorm, False
    return y, gnorm, gnorm < tol


def find_cluster_cp(hessV, N, n, budget=32, seed=0):
    """Critical point of F_cluster by seeded multistart damped Newton.

    Starts are isotropic Gaussian clouds with the symmetric-pair length scale.
    The best converged root (smallest gradient, then lexicographically smallest
    first coordinate) is returned with its Hessian spectrum, restricted to the
    complement of the rotation modes that leave D2V invariant.
    """
    A = np.asarray(hessV, dtype=float)
    if A.shape != (n, n) or not np.allclose(A, A.T):
        raise ContractError("hessV must be a symmetric n x n matrix")
    if N < 2:
        raise ContractError("cluster needs N >= 2")
    spec = float(np.max(np.abs(np.linalg.eigvalsh(A))))
    if spec == 0:
        raise ContractError("hessV is zero: the cluster function has no length scale")
    t0 = ((n - 2) * 2.0 ** (1 - n) / spec) ** (1.0 / n)
    tol = GRAD_TOL * spec * t0
    rng = np.random.default_rng(seed)
    found = []
    diag = {"diverged": 0, "collapsed": 0, "stalled": 0}
    for k in range(int(budget)):
        y0 = rng.normal(scale=t0, size=(N, n))
        try:
            y, g, ok = _damped_newton(A, y0, tol)
        except SingularityError:
            diag["collapsed"] += 1
            continue
        if not ok:
            if not np.all(np.isfinite(y)) or np.max(np.abs(y)) > 1e6 * t0:
                diag["diverged"] += 1
            else:
                diag["stalled"] += 1
            continue
        found.append((g, float(y[0, 0]), k, y))
    if not found:
        raise ConvergenceError(f"no critical point from {budget} starts: {diag}", last=None,
                               residual=diag)
    found.sort(key=lambda t: (t[0], t[1], t[2]))
    g, _, k, y = found[0]
    y = _canonical(A, y)
    g = float(np.linalg.norm(F_cluster(A, y, "gradient")))
    Hm = F_cluster(A, y, "hessian")
    modes = _symmetry_modes(A, y)
    if modes.shape[1]:
        full, _ = np.linalg.qr(np.hstack([modes, np.eye(N * n)]))
        comp = full[:, modes.shape[1]:N * n]
        Hq = comp.T @ Hm @ comp
    else:
        Hq = Hm
    ev = np.linalg.eigvalsh(0.5 * (Hq + Hq.T))
    rad = float(np.max(np.abs(ev)))
    nondeg = bool(np.min(np.abs(ev)) > NONDEGENERACY * rad)
    return ClusterCritical(y, float(F_cluster(A, y)), g, ev, nondeg, int(modes.shape[1]),
                           int(seed), int(k), float(t0))


# ---------------------------------------------------------------- predictions

@dataclass
class ReducedProfile:
    kind: str
    eps: float
    lambdas: list
    centers: list
    site: tuple
    window: tuple
    d: Optional[float] = None
    xi: Optional[list] = None
    corrections: dict = field(default_factory=dict)
    extra: dict = field(default_factory=dict)

    @property
    def N(self):
        return len(self.lambdas)

    def configuration(self, problem, alphas=None):
        alphas = alphas or [1.0] * self.N
        entries = [(a, Bubble(tuple(c), l)) for a, c, l in zip(alphas, self.centers, self.lambdas)]
        return Configuration(1.0, problem.u0, entries)

    def to_dict(self):
        return {"kind": self.kind, "eps": self.eps, "lambdas": list(self.lambdas),
                "centers": [list(map(float, c)) for c in self.centers], "site": list(self.site),
                "window": list(self.window), "d": self.d, "xi": self.xi,
                "lambda2eps": [l * l * self.eps for l in self.lambdas],
                "corrections": {k: (v.tolist() if isinstance(v, np.ndarray) else v)
                                for k, v in self.corrections.items()},
                "extra": self.extra}


def _site_checks_interior(problem, b, label):
    n = problem.dim
    if n < 7:
        raise ContractError(f"{label} hypothesis violated: dimension must be >= 7 (got {n})")
    pot = problem.potential
    if not problem.domain.contains(b[None, :])[0] or dist_to_boundary(problem.domain, b[None, :])[0] <= 0:
        raise ContractError(f"{label} hypothesis violated: site must lie inside the domain")
    g = np.asarray(pot.gradient(b), dtype=float)
    V = float(pot.value(b))
    if V <= 0:
        raise ContractError(f"{label} hypothesis violated: V(b) must be positive")
    if np.linalg.norm(g) > 1e-8 * max(1.0, abs(V)):
        raise ContractError(f"{label} hypothesis violated: b is not a critical point of V "
                            f"(|grad V| = {np.linalg.norm(g):.3g})")
    Hs = np.asarray(pot.hessian(b), dtype=float)
    ev = np.linalg.eigvalsh(Hs)
    rad = float(np.max(np.abs(ev)))
    if rad == 0 or np.min(np.abs(ev)) <= NONDEGENERACY * rad:
        raise ContractError(f"{label} hypothesis violated: b is a degenerate critical point of V")
    return V, Hs


def _lambda_law(n, V, eps):
    gam = compute_constant("gamma", n)
    cb3 = compute_constant("cbar3", n)
    return math.sqrt(gam * V / (cb3 * eps))


def _eps_for_lambda(n, V, lam):
    return compute_constant("gamma", n) * V / (compute_constant("cbar3", n) * lam * lam)


def cluster_sigma(n, V):
    c = _c0(n)
    cb2 = compute_constant("cbar2", n)
    rho = compute_constant("rho", n)
    cb3 = compute_constant("cbar3", n)
    gam = compute_constant("gamma", n)
    return (c * cb2 / rho) ** (1.0 / n) * (cb3 / (gam * V)) ** ((n - 4) / (2.0 * n))


def boundary_distance_law(n, V, dV_dnu, eps):
    """Leading-order distance of a boundary-concentrating bubble from the boundary."""
    c = _c0(n)
    cb2 = compute_constant("cbar2", n)
    rho = compute_constant("rho", n)
    cb3 = compute_constant("cbar3", n)
    gam = compute_constant("gamma", n)
    dn1 = ((n - 2) / (2.0 ** n * rho) * c * cb2 / abs(dV_dnu)
           * (cb3 * eps / (gam * V)) ** ((n - 4) / 2.0))
    return dn1 ** (1.0 / (n - 1))


def _boundary_site(problem, b):
    n = problem.dim
    if n < 7:
        raise ContractError(f"boundary hypothesis violated: dimension must be >= 7 (got {n})")
    dom = problem.domain
    rb = float(np.linalg.norm(b))
    on_outer = abs(rb - dom.radius) <= 1e-10 * dom.radius
    on_inner = dom.kind == "annulus" and abs(rb - dom.inner) <= 1e-10 * dom.radius
    if not (on_outer or on_inner):
        raise ContractError("boundary hypothesis violated: site must lie on the boundary")
    nu = b / rb if on_outer else -b / rb
    pot = problem.potential
    g = np.asarray(pot.gradient(b), dtype=float)
    dnu = float(g @ nu)
    tang = g - dnu * nu
    V = float(pot.value(b))
    if np.linalg.norm(tang) > 1e-8 * max(1.0, abs(V)):
        raise ContractError("boundary hypothesis violated: b is not critical for V restricted "
                            f"to the boundary (|tangential grad V| = {np.linalg.norm(tang):.3g})")
    if not dnu < 0:
        raise ContractError("boundary hypothesis violated: the outward normal derivative of V "
                            f"at b must be negative (got {dnu:.6g})")
    return V, dnu, nu


def predict_profile(problem: ProblemSpec, kind, site, eps, cluster: ClusterCritical = None):
    """Leading-order ReducedProfile for an isolated, cluster or boundary family."""
    n = problem.dim
    eps = float(eps)
    if eps <= 0:
        raise ContractError("eps must be positive for a prediction")
    b = np.asarray(site, dtype=float).reshape(-1)
    if b.size != n:
        raise ContractError(f"site must have {n} coordinates")
    if kind == "isolated":
        V, _ = _site_checks_interior(problem, b, "isolated-bubble")
        lam = _lambda_law(n, V, eps)
        dist = float(dist_to_boundary(problem.domain, b[None, :])[0])
        eps_max = _eps_for_lambda(n, V, WINDOW / dist)
        return ReducedProfile("isolated", eps, [lam], [tuple(b)], tuple(b), (0.0, eps_max),
                              corrections={"beta": [0.0], "Lambda": [0.0], "zeta": [np.zeros(n)]})
    if kind == "cluster":
        if cluster is None:
            raise ContractError("cluster prediction needs a ClusterCritical")
        V, Hs = _site_checks_interior(problem, b, "cluster")
        ys = np.asarray(cluster.points, dtype=float)
        if ys.shape[1] != n:
            raise ContractError("cluster critical point dimension does not match the problem")
        if not cluster.nondegenerate:
            raise ContractError("cluster hypothesis violated: the cluster critical point is degenerate")
        chk = F_cluster(Hs, ys, "gradient")
        if np.linalg.norm(chk) > 1e-8 * max(1.0, float(np.max(np.abs(Hs))) * cluster.scale):
            raise ContractError("cluster hypothesis violated: points are not critical for the "
                                "cluster function of D2V(b)")
        eta = (n - 4) / (2.0 * n)
        sigma = cluster_sigma(n, V)
        lam = _lambda_law(n, V, eps)
        centers = [tuple(b + eps ** eta * sigma * y) for y in ys]
        seps = [np.linalg.norm(ys[i] - ys[j]) for i in range(len(ys)) for j in range(i + 1, len(ys))]
        dist = float(np.min(dist_to_boundary(problem.domain, np.array(centers))))
        # window: lam * separation and lam * dist both above the asymptotic threshold
        spread = sigma * min(seps)
        gam_c3 = compute_constant("gamma", n) * V / compute_constant("cbar3", n)
        eps_sep = (spread * math.sqrt(gam_c3) / WINDOW) ** (n / 2.0)
        eps_max = min(eps_sep, _eps_for_lambda(n, V, WINDOW / dist))
        return ReducedProfile("cluster", eps, [lam] * len(ys), centers, tuple(b), (0.0, eps_max),
                              corrections={"beta": [0.0] * len(ys), "Lambda": [0.0] * len(ys),
                                           "tau": [np.zeros(n) for _ in ys]},
                              extra={"eta": eta, "sigma": sigma, "cluster": ys.tolist()})
    if kind == "boundary":
        V, dnu, nu = _boundary_site(problem, b)
        lam = _lambda_law(n, V, eps)
        d = boundary_distance_law(n, V, dnu, eps)
        a = b - d * nu
        # lam d grows like eps^{-3/(2(n-1))}; find where it crosses the window threshold
        k = lam * d * eps ** (3.0 / (2 * (n - 1)))
        eps_max = (k / WINDOW) ** (2.0 * (n - 1) / 3.0)
        return ReducedProfile("boundary", eps, [lam], [tuple(a)], tuple(b), (0.0, eps_max), d=d,
                              xi=[0.0] * n, corrections={"beta": [0.0], "Lambda": [0.0], "D": 0.0},
                              extra={"dV_dnu": dnu, "normal": nu.tolist(),
                                     "d_over_eps_power": d / eps ** ((n - 4) / (2.0 * (n - 1)))})
    raise ContractError(f"unknown profile kind {kind!r}")


# ---------------------------------------------------------------- balancing

def _residual_map(problem, kind, eps, lam0, a0, ell, scales, boundary_law):
    N = len(lam0)
    n = problem.dim
    point_kind = "point_multi" if kind == "cluster" else "point_single"

    def unpack(z):
        z = z.reshape(N, n + 2)
        alphas = 1.0 + z[:, 0]
        lams = lam0 * (1.0 + z[:, 1])
        centers = a0 + ell * z[:, 2:]
        return alphas, lams, centers

    def F(z):
        alphas, lams, centers = unpack(z)
        if np.any(alphas <= 0) or np.any(alphas >= 2) or np.any(lams <= 0):
            return np.full(N * (n + 2), np.inf)
        cfg = Configuration(1.0, problem.u0,
                            [(float(al), Bubble(tuple(c), float(l))) for al, c, l in zip(alphas, centers, lams)])
        out = []
        for i in range(N):
            ra = expansion_rhs(problem, cfg, "alphai", i, eps, inner_products=False).rhs_sum()
            rl = expansion_rhs(problem, cfg, "lambda", i, eps, inner_products=False).rhs_sum()
            rp = expansion_rhs(problem, cfg, point_kind, i, eps, inner_products=False,
                               boundary_law=boundary_law).rhs_sum()
            out.append(np.concatenate([[ra / scales[0], rl / scales[1]], np.asarray(rp) / scales[2]]))
        return np.concatenate(out)

    return F, unpack


def solve_balancing(problem: ProblemSpec, kind, initial: ReducedProfile, eps=None, tol=1e-10,
                    max_iter=60, boundary_law=None):
    """Damped Newton on the truncated balancing system started at a predicted profile.

    Unknowns per bubble are alpha = 1 + beta, lam = lam0 (1 + Lambda) and the
    center a = a0 + ell * zeta, where ell is the natural displacement scale of
    the family (1/lam, the cluster spread, or the boundary distance).  Each
    equation is divided by its leading magnitude, so ``tol`` is relative.
    The boundary family uses the first-slot derivative of H by default, the
    same law its prediction is built on.
    """
    n = problem.dim
    eps = initial.eps if eps is None else float(eps)
    if kind != initial.kind:
        raise ContractError("profile kind does not match the requested system")
    site = np.asarray(initial.site, dtype=float)
    if kind == "boundary":
        _boundary_site(problem, site)
        boundary_law = boundary_law or "partial"
    elif kind in ("isolated", "cluster"):
        _site_checks_interior(problem, site, "isolated-bubble" if kind == "isolated" else "cluster")
        boundary_law = boundary_law or "total_derivative"
    else:
        raise ContractError(f"unknown profile kind {kind!r}")
    if not initial.window[0] <= eps <= initial.window[1]:
        raise ContractError(f"eps = {eps:g} is outside the validity window {initial.window}")
    lam0 = np.asarray(initial.lambdas, dtype=float)
    a0 = np.asarray(initial.centers, dtype=float)
    N = lam0.size
    lam = float(lam0[0])
    c = _c0(n)
    cb2 = compute_constant("cbar2", n)
    rho = compute_constant("rho", n)
    Sn = compute_constant("Sn", n)
    cb3 = compute_constant("cbar3", n)
    if kind == "isolated":
        ell = 1.0 / lam
    elif kind == "cluster":
        ell = initial.extra["sigma"] * eps ** initial.extra["eta"]
    else:
        ell = initial.d
    hs = float(np.max(np.abs(np.linalg.eigvalsh(problem.potential.hessian(site)))))
    gV = float(np.linalg.norm(problem.potential.gradient(site)))
    reach = float(dist_to_boundary(problem.domain, site[None, :])[0]) if kind == "isolated" else ell
    pscale = rho * (hs * ell + gV) / lam ** 3 + c * cb2 / (lam * reach) ** (n - 1)
    scales = (Sn, cb3 * eps, pscale)
    F, unpack = _residual_map(problem, kind, eps, lam0, a0, ell, scales, boundary_law)
    z = np.zeros(N * (n + 2))
    Fz = F(z)
    res = float(np.linalg.norm(Fz))
    h = 1e-7
    it = 0
    for it in range(max_iter):
        if res < tol:
            break
        J = np.empty((Fz.size, z.size))
        for k in range(z.size):
            e = np.zeros_like(z)
            e[k] = h
            J[:, k] = (F(z + e) - F(z - e)) / (2 * h)
        step, *_ = np.linalg.lstsq(J, -Fz, rcond=1e-12)
        t = 1.0
        while t > 1e-8:
            zt = z + t * step
            Ft = F(zt)
            rt = float(np.linalg.norm(Ft))
            if rt < res:
                z, Fz, res = zt, Ft, rt
                break
            t *= 0.5
        else:
            raise ConvergenceError("balancing Newton stagnated", last=unpack(z), residual=res)
    if res >= tol:
        raise ConvergenceError("balancing Newton hit the iteration cap", last=unpack(z), residual=res)
    alphas, lams, centers = unpack(z)
    zz = z.reshape(N, n + 2)
    corr = {"beta": zz[:, 0].tolist(), "Lambda": zz[:, 1].tolist()}
    if kind == "isolated":
        corr["zeta"] = [(centers[i] - site).tolist() for i in range(N)]
    elif kind == "cluster":
        # a_i - a_i(pred) = eps^eta tau_i
        corr["tau"] = [(zz[i, 2:] * initial.extra["sigma"]).tolist() for i in range(N)]
    out = ReducedProfile(kind, eps, lams.tolist(), [tuple(cc) for cc in centers], initial.site,
                         initial.window, corrections=corr, extra=dict(initial.extra))
    out.extra.update({"residual": res, "iterations": it, "alphas": alphas.tolist()})
    if kind == "boundary":
        nu = np.asarray(initial.extra["normal"])
        dd = float(dist_to_boundary(problem.domain, centers[:1])[0])
        xi = centers[0] - site + dd * nu
        out.d = dd
        out.xi = xi.tolist()
        corr["D"] = (dd / initial.d) ** (n - 1) - 1.0
    return out
