"""FastAPI application exposing the library.

Library errors map to HTTP 422 with ``{"error": <class name>, "detail": ...}``;
the CLI turns those into a nonzero exit status.
"""

from __future__ import annotations

import numpy as np
from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse

from .. import __version__
from ..bubbles import Bubble, Configuration
from ..config import build_problem
from ..constants import CONSTANT_NAMES, compute_c1, compute_constant
from ..errors import BubbleLabError, ConvergenceError, DivergenceError
from ..expansions import (PAIRING_KINDS, boundary_sign_diagnostic, evaluate_expansion, expansion_rhs,
                          lowdim_obstruction, verify_order)
from ..quadrature import DEFAULT_ATOL, DEFAULT_RTOL
from ..radial_pde import continue_in_eps, extract_rate_law
from ..reduced_solver import ClusterCritical, find_cluster_cp, predict_profile, solve_balancing
from ..reporting import jsonable
from .schemas import (ClusterRequest, ConstantsRequest, DiagnoseRequest, ExpansionRequest, PredictRequest,
                      Result, SolveRequest, VerifyRequest)

app = FastAPI(title="bubblelab", version=__version__)


@app.exception_handler(BubbleLabError)
async def _library_error(request: Request, exc: BubbleLabError):
    body = {"error": type(exc).__name__, "detail": str(exc)}
    if isinstance(exc, ConvergenceError):
        body["last"] = jsonable(exc.last) if exc.last is not None else None
        body["residual"] = jsonable(exc.residual)
    return JSONResponse(status_code=422, content=body)


def _problem(model, eps=None):
    return build_problem(model.as_block(), eps=eps)


def _configuration(model, problem):
    entries = [(b.alpha, Bubble(tuple(b.center), b.lam)) for b in model.bubbles]
    return Configuration(model.alpha0, problem.u0, entries)


@app.get("/health")
def health():
    return {"status": "ok", "version": __version__}


@app.post("/constants", response_model=Result)
def constants(req: ConstantsRequest):
    rtol = req.rtol or DEFAULT_RTOL
    atol = DEFAULT_ATOL if req.atol is None else req.atol
    out = {"n": req.dim}
    for name in CONSTANT_NAMES:
        try:
            out[name] = compute_constant(name, req.dim, rtol, atol)
        except DivergenceError:
            out[name] = None
    if req.problem is not None:
        out["c1"] = compute_c1(_problem(req.problem), rtol, atol)
    return Result(type="constants", result=out)


@app.post("/verify", response_model=Result)
def verify(req: VerifyRequest):
    problem = _problem(req.problem, req.eps)
    rep = verify_order(problem, req.check, req.ladder, None if req.center is None else np.asarray(req.center),
                       req.eps, req.lam, index=req.index)
    return Result(type="verify", result=jsonable(rep.to_dict()))


@app.post("/expansion", response_model=Result)
def expansion(req: ExpansionRequest):
    problem = _problem(req.problem, req.eps)
    cfg = _configuration(req.configuration, problem)
    kw = {"boundary_law": req.boundary_law}
    if req.numeric:
        rep = evaluate_expansion(problem, cfg, req.kind, req.index, eps=req.eps,
                                 **({"rtol": req.rtol} if req.rtol else {}), **kw)
    else:
        rep = expansion_rhs(problem, cfg, req.kind, req.index, eps=req.eps, **kw)
    return Result(type="expansion", result=jsonable(rep.to_dict()))


@app.post("/cluster", response_model=Result)
def cluster(req: ClusterRequest):
    cc = find_cluster_cp(np.asarray(req.hessian, dtype=float), req.N, req.dim, req.budget, req.seed)
    return Result(type="cluster", result=jsonable(cc.to_dict()))


def _cluster_from(d):
    return ClusterCritical(np.asarray(d["points"], dtype=float), float(d["value"]), float(d["grad_norm"]),
                           np.asarray(d["spectrum"], dtype=float), bool(d["nondegenerate"]),
                           int(d["quotiented_modes"]), int(d["seed"]), int(d["start"]), float(d["scale"]))


@app.post("/predict", response_model=Result)
def predict(req: PredictRequest):
    problem = _problem(req.problem, req.eps)
    cc = None
    if req.kind == "cluster":
        if req.cluster is not None:
            cc = _cluster_from(req.cluster)
        else:
            if req.seed is None:
                raise BubbleLabError("cluster prediction without a cluster critical point needs a seed")
            site = np.asarray(req.site, dtype=float)
            cc = find_cluster_cp(problem.potential.hessian(site), req.N, problem.dim, req.budget, req.seed)
    prof = predict_profile(problem, req.kind, req.site, req.eps, cc)
    out = {"prediction": prof.to_dict()}
    if req.refine:
        out["refined"] = solve_balancing(problem, req.kind, prof, req.eps).to_dict()
    if cc is not None:
        out["cluster"] = cc.to_dict()
    return Result(type="profile", result=jsonable(out))


@app.post("/solve", response_model=Result)
def solve(req: SolveRequest):
    problem = _problem(req.problem)
    br = continue_in_eps(problem, req.eps_ladder, None if req.bracket is None else tuple(req.bracket),
                         fit=req.fit)
    out = {"rows": br.rows(), "complete": br.complete, "lost_at": br.lost_at, "reason": br.reason,
           "shooting_values": [p.profile.shooting_value for p in br.points]}
    if req.fit and req.rate_law and sum(p.fit is not None for p in br.points) >= 3:
        out["rate_law"] = extract_rate_law(br).to_dict()
    return Result(type="branch", result=jsonable(out))


@app.post("/diagnose", response_model=Result)
def diagnose(req: DiagnoseRequest):
    problem = _problem(req.problem, req.eps)
    cfg = _configuration(req.configuration, problem)
    if req.which == "lowdim":
        rep = lowdim_obstruction(problem, cfg, req.eps, req.o_scale, req.slack)
    else:
        rep = boundary_sign_diagnostic(problem, cfg, req.eps, req.o_scale, req.slack, req.boundary_law)
    return Result(type="diagnostic", result=jsonable(rep.to_dict()))


@app.get("/kinds")
def kinds():
    return {"pairings": list(PAIRING_KINDS), "constants": list(CONSTANT_NAMES)}
