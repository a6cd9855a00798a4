"""Command line client.

Every subcommand builds a service request and sends it either to an
in-process instance of the FastAPI app (default) or to a running server given
by ``--server``.  Results are printed or written with ``--out`` in the
format chosen by ``--format``.  Any library or validation error exits with
status 1; argument errors exit with status 2.
"""

from __future__ import annotations

import argparse
import json
import sys

from .config import FORMATS, config_from_dict, parse_config
from .errors import BubbleLabError, ConfigError
from .reporting import emit_report

EXIT_ERROR = 1


# ---------------------------------------------------------------- transports

class _Transport:
    def __init__(self, server=None):
        self.server = server
        self._client = None

    def post(self, path, payload):
        if self._client is None:
            if self.server:
                import httpx
                self._client = httpx.Client(base_url=self.server, timeout=None)
            else:
                import warnings
                with warnings.catch_warnings():
                    # starlette nags about its httpx backend; irrelevant in-process
                    warnings.simplefilter("ignore")
                    from fastapi.testclient import TestClient
                from .service.app import app
                self._client = TestClient(app, raise_server_exceptions=True)
        resp = self._client.post(path, json=payload)
        try:
            body = resp.json()
        except ValueError:
            body = {"error": "HTTPError", "detail": resp.text}
        if resp.status_code != 200:
            if isinstance(body, dict) and "error" in body:
                raise BubbleLabError(f"{body['error']}: {body['detail']}")
            raise BubbleLabError(f"request rejected ({resp.status_code}): {json.dumps(body)}")
        return body


# ---------------------------------------------------------------- parsing helpers

def _floats(text, name):
    try:
        return [float(x) for x in str(text).split(",") if x.strip()]
    except ValueError:
        raise ConfigError(f"--{name}: expected comma-separated numbers, got {text!r}") from None


def _pad(v, dim):
    v = list(v)
    if len(v) > dim:
        raise ConfigError(f"point {v} has more than dim = {dim} coordinates")
    return v + [0.0] * (dim - len(v))


def parse_hessian(spec, dim):
    """Matrix from '<c>I', 'diag:d1,...,dn' or a JSON nested list."""
    s = spec.strip()
    if s.startswith("["):
        try:
            return json.loads(s)
        except ValueError:
            raise ConfigError(f"--hessian: invalid JSON matrix {spec!r}") from None
    if s.startswith("diag:"):
        d = _floats(s[5:], "hessian")
        if len(d) != dim:
            raise ConfigError(f"--hessian: diag needs {dim} entries, got {len(d)}")
        return [[d[i] if i == j else 0.0 for j in range(dim)] for i in range(dim)]
    if s.endswith("I"):
        try:
            c = float(s[:-1] or 1.0) if s[:-1] not in ("-", "+") else float(s[:-1] + "1")
        except ValueError:
            raise ConfigError(f"--hessian: cannot read scalar in {spec!r}") from None
        return [[c if i == j else 0.0 for j in range(dim)] for i in range(dim)]
    raise ConfigError(f"--hessian: expected '<c>I', 'diag:...' or a JSON matrix, got {spec!r}")


def _domain(spec):
    kind, _, rest = spec.partition(":")
    vals = _floats(rest, "domain") if rest else []
    if kind == "ball":
        return {"kind": "ball", "radius": vals[0] if vals else 1.0}
    if kind == "annulus":
        if not vals:
            raise ConfigError("--domain: annulus needs an inner radius, e.g. annulus:0.5,1")
        return {"kind": "annulus", "inner": vals[0], "radius": vals[1] if len(vals) > 1 else 1.0}
    raise ConfigError(f"--domain: expected ball[:R] or annulus:r0[,R], got {spec!r}")


def _potential(spec):
    fam, _, rest = spec.partition(":")
    if fam == "constant":
        return {"family": "constant", "c": _floats(rest, "potential")[0]}
    if fam in ("well", "quadratic_well"):
        v = _floats(rest, "potential")
        if len(v) < 2:
            raise ConfigError("--potential: well needs v0,curvature[,center...]")
        return {"family": "quadratic_well", "v0": v[0], "curvature": v[1], "center": v[2:] or [0.0]}
    if fam in ("table", "radial_table"):
        import numpy as np
        data = np.loadtxt(rest, delimiter=",", comments="#", ndmin=2)
        return {"family": "radial_table", "r": data[:, 0].tolist(), "v": data[:, 1].tolist()}
    raise ConfigError(f"--potential: expected constant:c, well:v0,curv[,center] or table:file, got {spec!r}")


def _bubbles(specs, dim):
    out = []
    for s in specs or []:
        parts = s.split(":")
        if len(parts) not in (2, 3):
            raise ConfigError(f"--bubble: expected LAM:X1,X2,...[:ALPHA], got {s!r}")
        b = {"lam": float(parts[0]), "center": _pad(_floats(parts[1], "bubble"), dim)}
        if len(parts) == 3:
            b["alpha"] = float(parts[2])
        out.append(b)
    return out


def _problem_block(args, base):
    prob = json.loads(json.dumps(base.get("problem", {}))) if base else {}
    if args.dim is not None:
        prob["dim"] = args.dim
    if getattr(args, "eps", None) is not None:
        prob["eps"] = args.eps
    if args.domain:
        prob["domain"] = _domain(args.domain)
    if args.potential:
        prob["potential"] = _potential(args.potential)
    if args.u0:
        prob["u0"] = {"source": args.u0}
    if "dim" not in prob:
        raise ConfigError("problem.dim: missing (use --dim or a config file)")
    cfg = config_from_dict({"problem": prob})
    p = dict(cfg.problem)
    if p.get("u0", {}).get("source") == "file":
        raise ConfigError("problem.u0.source: file sources are read by the config loader, "
                          "not sent to the service; use radial_pde or inline data")
    return p


# ---------------------------------------------------------------- subcommands

def _task(args, base, key, default=None):
    v = getattr(args, key, None)
    if v is not None:
        return v
    return (base or {}).get("task", {}).get(key, default)


def cmd_constants(args, base, tr):
    dim = args.dim if args.dim is not None else (base or {}).get("problem", {}).get("dim")
    if dim is None:
        raise ConfigError("dim: missing (use --dim)")
    payload = {"dim": dim, "rtol": args.rtol, "atol": args.atol}
    if base and base.get("problem", {}).get("u0", {}).get("source", "none") != "none":
        payload["problem"] = _problem_block(args, base)
    return tr.post("/constants", payload)


def cmd_verify(args, base, tr):
    prob = _problem_block(args, base)
    check = _task(args, base, "check")
    if not check:
        raise ConfigError("task.check: missing (use --check)")
    ladder = _task(args, base, "ladder")
    center = _task(args, base, "center")
    payload = {"problem": prob, "check": check,
               "ladder": _floats(ladder, "ladder") if isinstance(ladder, str) else ladder,
               "center": _pad(_floats(center, "center") if isinstance(center, str) else center, prob["dim"])
               if center is not None else None,
               "eps": args.eps, "lam": _task(args, base, "lam", 480.0), "index": _task(args, base, "index", 0)}
    return tr.post("/verify", payload)


def _config_payload(args, base, prob):
    bubbles = _bubbles(args.bubble, prob["dim"]) if args.bubble else (base or {}).get("task", {}).get("bubbles")
    if not bubbles:
        raise ConfigError("task.bubbles: at least one bubble is required (use --bubble LAM:X1,...)")
    for b in bubbles:
        b["center"] = _pad(b["center"], prob["dim"])
    return {"alpha0": _task(args, base, "alpha0", 1.0), "bubbles": bubbles}


def cmd_expand(args, base, tr):
    prob = _problem_block(args, base)
    kind = _task(args, base, "kind")
    if not kind:
        raise ConfigError("task.kind: missing (use --kind)")
    payload = {"problem": prob, "configuration": _config_payload(args, base, prob), "kind": kind,
               "index": _task(args, base, "index", 0), "eps": args.eps, "rtol": args.rtol,
               "numeric": not args.no_numeric}
    if args.boundary_law:
        payload["boundary_law"] = args.boundary_law
    return tr.post("/expansion", payload)


def cmd_cluster(args, base, tr):
    if args.seed is None:
        raise ConfigError("--seed: a seed is mandatory for multistart searches")
    dim = args.dim if args.dim is not None else (base or {}).get("problem", {}).get("dim")
    if dim is None or args.N is None or args.hessian is None:
        raise ConfigError("cluster needs --dim, --N and --hessian")
    payload = {"dim": dim, "N": args.N, "hessian": parse_hessian(args.hessian, dim), "seed": args.seed,
               "budget": args.budget}
    return tr.post("/cluster", payload)


def cmd_predict(args, base, tr):
    prob = _problem_block(args, base)
    kind = _task(args, base, "kind")
    site = _task(args, base, "site")
    eps = args.eps if args.eps is not None else prob.get("eps")
    if kind is None or site is None or not eps:
        raise ConfigError("predict needs --kind, --site and a positive --eps")
    site = _pad(_floats(site, "site") if isinstance(site, str) else site, prob["dim"])
    if kind == "cluster" and args.seed is None:
        raise ConfigError("--seed: a seed is mandatory for the cluster multistart search")
    payload = {"problem": prob, "kind": kind, "site": site, "eps": eps, "refine": args.refine,
               "seed": args.seed, "N": args.N or 2, "budget": args.budget}
    return tr.post("/predict", payload)


def cmd_solve(args, base, tr):
    prob = _problem_block(args, base)
    ladder = _task(args, base, "eps_ladder")
    if ladder is None:
        raise ConfigError("task.eps_ladder: missing (use --eps-ladder)")
    ladder = _floats(ladder, "eps-ladder") if isinstance(ladder, str) else ladder
    bracket = _task(args, base, "bracket")
    payload = {"problem": prob, "eps_ladder": ladder, "fit": bool(args.fit),
               "bracket": _floats(bracket, "bracket") if isinstance(bracket, str) else bracket}
    return tr.post("/solve", payload)


def cmd_diagnose(args, base, tr):
    prob = _problem_block(args, base)
    which = _task(args, base, "which")
    if which is None:
        raise ConfigError("task.which: missing (use --which lowdim|boundary)")
    payload = {"problem": prob, "configuration": _config_payload(args, base, prob), "which": which,
               "eps": args.eps}
    if args.boundary_law:
        payload["boundary_law"] = args.boundary_law
    return tr.post("/diagnose", payload)


def cmd_report(args, base, tr):
    try:
        with open(args.input, encoding="utf-8") as fh:
            return json.load(fh)
    except OSError as exc:
        raise ConfigError(f"--in: cannot read {args.input!r}: {exc}") from None
    except ValueError as exc:
        raise ConfigError(f"--in: not a JSON result file: {exc}") from None


def cmd_serve(args, base, tr):
    import uvicorn
    uvicorn.run("bubblelab.service.app:app", host=args.host, port=args.port)
    return None


# ---------------------------------------------------------------- parser

def _globals():
    g = argparse.ArgumentParser(add_help=False)
    S = argparse.SUPPRESS
    g.add_argument("--rtol", type=float, default=S, help="relative quadrature tolerance")
    g.add_argument("--atol", type=float, default=S, help="absolute quadrature tolerance")
    g.add_argument("--seed", type=int, default=S, help="seed for stochastic tasks (mandatory there)")
    g.add_argument("--out", default=S, help="write the report here instead of stdout")
    g.add_argument("--format", choices=FORMATS, default=S, help="report format")
    g.add_argument("--config", default=S, help="TOML/YAML run configuration")
    g.add_argument("--server", default=S, help="base URL of a running service (default: in-process)")
    return g


def _problem_flags(p):
    p.add_argument("--dim", type=int)
    p.add_argument("--eps", type=float)
    p.add_argument("--domain", help="ball[:R] or annulus:r0[,R]")
    p.add_argument("--potential", help="constant:c | well:v0,curvature[,center...] | table:file.csv")
    p.add_argument("--u0", choices=("none", "radial_pde"), help="residual mass source")


def build_parser():
    g = _globals()
    ap = argparse.ArgumentParser(prog="bubblelab", parents=[g],
                                 description="Bubble calculus, reduced systems and radial solves.")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("constants", parents=[g], help="dimension constants")
    _problem_flags(p)
    p.set_defaults(func=cmd_constants)

    p = sub.add_parser("verify", parents=[g], help="asymptotic order checks")
    _problem_flags(p)
    p.add_argument("--check", help="theta_sup, pdelta_norm, pdelta_lp, gammaV_pairing, "
                                   "cbar3_eps_integral or a pairing kind")
    p.add_argument("--ladder", "--lambda-ladder", dest="ladder")
    p.add_argument("--lam", type=float)
    p.add_argument("--center")
    p.add_argument("--index", type=int)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("expand", parents=[g], help="one pairing: numeric value and term ledger")
    _problem_flags(p)
    p.add_argument("--kind")
    p.add_argument("--index", type=int)
    p.add_argument("--bubble", action="append", help="LAM:X1,X2,...[:ALPHA] (repeatable)")
    p.add_argument("--alpha0", type=float)
    p.add_argument("--boundary-law", choices=("total_derivative", "partial"))
    p.add_argument("--no-numeric", action="store_true")
    p.set_defaults(func=cmd_expand)

    p = sub.add_parser("cluster", parents=[g], help="critical point of the cluster function")
    p.add_argument("--dim", type=int)
    p.add_argument("--N", type=int)
    p.add_argument("--hessian", help="'-2I', 'diag:...' or JSON matrix")
    p.add_argument("--budget", type=int, default=32)
    p.set_defaults(func=cmd_cluster)

    p = sub.add_parser("predict", parents=[g], help="leading-order profile prediction")
    _problem_flags(p)
    p.add_argument("--kind", choices=("isolated", "cluster", "boundary"))
    p.add_argument("--site")
    p.add_argument("--N", type=int)
    p.add_argument("--budget", type=int, default=32)
    p.add_argument("--refine", action="store_true", help="also solve the truncated balancing system")
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("solve", parents=[g], help="radial solves along an eps ladder")
    _problem_flags(p)
    p.add_argument("--eps-ladder", dest="eps_ladder")
    p.add_argument("--bracket")
    p.add_argument("--fit", action=argparse.BooleanOptionalAction, default=True)
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("diagnose", parents=[g], help="obstruction sign ledgers")
    _problem_flags(p)
    p.add_argument("--which", choices=("lowdim", "boundary"))
    p.add_argument("--bubble", action="append")
    p.add_argument("--alpha0", type=float)
    p.add_argument("--boundary-law", choices=("total_derivative", "partial"))
    p.set_defaults(func=cmd_diagnose)

    p = sub.add_parser("report", parents=[g], help="re-emit a saved JSON result")
    p.add_argument("--in", dest="input", required=True)
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("serve", parents=[g], help="run the HTTP service")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8000)
    p.set_defaults(func=cmd_serve)
    return ap


def main(argv=None):
    ap = build_parser()
    args = ap.parse_args(argv)
    for k, v in (("rtol", None), ("atol", None), ("seed", None), ("out", None), ("format", None),
                 ("config", None), ("server", None)):
        if not hasattr(args, k):
            setattr(args, k, v)
    for k in ("dim", "eps", "domain", "potential", "u0", "bubble", "N", "boundary_law", "no_numeric",
              "refine", "fit", "budget"):
        if not hasattr(args, k):
            setattr(args, k, None)
    try:
        base = None
        if args.config:
            rc = parse_config(args.config)
            base = rc.to_dict()
            if args.format is None:
                args.format = rc.output.get("format")
            if args.out is None and "path" in rc.output:
                import os
                args.out = os.path.join(rc.base_dir, rc.output["path"])
        tr = _Transport(args.server)
        result = args.func(args, base, tr)
        if result is None:
            return 0
        text = emit_report(result, args.format or "json", args.out)
        if not args.out:
            sys.stdout.write(text)
        return 0
    except BubbleLabError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
