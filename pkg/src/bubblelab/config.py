"""Run configuration: nested TOML or YAML files and the plain dicts the
service receives.

Layout (TOML shown, YAML is the same tree)::

    [problem]
    dim = 5
    eps = 0.1
    [problem.domain]          # kind = "ball" | "annulus"
    kind = "ball"
    radius = 1.0
    [problem.potential]       # family = "constant" | "quadratic_well" | "radial_table"
    family = "constant"
    c = 1.0
    [problem.u0]              # source = "none" | "radial_pde" | "file"
    source = "none"
    [task]                    # subcommand-specific keys
    [output]
    path = "out.json"
    format = "json"

Every validation error names the key path that caused it.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field

import numpy as np

from .errors import BubbleLabError, ConfigError
from .geometry import DomainSpec, ProblemSpec, RadialFunction
from .potentials import ConstantPotential, QuadraticWell, RadialTable

FORMATS = ("json", "csv", "text")

DEFAULTS = {
    "problem": {
        "eps": 0.0,
        "domain": {"kind": "ball", "radius": 1.0},
        "potential": {"family": "constant", "c": 1.0},
        "u0": {"source": "none"},
    },
    "task": {},
    "output": {"format": "json"},
}


@dataclass
class RunConfig:
    problem: dict
    task: dict = field(default_factory=dict)
    output: dict = field(default_factory=dict)
    base_dir: str = "."

    def build_problem(self, eps=None):
        return build_problem(self.problem, eps=eps, base_dir=self.base_dir)

    def to_dict(self):
        return {"problem": self.problem, "task": self.task, "output": self.output}


def _merge(defaults, given):
    out = dict(defaults)
    for k, v in given.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = _merge(out[k], v)
        else:
            out[k] = v
    return out


def _num(d, key, path, positive=False, integer=False, required=True, default=None):
    if key not in d:
        if required:
            raise ConfigError(f"{path}.{key}: missing required key")
        return default
    v = d[key]
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ConfigError(f"{path}.{key}: expected a number, got {v!r}")
    if integer and int(v) != v:
        raise ConfigError(f"{path}.{key}: expected an integer, got {v!r}")
    if positive and not v > 0:
        raise ConfigError(f"{path}.{key}: must be positive, got {v!r}")
    return int(v) if integer else float(v)


def _vector(v, path, length=None):
    if not isinstance(v, (list, tuple)) or not all(isinstance(x, (int, float)) and not isinstance(x, bool) for x in v):
        raise ConfigError(f"{path}: expected a list of numbers")
    if length is not None and len(v) > length:
        raise ConfigError(f"{path}: has {len(v)} entries but dim is {length}")
    return [float(x) for x in v]


def _read_table(path, base_dir, key):
    full = path if os.path.isabs(path) else os.path.join(base_dir, path)
    if not os.path.exists(full):
        raise ConfigError(f"{key}: referenced file {path!r} does not exist")
    try:
        data = np.loadtxt(full, delimiter=",", comments="#", ndmin=2)
    except ValueError as exc:
        raise ConfigError(f"{key}: cannot read numeric columns from {path!r}: {exc}") from None
    return data


def validate_problem(problem, base_dir="."):
    """Structural checks on a problem block; returns the block with defaults applied."""
    if not isinstance(problem, dict):
        raise ConfigError("problem: expected a table")
    problem = _merge(DEFAULTS["problem"], problem)
    dim = _num(problem, "dim", "problem", integer=True)
    if dim < 3:
        raise ConfigError("problem.dim: dim must be ≥ 3")
    eps = _num(problem, "eps", "problem")
    if eps < 0:
        raise ConfigError("problem.eps: must be non-negative")
    if eps >= 4.0 / (dim - 2):
        raise ConfigError("problem.eps: p - eps must exceed 1")
    dom = problem["domain"]
    if not isinstance(dom, dict):
        raise ConfigError("problem.domain: expected a table")
    if "dim" in dom and dom["dim"] != dim:
        raise ConfigError(f"problem.domain.dim: {dom['dim']} does not match problem.dim = {dim}")
    kind = dom.get("kind")
    if kind not in ("ball", "annulus"):
        raise ConfigError(f"problem.domain.kind: expected 'ball' or 'annulus', got {kind!r}")
    R = _num(dom, "radius", "problem.domain", positive=True)
    if kind == "annulus":
        r0 = _num(dom, "inner", "problem.domain", positive=True)
        if not r0 < R:
            raise ConfigError("problem.domain.inner: must be smaller than radius")
    pot = problem["potential"]
    if not isinstance(pot, dict):
        raise ConfigError("problem.potential: expected a table")
    fam = pot.get("family")
    if fam == "constant":
        c = _num(pot, "c", "problem.potential")
        if not c > 0:
            raise ConfigError("problem.potential.c: V must be positive")
    elif fam == "quadratic_well":
        _num(pot, "v0", "problem.potential")
        _num(pot, "curvature", "problem.potential")
        _vector(pot.get("center", [0.0]), "problem.potential.center", dim)
    elif fam == "radial_table":
        if "file" in pot:
            _read_table(pot["file"], base_dir, "problem.potential.file")
        else:
            _vector(pot.get("r"), "problem.potential.r")
            _vector(pot.get("v"), "problem.potential.v")
    else:
        raise ConfigError(f"problem.potential.family: unknown family {fam!r}")
    u0 = problem["u0"]
    if not isinstance(u0, dict):
        raise ConfigError("problem.u0: expected a table")
    src = u0.get("source", "none")
    if src not in ("none", "radial_pde", "file"):
        raise ConfigError(f"problem.u0.source: expected none, radial_pde or file, got {src!r}")
    if src == "file":
        if "path" not in u0:
            raise ConfigError("problem.u0.path: missing required key")
        _read_table(u0["path"], base_dir, "problem.u0.path")
    if src == "radial_pde" and kind != "annulus":
        raise ConfigError("problem.u0.source: radial_pde residual mass needs an annulus "
                          "(a ball with V > 0 has no positive solution at eps = 0)")
    return problem


def build_potential(pot, dim=None, base_dir="."):
    fam = pot["family"]
    if fam == "constant":
        return ConstantPotential(float(pot["c"]))
    if fam == "quadratic_well":
        return QuadraticWell(float(pot["v0"]), tuple(float(x) for x in pot.get("center", [0.0])),
                             float(pot["curvature"]))
    if "file" in pot:
        data = _read_table(pot["file"], base_dir, "problem.potential.file")
        return RadialTable(data[:, 0], data[:, 1])
    return RadialTable(pot["r"], pot["v"])


def build_problem(problem, eps=None, base_dir="."):
    """ProblemSpec from a validated problem block; solves for u0 when asked."""
    problem = validate_problem(problem, base_dir)
    dim = int(problem["dim"])
    dom = problem["domain"]
    domain = (DomainSpec.ball(dim, float(dom["radius"])) if dom["kind"] == "ball"
              else DomainSpec.annulus(dim, float(dom["inner"]), float(dom["radius"])))
    pot = build_potential(problem["potential"], dim, base_dir)
    e = float(problem["eps"]) if eps is None else float(eps)
    try:
        if pot.min_on(domain) <= 0:
            raise ConfigError("problem.potential: V must be positive on the domain")
    except ConfigError:
        raise
    except BubbleLabError as exc:
        raise ConfigError(f"problem.potential: {exc}") from None
    u0 = None
    src = problem["u0"].get("source", "none")
    if src == "file":
        data = _read_table(problem["u0"]["path"], base_dir, "problem.u0.path")
        if data.shape[1] < 3:
            raise ConfigError("problem.u0.path: expected columns r, u, du")
        u0 = RadialFunction(data[:, 0], data[:, 1], data[:, 2])
    elif src == "radial_pde":
        from .radial_pde import solve_radial
        base = ProblemSpec(domain, 0.0, pot)
        u0 = solve_radial(base, 0.0).as_function()
    elif "inline" in problem["u0"]:
        d = problem["u0"]["inline"]
        u0 = RadialFunction(np.asarray(d["r"]), np.asarray(d["u"]), np.asarray(d["du"]))
    return ProblemSpec(domain, e, pot, u0)


def _load_text(path):
    if not os.path.exists(path):
        raise ConfigError(f"config: file {path!r} does not exist")
    with open(path, "rb") as fh:
        raw = fh.read()
    ext = os.path.splitext(path)[1].lower()
    if ext == ".toml":
        try:
            import tomllib as toml
        except ImportError:
            import tomli as toml
        try:
            return toml.loads(raw.decode("utf-8"))
        except toml.TOMLDecodeError as exc:
            raise ConfigError(f"config: TOML syntax error: {exc}") from None
    if ext in (".yaml", ".yml"):
        import yaml
        try:
            return yaml.safe_load(raw) or {}
        except yaml.YAMLError as exc:
            raise ConfigError(f"config: YAML syntax error: {exc}") from None
    if ext == ".json":
        return json.loads(raw)
    raise ConfigError(f"config: unsupported extension {ext!r} (use .toml, .yaml or .json)")


def parse_config(path) -> RunConfig:
    data = _load_text(path)
    return config_from_dict(data, base_dir=os.path.dirname(os.path.abspath(path)))


def config_from_dict(data, base_dir=".") -> RunConfig:
    if not isinstance(data, dict):
        raise ConfigError("config: top level must be a table")
    unknown = set(data) - {"problem", "task", "output"}
    if unknown:
        raise ConfigError(f"{sorted(unknown)[0]}: unknown top-level block")
    if "problem" not in data:
        raise ConfigError("problem: missing required block")
    problem = validate_problem(data["problem"], base_dir)
    task = data.get("task", {}) or {}
    if not isinstance(task, dict):
        raise ConfigError("task: expected a table")
    for key in ("center", "site"):
        if key in task:
            _vector(task[key], f"task.{key}", problem["dim"])
    for k, b in enumerate(task.get("bubbles", []) or []):
        if "center" in b:
            _vector(b["center"], f"task.bubbles[{k}].center", problem["dim"])
    output = _merge(DEFAULTS["output"], data.get("output", {}) or {})
    if output.get("format") not in FORMATS:
        raise ConfigError(f"output.format: expected one of {FORMATS}, got {output.get('format')!r}")
    if "path" in output:
        parent = os.path.dirname(os.path.abspath(os.path.join(base_dir, output["path"])))
        if not os.path.isdir(parent):
            raise ConfigError(f"output.path: directory {parent!r} does not exist")
    return RunConfig(problem, task, output, base_dir)
