import os
from importlib import resources

import pytest

from bubblelab.config import build_problem, config_from_dict, parse_config
from bubblelab.errors import ConfigError

CONFIG_DIR = resources.files("bubblelab") / "configs"


def _write(tmp_path, name, text):
    p = tmp_path / name
    p.write_text(text)
    return str(p)


def test_minimal_ball_config_gets_defaults(tmp_path):
    rc = parse_config(_write(tmp_path, "c.toml", "[problem]\ndim = 5\n"))
    assert rc.problem["domain"] == {"kind": "ball", "radius": 1.0}
    assert rc.problem["potential"] == {"family": "constant", "c": 1.0}
    assert rc.problem["eps"] == 0.0
    assert rc.problem["u0"] == {"source": "none"}
    assert rc.output["format"] == "json"
    prob = rc.build_problem()
    assert prob.dim == 5 and prob.domain.kind == "ball" and prob.u0 is None


def test_yaml_matches_toml(tmp_path):
    a = parse_config(_write(tmp_path, "a.toml", "[problem]\ndim = 6\neps = 0.01\n"))
    b = parse_config(_write(tmp_path, "b.yaml", "problem:\n  dim: 6\n  eps: 0.01\n"))
    assert a.to_dict() == b.to_dict()


def test_dim_two_rejected(tmp_path):
    with pytest.raises(ConfigError, match="dim must be ≥ 3") as info:
        parse_config(_write(tmp_path, "c.toml", "[problem]\ndim = 2\n"))
    assert "problem.dim" in str(info.value)


def test_nonpositive_constant_potential_rejected():
    for c in (0.0, -1.0):
        with pytest.raises(ConfigError, match="V must be positive") as info:
            config_from_dict({"problem": {"dim": 5, "potential": {"family": "constant", "c": c}}})
        assert "problem.potential.c" in str(info.value)


def test_well_negative_on_domain_rejected():
    block = {"dim": 5, "potential": {"family": "quadratic_well", "v0": 0.1, "curvature": -1.0}}
    with pytest.raises(ConfigError, match="V must be positive"):
        build_problem(block)


@pytest.mark.parametrize("data,key", [
    ({"problem": {"dim": 5, "domain": {"kind": "cube", "radius": 1.0}}}, "problem.domain.kind"),
    ({"problem": {"dim": 5, "domain": {"kind": "annulus", "radius": 1.0}}}, "problem.domain.inner"),
    ({"problem": {"dim": 5, "domain": {"kind": "annulus", "inner": 2.0, "radius": 1.0}}},
     "problem.domain.inner"),
    ({"problem": {"dim": 5, "domain": {"kind": "ball", "radius": 1.0, "dim": 6}}}, "problem.domain.dim"),
    ({"problem": {"dim": "five"}}, "problem.dim"),
    ({"problem": {"dim": 5, "eps": -0.1}}, "problem.eps"),
    ({"problem": {"dim": 5, "potential": {"family": "cubic"}}}, "problem.potential.family"),
    ({"problem": {"dim": 5, "u0": {"source": "file", "path": "missing.csv"}}}, "problem.u0.path"),
    ({"problem": {"dim": 5, "u0": {"source": "radial_pde"}}}, "problem.u0.source"),
    ({"problem": {"dim": 5}, "task": {"center": [0.1] * 6}}, "task.center"),
    ({"problem": {"dim": 5}, "output": {"format": "xml"}}, "output.format"),
    ({"problem": {"dim": 5}, "extra": {}}, "extra"),
    ({"task": {}}, "problem"),
])
def test_errors_name_the_key(data, key):
    with pytest.raises(ConfigError) as info:
        config_from_dict(data)
    assert str(info.value).startswith(key)


def test_table_files_resolve_relative_to_config(tmp_path):
    (tmp_path / "v.csv").write_text("# r,v\n0,1.0\n0.5,1.2\n1.0,1.5\n")
    rc = parse_config(_write(tmp_path, "c.toml",
                             '[problem]\ndim = 5\n[problem.potential]\nfamily = "radial_table"\nfile = "v.csv"\n'))
    prob = rc.build_problem()
    assert prob.potential.value([0.0] * 5) == pytest.approx(1.0)


def test_missing_file_and_bad_syntax(tmp_path):
    with pytest.raises(ConfigError, match="does not exist"):
        parse_config(str(tmp_path / "nope.toml"))
    with pytest.raises(ConfigError, match="TOML syntax"):
        parse_config(_write(tmp_path, "bad.toml", "[problem\n"))
    with pytest.raises(ConfigError, match="unsupported extension"):
        parse_config(_write(tmp_path, "c.ini", "x"))


@pytest.mark.parametrize("name", ["ball_n5_rate_law.toml", "boundary_n7.toml", "annulus_lowdim.yaml"])
def test_shipped_configs_parse(name):
    with resources.as_file(CONFIG_DIR / name) as path:
        rc = parse_config(str(path))
    assert rc.problem["dim"] >= 3


def test_schema_document_shipped():
    with resources.as_file(CONFIG_DIR / "SCHEMA.md") as path:
        assert os.path.getsize(path) > 0
