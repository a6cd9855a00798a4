import os
import sys

import numpy as np
import pytest

sys.path.insert(0, os.path.dirname(__file__))

from bubblelab.geometry import DomainSpec, ProblemSpec
from bubblelab.potentials import ConstantPotential


def make_problem(n, eps=0.0, kind="ball", inner=0.5, radius=1.0, potential=None, u0=None):
    dom = DomainSpec.ball(n, radius) if kind == "ball" else DomainSpec.annulus(n, inner, radius)
    return ProblemSpec(dom, eps, potential or ConstantPotential(1.0), u0)


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


@pytest.fixture(scope="session")
def annulus_u0_n5():
    from bubblelab.radial_pde import solve_radial
    return solve_radial(make_problem(5, kind="annulus"), 0.0)


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    if mod is None or not getattr(mod, "RESULTS", None):
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(mod.RESULTS):
        terminalreporter.write_line(mod.RESULTS[k])
