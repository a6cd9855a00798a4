import numpy as np
import pytest

from conftest import make_problem
from bubblelab.bubbles import Bubble, eval_delta, eval_pdelta
from bubblelab.constants import c0
from bubblelab.errors import BracketError, ContractError, ModelMismatchError
from bubblelab.potentials import ConstantPotential
from bubblelab.radial_pde import (WINDOW, FitTemplate, RadialProfile, continue_in_eps,
                                  extract_rate_law, fit_decomposition, solve_ivp_profile, solve_radial)

LADDER = [0.2, 0.1, 0.05, 0.025]


@pytest.fixture(scope="module")
def ball5():
    return make_problem(5)


@pytest.fixture(scope="module")
def ball5_eps01(ball5):
    return solve_radial(ball5, 0.1)


@pytest.fixture(scope="module")
def branch5(ball5):
    return continue_in_eps(ball5, LADDER)


def _ray(n, r):
    x = np.zeros((len(r), n))
    x[:, 0] = r
    return x


def _synthetic(dom, bubble, r, alpha=1.0, u0=None, alpha0=1.0):
    n = dom.dim
    h = 1e-7
    f = lambda s: alpha * eval_pdelta(bubble, dom, _ray(n, s), floor=0.0)
    lo = np.clip(r - h, r[0], r[-1])
    hi = np.clip(r + h, r[0], r[-1])
    u = f(r)
    du = (f(hi) - f(lo)) / (hi - lo)
    if u0 is not None:
        u = u + alpha0 * u0.value(r)
        du = du + alpha0 * u0.slope(r)
    return RadialProfile(r, u, du, n, 0.0, float(u.max()), 0.0, 0.0, True, dom.kind)


def test_ivp_bubble_satisfies_limit_equation():
    n, peak = 5, 100.0
    prof = solve_ivp_profile(n, ConstantPotential(0.0), 0.0, peak, 20.0)
    assert prof.ode_residual < 1e-8
    lam = (peak / c0(n)) ** (2 / (n - 2))
    exact = eval_delta(Bubble((0.0,) * n, lam), _ray(n, prof.r))
    assert np.max(np.abs(prof.u - exact)) < 1e-8 * peak


def test_ball_solution_n5(ball5_eps01):
    p = ball5_eps01
    assert p.positive and p.invariants_hold()
    assert p.boundary_residual < 1e-8 and p.ode_residual < 1e-8
    inner = p.u[p.r < 0.999]
    assert np.all(np.diff(inner) < 0)


def test_annulus_residual_mass_profile(annulus_u0_n5):
    p = annulus_u0_n5
    assert p.kind == "annulus" and p.positive
    assert p.boundary_residual < 1e-8 and p.ode_residual < 1e-8
    assert p.u[0] == 0.0
    assert abs(p.u[-1]) < 1e-8 * p.peak
    assert np.all(p.u[1:-1] > 0)


def test_rk_tolerance_halving_stable(ball5, ball5_eps01):
    finer = solve_radial(ball5, 0.1, rtol=0.5e-12)
    assert abs(finer.peak - ball5_eps01.peak) < 1e-6 * ball5_eps01.peak


def test_scaling_covariance(ball5_eps01):
    t, n, eps = 2.0, 5, 0.1
    q = (n + 2) / (n - 2) - eps
    scaled = make_problem(n, radius=1.0 / t, potential=ConstantPotential(t * t))
    p = solve_radial(scaled, eps)
    expected = t ** (2 / (q - 1)) * ball5_eps01.shooting_value
    assert abs(p.shooting_value / expected - 1) < 1e-8
    r = np.linspace(0, 0.45, 10)
    a = p.as_function().value(r)
    b = t ** (2 / (q - 1)) * ball5_eps01.as_function().value(t * r)
    assert np.max(np.abs(a - b)) < 1e-8 * p.peak


def test_bracket_without_sign_change(ball5):
    with pytest.raises(BracketError):
        solve_radial(ball5, 0.1, bracket=(1e-3, 1e-1))


def test_continuation_peak_increases(branch5):
    assert branch5.complete and len(branch5.points) == 4
    peaks = [p.profile.peak for p in branch5.points]
    assert all(b > a for a, b in zip(peaks, peaks[1:]))
    for p in branch5.points:
        assert p.profile.invariants_hold()


def test_single_rung_equals_direct_solve(ball5, ball5_eps01):
    br = continue_in_eps(ball5, [0.1], fit=False)
    assert br.complete
    np.testing.assert_array_equal(br.points[0].profile.u, ball5_eps01.u)
    assert br.points[0].profile.shooting_value == ball5_eps01.shooting_value


def test_critical_rung_on_ball_is_lost(ball5):
    br = continue_in_eps(ball5, [0.1, 0.0], fit=False)
    assert not br.complete
    assert br.lost_at == 0.0
    assert len(br.points) == 1 and br.points[0].eps == 0.1


def test_ladder_must_decrease(ball5):
    with pytest.raises(ContractError):
        continue_in_eps(ball5, [0.05, 0.1])


def test_fit_round_trip_single_bubble():
    prob = make_problem(5)
    dom = prob.domain
    r = np.unique(np.concatenate([np.geomspace(1e-5, 1.0, 3000), np.linspace(0, 1, 500)]))
    prof = _synthetic(dom, Bubble((0.0,) * 5, 50.0), r)
    fit = fit_decomposition(prof, prob)
    assert fit.lambda_fit == pytest.approx(50.0, rel=1e-2)
    assert fit.alpha_fit == pytest.approx(1.0, rel=1e-2)
    assert fit.residual < 0.05


def test_fit_round_trip_composite(annulus_u0_n5):
    prob = make_problem(5, kind="annulus")
    dom = prob.domain
    u0 = annulus_u0_n5.as_function()
    r = np.unique(np.concatenate([0.75 + np.geomspace(1e-5, 0.25, 1500), 0.75 - np.geomspace(1e-5, 0.25, 1500),
                                  np.linspace(0.5, 1.0, 500)]))
    prof = _synthetic(dom, Bubble((0.75,) + (0.0,) * 4, 60.0), r, alpha=0.9, u0=u0, alpha0=1.1)
    fit = fit_decomposition(prof, prob, FitTemplate(u0=u0))
    assert fit.lambda_fit == pytest.approx(60.0, rel=2e-2)
    assert fit.alpha_fit == pytest.approx(0.9, rel=2e-2)
    assert fit.alpha0_fit == pytest.approx(1.1, rel=2e-2)
    assert fit.center_fit == pytest.approx(0.75, rel=2e-2)


def test_fit_rejects_zero_profile():
    prob = make_problem(5)
    r = np.linspace(0, 1, 50)
    z = np.zeros_like(r)
    with pytest.raises(ModelMismatchError):
        fit_decomposition(RadialProfile(r, z, z, 5, 0.0, 0.0, 0.0, 0.0, False), prob)


def test_peak_law_matches_fit_inside_window(ball5):
    prof = solve_radial(ball5, 0.005)
    fit = fit_decomposition(prof, ball5)
    assert fit.window > WINDOW
    assert abs(fit.lambda_peak / fit.lambda_fit - 1) < 0.03
    assert fit.residual < 0.05


def test_branch_fit_residuals_small(branch5):
    for p in branch5.points:
        assert p.fit.residual < 0.2


def test_rate_law_constant_sequence():
    rl = extract_rate_law([(0.1, 2.5), (0.05, 2.5), (0.025, 2.5)])
    assert rl.limit == 2.5 and rl.half_width == 0.0 and rl.verdict == "OK"


def test_rate_law_recovers_power_model():
    eps = [0.2, 0.1, 0.05, 0.025, 0.0125]
    rl = extract_rate_law([(e, 3.0 + 2.0 * e ** 0.7) for e in eps])
    assert rl.verdict == "OK"
    assert rl.limit == pytest.approx(3.0, abs=1e-6)
    assert rl.kappa == pytest.approx(0.7, abs=1e-4)


def test_rate_law_non_monotone_inconclusive():
    rl = extract_rate_law([(0.2, 3.0), (0.1, 2.0), (0.05, 2.5), (0.025, 2.2)])
    assert rl.verdict == "INCONCLUSIVE"
    assert "monotone" in rl.note


def test_rate_law_needs_three_rungs():
    with pytest.raises(ContractError):
        extract_rate_law([(0.1, 1.0), (0.05, 1.0)])
