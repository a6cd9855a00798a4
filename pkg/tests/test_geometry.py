import numpy as np
import pytest

from bubblelab.errors import ContractError, DegeneracyError, DomainError
from bubblelab.geometry import (DomainSpec, ball_boundary_law_ratio, boundary_normal, dist_to_boundary,
                                green_regular_part, robin_function, robin_gradient, unit)


def _random_interior(rng, dom, k):
    n = dom.dim
    pts = []
    while len(pts) < k:
        x = rng.uniform(-1, 1, n) * dom.radius
        r = np.linalg.norm(x)
        if dom.r_min + 0.05 < r < 0.95 * dom.radius:
            pts.append(x)
    return np.array(pts)


def test_dist_ball_center_and_shell():
    ball = DomainSpec.ball(5)
    assert dist_to_boundary(ball, np.zeros(5)) == 1.0
    assert dist_to_boundary(ball, 0.7 * unit(5, 2)) == pytest.approx(0.3, abs=1e-15)


def test_dist_annulus_nearer_inner_shell():
    ann = DomainSpec.annulus(5, 0.5, 1.0)
    assert dist_to_boundary(ann, 0.6 * unit(5)) == pytest.approx(0.1, abs=1e-15)


def test_dist_outside_raises():
    with pytest.raises(DomainError):
        dist_to_boundary(DomainSpec.ball(4), 1.2 * unit(4))
    with pytest.raises(DomainError):
        dist_to_boundary(DomainSpec.annulus(4, 0.5), 0.1 * unit(4))


def test_normals():
    ball = DomainSpec.ball(5)
    np.testing.assert_allclose(boundary_normal(ball, 0.9 * unit(5)), unit(5), atol=1e-15)
    ann = DomainSpec.annulus(5, 0.5, 1.0)
    np.testing.assert_allclose(boundary_normal(ann, 0.55 * unit(5)), -unit(5), atol=1e-15)
    with pytest.raises(DegeneracyError):
        boundary_normal(ball, np.zeros(5))


def test_normal_has_unit_length(rng):
    ball = DomainSpec.ball(6, 2.0)
    for x in _random_interior(rng, ball, 20):
        assert abs(np.linalg.norm(boundary_normal(ball, x)) - 1.0) < 1e-14


def test_domain_contracts():
    with pytest.raises(ContractError):
        DomainSpec.ball(2)
    with pytest.raises(ContractError):
        DomainSpec.annulus(5, 1.0, 1.0)
    with pytest.raises(ContractError):
        DomainSpec.ball(5, -1.0)


@pytest.mark.parametrize("n", [3, 5, 7])
def test_ball_H_examples(n):
    ball = DomainSpec.ball(n)
    assert green_regular_part(ball, np.zeros(n), np.zeros(n)) == pytest.approx(1.0, rel=1e-15)
    x = 0.5 * unit(n)
    assert robin_function(ball, x) == pytest.approx(0.75 ** (2 - n), rel=1e-13)


@pytest.mark.parametrize("dom", [DomainSpec.ball(5), DomainSpec.ball(7, 1.5), DomainSpec.annulus(5, 0.5),
                                 DomainSpec.annulus(6, 0.3, 2.0)])
def test_H_symmetric(dom, rng):
    pts = _random_interior(rng, dom, 24)
    for x, y in zip(pts[:12], pts[12:]):
        hxy = green_regular_part(dom, x, y)
        hyx = green_regular_part(dom, y, x)
        assert abs(hxy - hyx) <= 1e-12 * abs(hxy)


@pytest.mark.parametrize("dom", [DomainSpec.ball(5), DomainSpec.annulus(5, 0.5)])
def test_H_gradient_matches_finite_differences(dom, rng):
    n = dom.dim
    for x, y in zip(*np.split(_random_interior(rng, dom, 8), 2)):
        _, g = green_regular_part(dom, x, y, want_gradient=True)
        h = 1e-6
        fd = np.array([(green_regular_part(dom, x + h * unit(n, k), y)
                        - green_regular_part(dom, x - h * unit(n, k), y)) / (2 * h) for k in range(n)])
        assert np.linalg.norm(g - fd) <= 1e-6 * np.linalg.norm(g)


@pytest.mark.parametrize("dom", [DomainSpec.ball(5), DomainSpec.annulus(5, 0.5)])
def test_H_is_harmonic_second_order_stencil(dom):
    n = dom.dim
    y = 0.7 * unit(n) if dom.kind == "annulus" else 0.3 * unit(n)
    x = 0.75 * unit(n, 1)

    def lap(h):
        c = green_regular_part(dom, x, y)
        s = sum(green_regular_part(dom, x + h * unit(n, k), y) + green_regular_part(dom, x - h * unit(n, k), y)
                for k in range(n))
        return abs((s - 2 * n * c) / (h * h))

    hs = np.array([1e-2, 5e-3, 2.5e-3])
    res = np.array([lap(h) for h in hs])
    slope = np.polyfit(np.log(hs), np.log(res), 1)[0]
    assert abs(slope - 2.0) < 0.3


def test_annulus_truncation_bound_reported():
    dom = DomainSpec.annulus(5, 0.5)
    h, bound = green_regular_part(dom, 0.7 * unit(5), 0.8 * unit(5), return_bound=True)
    assert 0 <= bound <= 1e-12 * abs(h) * 10


@pytest.mark.parametrize("n", [5, 7])
def test_boundary_law_first_order(n):
    ds = np.array([0.04, 0.02, 0.01, 0.005])
    dev = np.array([abs(ball_boundary_law_ratio(n, d) - 1.0) for d in ds])
    assert dev[-1] < 0.05
    slope = np.polyfit(np.log(ds), np.log(dev), 1)[0]
    assert abs(slope - 1.0) < 0.1


def test_robin_gradient_total_is_twice_partial():
    dom = DomainSpec.ball(5)
    a = 0.4 * unit(5)
    h = 1e-6
    fd = (robin_function(dom, a + h * unit(5)) - robin_function(dom, a - h * unit(5))) / (2 * h)
    tot = robin_gradient(dom, a)
    assert tot[0] == pytest.approx(fd, rel=1e-7)
    np.testing.assert_allclose(robin_gradient(dom, a, total=False), 0.5 * tot, rtol=1e-14)
