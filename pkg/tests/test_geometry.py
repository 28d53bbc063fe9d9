import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from fastdiff import ParameterError
from fastdiff.domains import RadialDomain
from fastdiff.geometry import (
    DIVERGENT,
    TouchingBallConfig,
    curvature_product,
    is_divergent,
    lemma71_limit_check,
    lemma_limit,
    level_area,
    monte_carlo_level_area,
    sphere_ball_area,
    sphere_ball_areas,
    unit_ball_volume,
)

CONFIGS = [
    TouchingBallConfig(RadialDomain.exterior_ball(1.0, 2), 0.5),
    TouchingBallConfig(RadialDomain.ball(2.0, 2), 1.0),
    TouchingBallConfig(RadialDomain.annulus(1.0, 3.0, 2), 0.5),
    TouchingBallConfig(RadialDomain.annulus(1.0, 3.0, 2), 0.5, touch=3.0),
    TouchingBallConfig(RadialDomain.exterior_ball(1.0, 3), 0.5),
    TouchingBallConfig(RadialDomain.ball(2.0, 3), 1.0),
    TouchingBallConfig(RadialDomain.annulus(1.0, 3.0, 3), 0.5),
    TouchingBallConfig(RadialDomain.annulus(1.0, 3.0, 3), 0.5, touch=3.0),
]


def test_unit_ball_volume():
    assert unit_ball_volume(0) == 1.0
    assert unit_ball_volume(1) == pytest.approx(2.0)
    assert unit_ball_volume(2) == pytest.approx(math.pi)
    assert unit_ball_volume(3) == pytest.approx(4 * math.pi / 3)


@given(st.integers(2, 40))
def test_unit_ball_recursion(k):
    assert unit_ball_volume(k) == pytest.approx(2 * math.pi / k * unit_ball_volume(k - 2), rel=1e-12)


def test_curvature_product():
    assert curvature_product(0.5, [-1.0]) == pytest.approx(3.0)
    assert curvature_product(2.0, [0.0, 0.0]) == pytest.approx(0.25)
    assert curvature_product(1.0, [1.0]) is DIVERGENT
    with pytest.raises(ParameterError):
        curvature_product(1.0, [1.5])


@given(st.floats(0.05, 5.0), st.floats(0.01, 3.0), st.floats(0.05, 3.0))
def test_two_dimensional_arc(r, D, R):
    # exact intersection arc of a circle with a disc, written independently
    if abs(r - D) >= R or r + D <= R:
        return
    cos_a = (r * r + D * D - R * R) / (2 * r * D)
    assert sphere_ball_area(r, D, R, 2) == pytest.approx(2 * r * math.acos(cos_a), rel=1e-9, abs=1e-12)


@given(st.floats(0.05, 5.0), st.floats(0.01, 3.0), st.floats(0.05, 3.0))
def test_three_dimensional_cap(r, D, R):
    # classical cap area 2 pi r h
    if abs(r - D) >= R or r + D <= R:
        return
    h = r - (r * r + D * D - R * R) / (2 * D)
    assert sphere_ball_area(r, D, R, 3) == pytest.approx(2 * math.pi * r * h, rel=1e-9, abs=1e-12)


def test_vectorised_areas_match_scalar():
    r = np.linspace(1.0, 2.0, 50)
    for N in (2, 3):
        expected = [sphere_ball_area(x, 1.5, 0.5, N) for x in r]
        np.testing.assert_allclose(sphere_ball_areas(r, 1.5, 0.5, N), expected, rtol=1e-12, atol=1e-15)


def test_reference_limits():
    ext = TouchingBallConfig(RadialDomain.exterior_ball(1.0, 2), 0.5)
    assert lemma_limit(ext) == pytest.approx(2 * math.sqrt(2) / math.sqrt(3), rel=1e-14)
    ball3 = TouchingBallConfig(RadialDomain.ball(2.0, 3), 1.0)
    assert lemma_limit(ball3) == pytest.approx(4 * math.pi, rel=1e-14)
    assert is_divergent(lemma_limit(TouchingBallConfig(RadialDomain.ball(1.0, 2), 1.0)))


def test_flat_limit_chord():
    # a huge ball is locally a half-plane; the chord at depth s is 2 sqrt(2 R s - s^2)
    cfg = TouchingBallConfig(RadialDomain.ball(1e6, 2), 1.0)
    for s in (1e-4, 1e-2, 0.3):
        assert level_area(cfg, s) == pytest.approx(2 * math.sqrt(2 * s - s * s), rel=1e-5)
    assert lemma71_limit_check(cfg, [1e-6]).scaled[-1] == pytest.approx(2 * math.sqrt(2), rel=1e-5)


@pytest.mark.parametrize("cfg", CONFIGS, ids=lambda c: f"{c.domain.shape.value}-N{c.N}-touch{c.touch}")
def test_lemma_limit(cfg):
    s = [x * cfg.R for x in (1e-1, 1e-2, 1e-3, 1e-4)]
    table = lemma71_limit_check(cfg, s)
    assert table.relative_error[-1] < 1e-2
    # O(s^(1/2)) or better: quartering s at least halves the error
    small = lemma71_limit_check(cfg, [4e-4 * cfg.R, 1e-4 * cfg.R]).relative_error
    assert small[0] / small[1] >= 1.8


@pytest.mark.parametrize("cfg", CONFIGS, ids=lambda c: f"{c.domain.shape.value}-N{c.N}-touch{c.touch}")
def test_monte_carlo_agreement(cfg, rng):
    for s in (1e-2 * cfg.R, 1e-1 * cfg.R):
        est, se = monte_carlo_level_area(cfg, s, 400_000, rng)
        assert abs(est - level_area(cfg, s)) <= 3 * se


def test_area_vanishes_at_far_tangency(rng):
    # the level set grows until s ~ R and leaves the probe ball at s = 2R
    cfg = TouchingBallConfig(RadialDomain.exterior_ball(1.0, 3), 0.5)
    a_mid, a_far = level_area(cfg, 0.5 * cfg.R), level_area(cfg, 1.99 * cfg.R)
    assert a_far < a_mid
    est, se = monte_carlo_level_area(cfg, 1.99 * cfg.R, 1_000_000, rng)
    assert abs(est - a_far) <= 3 * se


def test_area_continuous_in_s():
    cfg = CONFIGS[4]
    s = np.linspace(0.01, 0.99, 300)
    a = np.array([level_area(cfg, x) for x in s])
    assert np.all(a > 0)
    assert np.max(np.abs(np.diff(a))) < 0.02


def test_degenerate_and_range_errors():
    deg = TouchingBallConfig(RadialDomain.ball(1.0, 2), 1.0)
    assert deg.degenerate
    assert lemma71_limit_check(deg, [1e-3]).divergent
    cfg = CONFIGS[0]
    with pytest.raises(ParameterError):
        level_area(cfg, 0.0)
    with pytest.raises(ParameterError):
        level_area(cfg, 2 * cfg.R)
    with pytest.raises(ParameterError):
        TouchingBallConfig(RadialDomain.ball(1.0, 2), 1.5)
    with pytest.raises(ParameterError):
        TouchingBallConfig(RadialDomain.annulus(1.0, 2.0, 2), 0.6)
