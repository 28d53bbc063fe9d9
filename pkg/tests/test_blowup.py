import numpy as np
import pytest

from fastdiff import DiffusionModel, ParameterError, blowup_constant
from fastdiff.blowup_elliptic import boundary_rate_report, elliptic_residual, shoot_ball_blowup, solve_blowup
from fastdiff.domains import RadialDomain
from fastdiff.kernels import Operator

# centre values v(0) on the unit ball by forward shooting (independent of the finite-volume solver)
SHOOTING_CENTRE = {
    (1.5, 2): 18.79338755424503,
    (1.5, 3): 31.412606533614248,
    (0.5, 2): 39.45993748727564,
    (0.5, 3): 61.76338472179234,
}

MODELS = {1.5: DiffusionModel.plaplace(1.5), 0.5: DiffusionModel.porous_medium(0.5)}


@pytest.fixture(scope="module")
def ball_solutions():
    dom = RadialDomain.ball(1.0, 2)
    return {e: solve_blowup(m, dom, 1e-4) for e, m in MODELS.items()}


@pytest.mark.parametrize("e", [1.5, 0.5])
def test_boundary_rate(ball_solutions, e):
    model, field = MODELS[e], ball_solutions[e]
    (rate,) = boundary_rate_report(field, model, d_max=1e-3)
    sel = (rate.d >= 1e-4 * (1 - 1e-9)) & (rate.d <= 1e-3)
    assert sel.sum() > 10
    np.testing.assert_allclose(rate.ratio[sel], blowup_constant(model), rtol=5e-2)
    assert np.all(rate.ratio > 0) and np.all(np.isfinite(rate.ratio))


@pytest.mark.parametrize("e", [1.5, 0.5])
def test_positive_and_monotone(ball_solutions, e):
    field = ball_solutions[e]
    assert np.all(field.values > 0)
    assert np.all(np.diff(field.values) > 0)  # increasing toward the blow-up sphere
    assert field.meta["residual"] < 1e-9
    assert np.max(np.abs(elliptic_residual(field, MODELS[e]))) < 1e-9


@pytest.mark.parametrize("e,N", sorted(SHOOTING_CENTRE))
def test_centre_value_against_shooting(e, N):
    field = solve_blowup(MODELS[e], RadialDomain.ball(1.0, N), 1e-4)
    assert field.values[0] == pytest.approx(SHOOTING_CENTRE[e, N], rel=2e-4)


@pytest.mark.parametrize("e", [1.5, 0.5])
def test_delta_halving(ball_solutions, e):
    field = ball_solutions[e]
    half = solve_blowup(MODELS[e], field.domain, 5e-5)
    sel = field.domain.distance(field.r) >= 1e-3
    np.testing.assert_allclose(half.interpolate(field.r[sel]), field.values[sel], rtol=1e-2)


def test_annulus_rates_agree():
    model = MODELS[1.5]
    field = solve_blowup(model, RadialDomain.annulus(1.0, 2.0, 3), 1e-4)
    rates = boundary_rate_report(field, model, d_max=1e-3)
    assert len(rates) == 2
    for rate in rates:
        assert rate.ratio[0] == pytest.approx(3.0, rel=1e-2)
    assert rates[0].ratio[0] == pytest.approx(rates[1].ratio[0], rel=1e-2)


@pytest.mark.parametrize("e", [1.5, 0.5])
def test_exterior_far_field(e):
    dom = RadialDomain.exterior_ball(1.0, 2)
    a = solve_blowup(MODELS[e], dom, 1e-4)
    b = solve_blowup(MODELS[e], dom, 1e-4, r_infinity=200.0)
    r = np.array([1.05, 1.5, 2.0, 4.0])
    np.testing.assert_allclose(b.interpolate(r), a.interpolate(r), rtol=1e-2)
    assert np.all(a.values[:-1] > 0) and np.all(np.diff(a.values) < 0)


@pytest.mark.parametrize("e", [1.5, 0.5])
def test_separable_solution_solves_parabolic_equation(ball_solutions, e):
    # V(x, t) = t^q v(x) with q = 1/(2-p) (or 1/(1-m)) satisfies the evolution equation;
    # checked with the same finite-volume operator: vol * V_t = (face flux differences)
    model, field = MODELS[e], ball_solutions[e]
    q = model.separable_exponent
    op = Operator(model, field.r, 2, sigma=field.meta["sigma"], floor=1e-30)
    v = np.array(field.values)
    t, dt = 0.3, 1e-5
    Vt = ((t + dt) ** q - (t - dt) ** q) / (2 * dt) * v
    V = t ** q * v
    zero = np.zeros_like(v)
    op.assemble(V, 0.0, zero)
    div = -op.res  # a0 = 0, rhs = 0 leaves minus the flux divergence
    scale = op.residual_scale(V, 0.0, zero)
    interior = slice(1, -1)
    assert np.max(np.abs(op.vol[interior] * Vt[interior] - div[interior]) / scale[interior]) < 1e-6


def test_invalid_offset():
    with pytest.raises(ParameterError):
        solve_blowup(MODELS[1.5], RadialDomain.ball(1.0), 0.0)
    with pytest.raises(ParameterError):
        solve_blowup(MODELS[1.5], RadialDomain.exterior_ball(1.0), 1e-4, r_infinity=1.0)
