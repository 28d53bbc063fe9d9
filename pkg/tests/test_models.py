import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fastdiff import DiffusionModel, Kind, ParameterError, blowup_constant
from fastdiff.models import log_blowup_constant

p_values = st.floats(1.02, 1.98)
m_values = st.floats(0.02, 0.98)


def test_reference_constants():
    assert blowup_constant(DiffusionModel.plaplace(1.5)) == pytest.approx(3.0, rel=1e-14)
    assert blowup_constant(DiffusionModel.porous_medium(0.5)) == pytest.approx(9.0, rel=1e-14)


@pytest.mark.parametrize("p", [1.0, 2.0, 0.5, 2.5, math.nan, math.inf])
def test_plaplace_range(p):
    with pytest.raises(ParameterError):
        DiffusionModel.plaplace(p)


@pytest.mark.parametrize("m", [0.0, 1.0, -0.2, 1.5, math.nan])
def test_porous_medium_range(m):
    with pytest.raises(ParameterError):
        DiffusionModel.porous_medium(m)


@given(p_values)
def test_plaplace_constant_solves_power_law_ode(p):
    # v = c d^-k solves (|v'|^(p-2) v')' = v/(2-p) in one dimension iff
    # c^(2-p) = k^(p-1) (k+1) (p-1) (2-p)
    model = DiffusionModel.plaplace(p)
    k = model.decay_exponent
    assert k == pytest.approx(p / (2 - p))
    c = blowup_constant(model)
    assert c ** (2 - p) == pytest.approx(k ** (p - 1) * (k + 1) * (p - 1) * (2 - p), rel=1e-11)


@given(st.floats(0.02, 0.9))
def test_pme_constant_solves_power_law_ode(m):
    # w = c d^-k solves (w^m)'' = w/(1-m) iff c^(1-m) = k m (k m + 1) (1-m)
    model = DiffusionModel.porous_medium(m)
    k = model.decay_exponent
    c = blowup_constant(model)
    assert c ** (1 - m) == pytest.approx(k * m * (k * m + 1) * (1 - m), rel=1e-10)


def test_pme_constant_overflow_is_reported():
    model = DiffusionModel.porous_medium(0.999)
    assert math.isfinite(log_blowup_constant(model))
    with pytest.raises(OverflowError):
        blowup_constant(model)


@given(p_values, st.integers(2, 6))
def test_plaplace_exponents(p, N):
    model = DiffusionModel.plaplace(p)
    assert model.theta(N) == pytest.approx((N + 1) / (2 * p))
    assert model.alpha_threshold(N) == pytest.approx((N + 1) * (2 - p) / (2 * p))
    assert model.similarity_exponent == pytest.approx(1 / p)
    assert model.separable_exponent == pytest.approx(1 / (2 - p))


@given(m_values, st.integers(2, 6))
def test_pme_exponents(m, N):
    model = DiffusionModel.porous_medium(m)
    assert model.theta(N) == pytest.approx((N + 1) / 4)
    assert model.alpha_threshold(N) == pytest.approx((N + 1) * (1 - m) / 4)
    assert model.similarity_exponent == 0.5
    assert model.separable_exponent == pytest.approx(1 / (1 - m))
    assert model.decay_exponent == pytest.approx(2 / (1 - m))


def test_reference_threshold():
    assert DiffusionModel.plaplace(1.5).alpha_threshold(2) == pytest.approx(0.5)


def test_dict_round_trip():
    for model in (DiffusionModel.plaplace(1.3), DiffusionModel.porous_medium(0.4)):
        assert DiffusionModel.from_dict(model.to_dict()) == model
    assert DiffusionModel.plaplace(1.3).kind is Kind.PLAPLACE
