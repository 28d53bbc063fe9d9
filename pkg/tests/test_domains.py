import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from fastdiff import ParameterError
from fastdiff.domains import GridSpec, RadialDomain, RadialField, Shape, graded_distances, split_counts


def test_curvature_signs():
    assert RadialDomain.ball(2.0, 3).curvatures_at(2.0) == (0.5, 0.5)
    assert RadialDomain.exterior_ball(1.0, 2).curvatures_at(1.0) == (-1.0,)
    ann = RadialDomain.annulus(1.0, 4.0, 2)
    assert ann.curvatures_at(4.0) == (0.25,)
    assert ann.curvatures_at(1.0) == (-1.0,)
    with pytest.raises(ParameterError):
        ann.curvatures_at(2.0)


def test_distances():
    ann = RadialDomain.annulus(1.0, 3.0, 2)
    r = np.array([0.5, 1.0, 1.5, 2.0, 2.5, 3.0, 3.5])
    np.testing.assert_allclose(ann.signed_distance(r), [-0.5, 0, 0.5, 1, 0.5, 0, -0.5])
    assert ann.contains(2.0) and not ann.contains(3.5)
    ext = RadialDomain.exterior_ball(1.0)
    assert ext.distance(5.0) == pytest.approx(4.0)
    assert RadialDomain.ball(1.0).signed_distance(0.25) == pytest.approx(0.75)


@pytest.mark.parametrize("bad", [dict(shape=Shape.BALL, dimension=1, radii=(1.0,)),
                                 dict(shape=Shape.BALL, dimension=2, radii=(-1.0,)),
                                 dict(shape=Shape.ANNULUS, dimension=2, radii=(2.0, 1.0))])
def test_invalid_domains(bad):
    with pytest.raises(ParameterError):
        RadialDomain(**bad)


def test_domain_round_trip():
    d = RadialDomain.annulus(1.0, 2.0, 3)
    assert RadialDomain.from_dict(d.to_dict()) == d


@given(st.floats(1e-10, 1e-4), st.floats(0.1, 10.0), st.integers(50, 3000))
def test_graded_distances(d_min, d_max, n):
    d = graded_distances(d_min, d_max, n)
    w = np.diff(d)
    assert d[0] == 0.0 and d[-1] == pytest.approx(d_max, rel=1e-12)
    assert np.all(w > 0)
    # geometric widths: constant ratio
    ratios = w[1:] / w[:-1]
    assert np.ptp(ratios[:-1]) < 1e-6 * ratios.max()


def test_graded_distances_ratio_cap():
    with pytest.raises(ParameterError):
        graded_distances(1e-9, 1.0, 50, max_ratio=1.05)
    d = graded_distances(1e-9, 1.0, 1000, max_ratio=1.05)
    assert np.max(np.diff(d)[1:] / np.diff(d)[:-1]) <= 1.05


def test_split_counts():
    assert sum(split_counts(101, [1, 2, 3])) == 101
    assert split_counts(10, [1, 1]) == [5, 5]


def test_gridspec_validation_and_refinement():
    g = GridSpec(n_space=100, n_time=50)
    assert g.refined(2).n_space == 200 and g.refined(2).n_time == 100
    for bad in (dict(n_space=1), dict(n_time=1), dict(refinement_ratio=0.9)):
        with pytest.raises(ParameterError):
            GridSpec(**bad)


def test_field_is_immutable_and_interpolates():
    dom = RadialDomain.ball(1.0)
    r = np.linspace(0, 1, 11)
    f = RadialField(r, r ** 2, dom, 0.5)
    with pytest.raises(ValueError):
        f.values[0] = 1.0
    assert f.interpolate(0.55) == pytest.approx(0.5 * (0.25 + 0.36))
    with pytest.raises(ParameterError):
        RadialField(r[::-1], r, dom)
