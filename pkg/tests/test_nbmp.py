import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nbarrier.geometry import Region
from nbarrier.model import BoundaryState
from nbarrier.nbmp import BoundsResult, Weights, bounds, bounds_three, bounds_two, chi_indicator

R2 = Region((1, 1), (0.5, 0.5))
R3 = Region((1, 1, 1), (0.5, 0.5, 0.5))
pos = st.floats(0.05, 20.0)


def oracle(w, d, upper, lower, chi):
    w, d, upper, lower = map(np.asarray, (w, d, upper, lower))
    r = d.max() / d.min()
    return float(np.min(w * lower) / r * chi), float(np.max(w * upper) * r)


@st.composite
def instance(draw):
    n = draw(st.sampled_from([2, 3]))
    w = draw(st.lists(pos, min_size=n, max_size=n))
    d = draw(st.lists(pos, min_size=n, max_size=n))
    upper = draw(st.lists(st.floats(0.1, 10.0), min_size=n, max_size=n))
    ratio = draw(st.lists(st.floats(0.05, 0.95), min_size=n, max_size=n))
    chi = draw(st.sampled_from([0, 1]))
    return w, d, Region(upper, [u * r for u, r in zip(upper, ratio)]), chi


def test_chi():
    s = BoundaryState.at
    assert chi_indicator(s((1, 0)), s((0, 1))) == 1
    assert chi_indicator(s((0, 0)), s((1, 0))) == 0
    assert chi_indicator(s((1, 0)), s((0, 0))) == 0
    assert chi_indicator(s((1 / 3, 1 / 3)), s((0, 1))) == 1


@pytest.mark.parametrize(
    "w,d,expected",
    [((1, 1), (1, 1), (0.5, 1)), ((1, 1), (1, 2), (0.25, 2))],
)
def test_two_species_examples(w, d, expected):
    b = bounds_two(w, d, R2, 1)
    assert (b.p_lower, b.p_upper) == expected


@pytest.mark.parametrize(
    "w,d,expected",
    [((1, 1, 1), (1, 1, 1), (0.5, 1)), ((2, 1, 1), (1, 1, 1), (0.5, 2)), ((1, 1, 1), (1, 2, 4), (0.125, 4))],
)
def test_three_species_examples(w, d, expected):
    b = bounds_three(w, d, R3, 1)
    assert (b.p_lower, b.p_upper) == expected


def test_chi_zero_zeroes_lower():
    assert bounds((3, 7), (1, 5), R2, 0).p_lower == 0


def test_dimension_checks():
    with pytest.raises(ValueError):
        bounds_two((1, 1, 1), (1, 1, 1), R3, 1)
    with pytest.raises(ValueError):
        bounds((1, 1), (1, 1), R2, 2)
    with pytest.raises(ValueError):
        Weights((1, -1))
    with pytest.raises(ValueError):
        BoundsResult(2.0, 1.0, 1, (1, 1), (1, 1), R2)


def test_weights_accessors():
    w = Weights([0.5, 2, 3])
    assert (w.alpha, w.beta, w.gamma) == (0.5, 2.0, 3.0)


def test_serializes():
    doc = json.loads(json.dumps(bounds((1, 1), (1, 2), R2, 1).to_dict()))
    assert doc["p_lower"] == 0.25 and doc["region"]["upper"] == [1.0, 1.0]


@settings(max_examples=300, deadline=None)
@given(instance())
def test_matches_formula(case):
    w, d, region, chi = case
    b = bounds(w, d, region, chi)
    lo, hi = oracle(w, d, region.upper, region.lower, chi)
    assert b.p_lower == pytest.approx(lo, rel=1e-12, abs=0)
    assert b.p_upper == pytest.approx(hi, rel=1e-12)
    assert b.p_lower <= b.p_upper


@settings(max_examples=300, deadline=None)
@given(instance(), st.floats(1e-3, 1e3))
def test_positive_homogeneity(case, c):
    w, d, region, chi = case
    a = bounds(w, d, region, chi)
    b = bounds([c * x for x in w], d, region, chi)
    assert b.p_upper == pytest.approx(c * a.p_upper, rel=1e-12)
    assert b.p_lower == pytest.approx(c * a.p_lower, rel=1e-12, abs=0)


@settings(max_examples=300, deadline=None)
@given(instance(), st.data())
def test_permutation_equivariance(case, data):
    w, d, region, chi = case
    n = len(w)
    perm = data.draw(st.permutations(range(n)))
    a = bounds(w, d, region, chi)
    pr = Region([region.upper[k] for k in perm], [region.lower[k] for k in perm])
    b = bounds([w[k] for k in perm], [d[k] for k in perm], pr, chi)
    assert (a.p_lower, a.p_upper) == (b.p_lower, b.p_upper)


@settings(max_examples=300, deadline=None)
@given(instance(), st.data())
def test_monotone_in_region(case, data):
    w, d, region, chi = case
    n = len(w)
    grow = data.draw(st.lists(st.floats(1.0, 3.0), min_size=n, max_size=n))
    shrink = data.draw(st.lists(st.floats(0.1, 1.0), min_size=n, max_size=n))
    bigger = Region([u * g for u, g in zip(region.upper, grow)], [l * s for l, s in zip(region.lower, shrink)])
    a = bounds(w, d, region, chi)
    b = bounds(w, d, bigger, chi)
    assert b.p_upper >= a.p_upper
    assert b.p_lower <= a.p_lower


@settings(max_examples=100, deadline=None)
@given(instance(), st.floats(0.1, 10))
def test_equal_diffusion_has_unit_ratio(case, dd):
    w, _, region, chi = case
    n = len(w)
    b = bounds(w, [dd] * n, region, chi)
    assert b.p_upper == max(x * u for x, u in zip(w, region.upper))
    assert b.p_lower == chi * min(x * l for x, l in zip(w, region.lower))
