import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from seqsgpv.regions import (
    INF,
    Interval,
    Region,
    normalize,
    overlap_array,
    overlap_length,
    sgpv,
    sgpv_array,
)


def test_normalize_merges_overlaps():
    r = normalize([Interval(0, 1), Interval(0.5, 2)])
    assert r.parts == (Interval(0, 2),)


def test_normalize_sorts():
    r = normalize([Interval(1, 2), Interval(-1, 0)])
    assert r.parts == (Interval(-1, 0), Interval(1, 2))


def test_normalize_merges_touching():
    assert normalize([Interval(0, 1), Interval(1, 2)]).parts == (Interval(0, 2),)


def test_malformed_interval_rejected():
    with pytest.raises(ValueError):
        Interval(1, 0)


@pytest.mark.parametrize(
    "interval, region, expected",
    [
        (Interval(0, 0.3), Region.of((-0.15, 0.15)), 0.15),
        (Interval(0.2, 0.6), Region.of((-0.15, 0.15)), 0.0),
        (Interval(0.2, 0.6), Region.of((0.5, INF)), 0.1),
    ],
)
def test_overlap_length_examples(interval, region, expected):
    assert overlap_length(interval, region) == pytest.approx(expected, abs=1e-15)


def test_overlap_both_unbounded_is_infinite():
    assert overlap_length(Interval(-INF, 0), Region.of((-INF, 1))) == INF


@pytest.mark.parametrize(
    "interval, region, expected",
    [
        (Interval(-0.1, 0.1), Region.of((-0.15, 0.15)), 1.0),
        (Interval(0, 0.3), Region.of((-0.15, 0.15)), 0.5),
        (Interval(-1, 1), Region.of((-0.15, 0.15)), 0.5),
        (Interval(0.2, 0.6), Region.of((0.5, INF)), 0.25),
    ],
)
def test_sgpv_examples(interval, region, expected):
    assert sgpv(interval, region) == pytest.approx(expected, rel=1e-12, abs=1e-15)


def test_sgpv_rejects_degenerate_and_infinite():
    r = Region.of((-0.15, 0.15))
    with pytest.raises(ValueError, match="degenerate"):
        sgpv(Interval(0.1, 0.1), r)
    with pytest.raises(ValueError, match="finite"):
        sgpv(Interval(0, INF), r)


def test_tangent_interval_has_zero_sgpv():
    assert sgpv(Interval(0.15, 0.4), Region.of((-0.15, 0.15))) == 0.0


def test_sgpv_array_matches_scalar():
    rng = np.random.default_rng(3)
    lo = rng.uniform(-2, 2, 200)
    hi = lo + rng.uniform(0.01, 3, 200)
    r = Region.of((-INF, -0.5), (0.5, INF))
    vec = sgpv_array(lo, hi, r)
    for a, b, p in zip(lo, hi, vec):
        assert p == pytest.approx(sgpv(Interval(a, b), r), abs=1e-14)


# values on a 1/1024 grid keep every sum and difference exact, so the
# characterisations below hold without rounding slack
finite = st.integers(-10240, 10240).map(lambda k: k / 1024)
width = st.integers(1, 10240).map(lambda k: k / 1024)


@st.composite
def finite_regions(draw):
    k = draw(st.integers(1, 3))
    parts = []
    for _ in range(k):
        a = draw(finite)
        parts.append(Interval(a, a + draw(width)))
    return normalize(parts)


def test_overlap_agrees_with_point_membership():
    # Monte Carlo oracle: fraction of uniform points in the interval that land in the region.
    # 200 fixed random cases; a correct overlap misses 3 SE about 0.27% of the time, so allow
    # up to the binomial 99.9% quantile of such misses but never a 5 SE miss.
    rng = np.random.default_rng(20240601)
    m = 4000
    misses = 0
    for _ in range(200):
        k = rng.integers(1, 4)
        starts = rng.uniform(-10, 10, k)
        region = normalize(Interval(a, a + w) for a, w in zip(starts, rng.uniform(1e-3, 10, k)))
        lo = rng.uniform(-10, 10)
        hi = lo + rng.uniform(1e-3, 10)
        pts = rng.uniform(lo, hi, m)
        inside = np.zeros(m, dtype=bool)
        for p in region.parts:
            inside |= (pts >= p.lo) & (pts <= p.hi)
        frac = inside.mean()
        exact = overlap_length(Interval(lo, hi), region) / (hi - lo)
        se = math.sqrt(max(exact * (1 - exact), 1e-12) / m)
        err = abs(exact - frac)
        assert err <= 5 * se + 1e-12
        misses += err > 3 * se + 1e-12
    assert misses <= 4


@settings(max_examples=400, deadline=None)
@given(finite_regions(), finite, width, finite)
def test_sgpv_translation_invariant(region, lo, w, c):
    i = Interval(lo, lo + w)
    assert sgpv(i.shift(c), region.shift(c)) == pytest.approx(sgpv(i, region), abs=1e-9)


@settings(max_examples=400, deadline=None)
@given(finite_regions(), finite, width, st.floats(0.01, 100))
def test_sgpv_scale_invariant(region, lo, w, k):
    i = Interval(lo, lo + w)
    assert sgpv(i.scale(k), region.scale(k)) == pytest.approx(sgpv(i, region), abs=1e-9)


@settings(max_examples=400, deadline=None)
@given(finite_regions(), finite, width)
def test_sgpv_zero_iff_no_overlap(region, lo, w):
    i = Interval(lo, lo + w)
    p = sgpv(i, region)
    assert (p == 0) == (overlap_length(i, region) == 0)


@settings(max_examples=400, deadline=None)
@given(finite_regions(), finite, width)
def test_sgpv_one_iff_contained_and_not_too_wide(region, lo, w):
    i = Interval(lo, lo + w)
    contained = any(p.lo <= i.lo and i.hi <= p.hi for p in region.parts)
    assert (sgpv(i, region) == 1.0) == (contained and w <= 2 * region.length)


@settings(max_examples=400, deadline=None)
@given(finite_regions(), finite, width)
def test_sgpv_correction_branch(region, lo, w):
    i = Interval(lo, lo + w)
    if w > 2 * region.length:
        assert sgpv(i, region) == overlap_length(i, region) / (2 * region.length)


def test_overlap_array_scalar_input():
    assert float(overlap_array(0.0, 0.3, Region.of((-0.15, 0.15)))) == pytest.approx(0.15)
