from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from emergence_lab.dynamics import full_shift, rotation
from emergence_lab.errors import DomainError, PreconditionError
from emergence_lab.measures import (
    CircleMetric, DiscreteMeasure, LineMetric, ShiftMetric, apart, empirical_measure, metric_from_json,
    min_support_distance, mixture, periodic_dirac, support_distance_matrix,
)

LINE = LineMetric()
SHIFT = ShiftMetric()


def test_duplicates_merge_and_weights_stay_exact():
    mu = DiscreteMeasure([0.5, 0.1, 0.5], [Fraction(1, 4), Fraction(1, 2), Fraction(1, 4)], LINE)
    assert mu.support == (0.1, 0.5)
    assert mu.weights == (Fraction(1, 2), Fraction(1, 2))
    assert mu.is_exact()


def test_float_snapping():
    mu = DiscreteMeasure([0.3, 0.3 + 1e-14], [0.5, 0.5], LINE)
    assert len(mu) == 1


def test_validation():
    with pytest.raises(DomainError):
        DiscreteMeasure([0.0], [0.5], LINE)
    with pytest.raises(DomainError):
        DiscreteMeasure([0.0, 1.0], [1.5, -0.5], LINE)
    with pytest.raises(DomainError):
        DiscreteMeasure([], [], LINE)
    with pytest.raises(DomainError):
        DiscreteMeasure([0.0], [1.0, 0.0], LINE)


def test_json_round_trip():
    mu = DiscreteMeasure([Fraction(1, 3), Fraction(2, 3)], [Fraction(1, 3), Fraction(2, 3)], LINE)
    back = DiscreteMeasure.from_json(mu.to_json(), LINE)
    assert back == mu
    nu = DiscreteMeasure.uniform([(0, 1), (1, 0)], SHIFT)
    assert DiscreteMeasure.from_json(nu.to_json(), SHIFT) == nu


def test_metric_json():
    assert metric_from_json({"metric": "shift", "depth": 16}) == ShiftMetric(16)
    assert metric_from_json(CircleMetric().to_json()) == CircleMetric()
    with pytest.raises(DomainError):
        metric_from_json({"metric": "taxicab"})


def test_shift_metric():
    assert SHIFT((0, 1), (0, 1, 0, 1)) == 0.0
    assert SHIFT((0,), (1,)) == 1.0
    assert SHIFT((0, 0, 1), (0, 0, 0)) == 0.25
    assert SHIFT.canonical((1, 0, 1, 0)) == (1, 0)
    with pytest.raises(DomainError):
        SHIFT.canonical(())


def test_circle_metric():
    c = CircleMetric()
    assert c(0.1, 0.9) == pytest.approx(0.2)
    assert c.canonical(1.25) == pytest.approx(0.25)
    assert c.canonical(Fraction(7, 3)) == Fraction(1, 3)


def test_empirical_measure_of_rotation():
    f = rotation("1/4")
    mu = empirical_measure(f, Fraction(0), 8)
    assert mu.support == (0, Fraction(1, 4), Fraction(1, 2), Fraction(3, 4))
    assert all(w == Fraction(1, 4) for w in mu.weights)
    with pytest.raises(DomainError):
        empirical_measure(f, 0, 0)


def test_empirical_measure_of_shift_orbit():
    f = full_shift(2)
    mu = empirical_measure(f, (0, 0, 1), 3)
    assert set(mu.support) == {(0, 0, 1), (0, 1, 0), (1, 0, 0)}


def test_periodic_dirac_rejects_repeats():
    with pytest.raises(PreconditionError):
        periodic_dirac([(0, 1), (0, 1)], SHIFT)
    with pytest.raises(PreconditionError):
        periodic_dirac([], SHIFT)
    assert periodic_dirac([(0, 1), (1, 0)], SHIFT).meta["period"] == 2


def test_mixture():
    a = DiscreteMeasure.dirac(0.0, LINE)
    b = DiscreteMeasure.uniform([0.0, 1.0], LINE)
    m = mixture([a, b], [Fraction(1, 2), Fraction(1, 2)])
    assert m.weights == (Fraction(3, 4), Fraction(1, 4))
    with pytest.raises(DomainError):
        mixture([a, DiscreteMeasure.dirac((0,), SHIFT)])


def test_apartness():
    a = DiscreteMeasure.uniform([(0, 1), (1, 0)], SHIFT)
    b = DiscreteMeasure.dirac((0,), SHIFT)
    c = DiscreteMeasure.dirac((1,), SHIFT)
    # (0,1,0,1,...) and (0,0,0,...) first differ at index 1
    assert min_support_distance(a, b) == 0.5
    assert apart(a, b, 0.5) and not apart(a, b, 0.6)
    assert apart(b, c, 1.0)


@settings(max_examples=30, deadline=None)
@given(st.lists(st.lists(st.integers(0, 15), min_size=1, max_size=4, unique=True), min_size=1, max_size=6))
def test_support_distance_matrix_matches_pairwise(supports):
    ms = [DiscreteMeasure.uniform([x / 16 for x in s], LINE) for s in supports]
    S = support_distance_matrix(ms, chunk=2)
    for i in range(len(ms)):
        for j in range(len(ms)):
            assert S[i, j] == pytest.approx(min_support_distance(ms[i], ms[j]))
    assert np.allclose(np.diag(S), 0.0)
