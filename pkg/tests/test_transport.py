from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.stats import wasserstein_distance

from emergence_lab.errors import CapacityError, DomainError
from emergence_lab.measures import DiscreteMeasure, LineMetric, ShiftMetric
from emergence_lab.transport import (
    levy_prokhorov, levy_prokhorov_oracle, pairwise_wasserstein, wasserstein, wasserstein_exact, wasserstein_oracle,
)

LINE = LineMetric()


@st.composite
def measures(draw, max_size=5):
    n = draw(st.integers(1, max_size))
    pts = draw(st.lists(st.integers(0, 31), min_size=n, max_size=n, unique=True))
    w = draw(st.lists(st.integers(1, 9), min_size=n, max_size=n))
    return DiscreteMeasure([p / 32 for p in pts], [Fraction(v, sum(w)) for v in w], LINE)


@settings(max_examples=80, deadline=None)
@given(measures(8), measures(8))
def test_w1_matches_scipy_on_the_line(mu, nu):
    ref = wasserstein_distance(mu.support, nu.support, mu.weights_array(), nu.weights_array())
    assert wasserstein(mu, nu, 1) == pytest.approx(ref, abs=1e-12)


@settings(max_examples=40, deadline=None)
@given(measures(4), measures(4), st.sampled_from([1, 2, 3]))
def test_exact_matches_vertex_oracle(mu, nu, p):
    assert wasserstein_exact(mu, nu, p).value == pytest.approx(wasserstein_oracle(mu, nu, p), abs=1e-9)


@settings(max_examples=40, deadline=None)
@given(measures(4), measures(4))
def test_plan_is_a_coupling(mu, nu):
    res = wasserstein_exact(mu, nu, 2)
    assert res.plan.marginal_error() < 1e-12
    assert res.residual <= 1e-9
    assert np.all(res.plan.plan >= -1e-15)


@settings(max_examples=40, deadline=None)
@given(measures(), measures(), measures())
def test_w_metric_axioms(a, b, c):
    for p in (1, 2):
        assert wasserstein(a, a, p) == pytest.approx(0.0, abs=1e-12)
        assert wasserstein(a, b, p) == pytest.approx(wasserstein(b, a, p), abs=1e-12)
        assert wasserstein(a, c, p) <= wasserstein(a, b, p) + wasserstein(b, c, p) + 1e-9


@settings(max_examples=40, deadline=None)
@given(measures(), measures(), measures())
def test_lp_metric_axioms(a, b, c):
    assert levy_prokhorov(a, a) == 0.0
    assert levy_prokhorov(a, b) == pytest.approx(levy_prokhorov(b, a), abs=1e-12)
    assert levy_prokhorov(a, c) <= levy_prokhorov(a, b) + levy_prokhorov(b, c) + 1e-9
    assert 0.0 <= levy_prokhorov(a, b) <= 1.0


@settings(max_examples=40, deadline=None)
@given(measures(6), measures(6))
def test_lp_matches_event_oracle(mu, nu):
    assert levy_prokhorov(mu, nu) == pytest.approx(levy_prokhorov_oracle(mu, nu), abs=1e-12)


@settings(max_examples=30, deadline=None)
@given(measures(), measures())
def test_lp_w1_comparison(mu, nu):
    # LP**2 <= W1 on any metric space (mass beyond distance LP costs at least LP)
    lp = levy_prokhorov(mu, nu)
    assert lp ** 2 <= wasserstein(mu, nu, 1) + 1e-12


def test_dirac_closed_forms():
    a = DiscreteMeasure.dirac(0.0, LINE)
    b = DiscreteMeasure.dirac(0.3, LINE)
    assert wasserstein(a, b, 1) == pytest.approx(0.3)
    assert wasserstein(a, b, 2) == pytest.approx(0.3)
    assert levy_prokhorov(a, b) == pytest.approx(0.3)
    far = DiscreteMeasure.dirac(5.0, LINE)
    assert levy_prokhorov(a, far) == 1.0


def test_translation_in_w2():
    mu = DiscreteMeasure.uniform([0.0, 0.25, 0.5], LINE)
    nu = DiscreteMeasure.uniform([0.1, 0.35, 0.6], LINE)
    assert wasserstein_exact(mu, nu, 2).value == pytest.approx(0.1)


def test_shift_measures():
    s = ShiftMetric()
    fixed0 = DiscreteMeasure.dirac((0,), s)
    fixed1 = DiscreteMeasure.dirac((1,), s)
    two = DiscreteMeasure.uniform([(0, 1), (1, 0)], s)
    assert wasserstein(fixed0, fixed1) == 1.0
    # half the mass moves distance 1/2, half distance 1
    assert wasserstein(fixed0, two) == pytest.approx(0.75)
    D = pairwise_wasserstein([fixed0, fixed1, two])
    assert D[0, 2] == pytest.approx(0.75) and D[1, 2] == pytest.approx(0.75)


def test_errors():
    a = DiscreteMeasure.dirac(0.0, LINE)
    with pytest.raises(DomainError):
        wasserstein(a, a, 0.5)
    with pytest.raises(DomainError):
        wasserstein(a, DiscreteMeasure.dirac((0,), ShiftMetric()))
    big = DiscreteMeasure.uniform([i / 10 for i in range(10)], LINE)
    with pytest.raises(CapacityError):
        wasserstein_exact(big, big, 1, cap=4)
    with pytest.raises(CapacityError):
        wasserstein_oracle(big, big)
