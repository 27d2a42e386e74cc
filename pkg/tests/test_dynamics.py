import math
import warnings
from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from emergence_lab.dynamics import (
    DomainEscape, NotAHomeomorphism, circle_homeo, doubling_map, ergodic_proxy, fixed_points, full_shift,
    identity_map, interval_homeo, iterate_orbit, lyndon_words, necklace_count, parse_formula,
    periodic_orbits_shift, rotation, rotation_number, system_from_config,
)
from emergence_lab.errors import CapacityError, DomainError, PreconditionError


def test_formula_grammar():
    f = parse_formula("2*x**2 - sin(pi*x) + exp(0)")
    assert f(0.5) == pytest.approx(2 * 0.25 - 1 + 1)
    assert parse_formula("-x")(3.0) == -3.0
    for bad in ("__import__('os')", "x.real", "y + 1", "abs(x)", "x +"):
        with pytest.raises(DomainError):
            parse_formula(bad)


def test_orbits():
    f = interval_homeo("x**2")
    assert iterate_orbit(f, 0.5, 3) == [0.5, 0.25, 0.0625]
    with pytest.raises(DomainError):
        iterate_orbit(f, 0.5, 0)
    g = interval_homeo("2*x")
    with pytest.raises(DomainEscape):
        iterate_orbit(g, 0.75, 3)


def test_shift_orbit_and_alphabet():
    s = full_shift(2)
    assert s.orbit((0, 0, 1), 3) == [(0, 0, 1), (0, 1, 0), (1, 0, 0)]
    with pytest.raises(DomainEscape):
        s.orbit((0, 2), 2)
    with pytest.raises(DomainError):
        full_shift(1)


def test_exact_rotation_is_periodic():
    f = rotation("3/7")
    orb = f.orbit(Fraction(1, 10), 8)
    assert orb[7] == orb[0]
    assert len(set(orb)) == 7


def test_doubling_map_exact():
    d = doubling_map()
    assert d.orbit(Fraction(1, 3), 3) == [Fraction(1, 3), Fraction(2, 3), Fraction(1, 3)]


def test_fixed_points_of_square():
    res = fixed_points(interval_homeo("x**2"))
    pts = res.points()
    assert len(pts) == 2
    assert pts[0] == pytest.approx(0.0, abs=1e-9) and pts[1] == pytest.approx(1.0, abs=1e-9)
    assert all(b - a <= 1e-10 for a, b in res.brackets)


def test_fixed_points_interior():
    # x + 0.1 sin(2 pi x) fixes 0, 1/2 and 1
    res = fixed_points(interval_homeo("x + 0.1*sin(2*pi*x)"))
    assert [round(p, 8) for p in res.points()] == [0.0, 0.5, 1.0]


def test_identity_is_everywhere_fixed():
    res = fixed_points(identity_map())
    assert res.everywhere_fixed
    assert len(ergodic_proxy(identity_map(), grid=16)) == 17


def test_non_monotone_warns():
    with pytest.warns(NotAHomeomorphism):
        fixed_points(interval_homeo("4*x*(1 - x)"))


def test_rotation_numbers():
    assert rotation_number(rotation("3/7")).rational == Fraction(3, 7)
    r = rotation_number(rotation(math.sqrt(2) - 1), n=20_000)
    assert r.rational is None
    assert r.value == pytest.approx(math.sqrt(2) - 1, abs=1e-4)
    # Arnold family with a rational tongue at 0
    a = rotation_number(circle_homeo("x + 0.05*sin(2*pi*x)"))
    assert a.rational == 0
    with pytest.raises(PreconditionError):
        rotation_number(rotation("1/3"), n=10)


@pytest.mark.parametrize("m, q, count", [(2, 1, 2), (2, 2, 1), (2, 6, 9), (3, 2, 3), (2, 12, 335)])
def test_necklaces(m, q, count):
    assert necklace_count(m, q) == count
    assert len(lyndon_words(m, q)) == count


@settings(max_examples=20, deadline=None)
@given(st.integers(2, 4), st.integers(1, 7))
def test_periodic_points_are_counted_exactly(m, q):
    # sum over divisors d of q of d * (orbits of period d) = m**q
    total = sum(d * necklace_count(m, d) for d in range(1, q + 1) if q % d == 0)
    assert total == m ** q
    orbs = periodic_orbits_shift(m, q)
    assert all(len(set(o)) == q for o in orbs)


def test_period_cap():
    with pytest.raises(CapacityError):
        periodic_orbits_shift(2, 30)


def test_proxies():
    assert len(ergodic_proxy(full_shift(2), period_cap=10)) == sum(necklace_count(2, q) for q in range(1, 11))
    sq = ergodic_proxy(interval_homeo("x**2"))
    assert [m.support[0] for m in sq] == pytest.approx([0.0, 1.0], abs=1e-9)
    rot = ergodic_proxy(rotation("3/7"), grid=64)
    assert len(rot) == 64 and all(len(m) == 7 for m in rot)
    irr = ergodic_proxy(rotation(math.sqrt(2) - 1), grid=32)
    assert len(irr) == 1 and len(irr[0]) == 32


def test_proxy_for_inexact_rational_circle_map():
    f = circle_homeo("x + 0.5 + 0.02*sin(2*pi*x)")
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        proxy = ergodic_proxy(f, grid=8)
    # period-2 orbits only, each orbit really periodic
    assert proxy and all(len(m) == 2 for m in proxy)
    for m in proxy:
        x = m.support[0]
        assert f.metric(f.step(f.step(x)), x) < 1e-8


def test_system_from_config():
    assert system_from_config({"system": "rotation", "alpha": "1/3"}).exact
    assert system_from_config({"system": "shift", "m": 3}).params["m"] == 3
    with pytest.raises(DomainError):
        system_from_config({"system": "henon"})
