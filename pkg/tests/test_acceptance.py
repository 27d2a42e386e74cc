"""Acceptance criteria, one test each.

Every test records a ``PASS``/``FAIL`` line (shown in the pytest summary
under "acceptance criteria") and then asserts. Running this file directly
prints the same lines without pytest.
"""

import json
import math
import sys
import tempfile
from fractions import Fraction
from pathlib import Path

import numpy as np

from emergence_lab.cli import run_experiment
from emergence_lab.dynamics import ergodic_proxy, full_shift, interval_homeo, rotation
from emergence_lab.emergence import (
    MeasureMetric, apart_lower_bound, emergence_exponent, metric_emergence_curve,
    topological_emergence_curve,
)
from emergence_lab.intermediate_value import build_partition_hierarchy, construct_Y_beta, measure_with_emergence_beta
from emergence_lab.measures import DiscreteMeasure, LineMetric
from emergence_lab.metric_space import (
    ExplicitSpace, ScaleSchedule, TreeSpace, covering_number, order_estimates, packing_number,
)
from emergence_lab.pseudo_horseshoe import (
    PseudoHorseshoeSpec, build_model_map, family_separation, hamming_family, identity_map,
    separated_periodic_orbits, shadowing_measure_family, verify_pseudo_horseshoe,
)
from emergence_lab.transport import levy_prokhorov, levy_prokhorov_oracle, wasserstein, wasserstein_exact, wasserstein_oracle

CONFIGS = Path(__file__).resolve().parents[1] / "configs"
LINE = LineMetric()


def dyadic(j_min, j_max):
    return ScaleSchedule.geometric(0.5, j_min, j_max)


def random_measure(rng, size, grid=16):
    pts = rng.choice(grid, size=size, replace=False) / grid
    w = rng.integers(1, 10, size=size)
    return DiscreteMeasure(list(pts), [Fraction(int(v), int(w.sum())) for v in w], LINE)


# ---------------------------------------------------------------------------
# Criteria. Each returns ``(ok, detail)``.


def criterion_1():
    rng = np.random.default_rng(1)
    worst = 0.0
    for _ in range(200):
        mu = random_measure(rng, int(rng.integers(1, 5)))
        nu = random_measure(rng, int(rng.integers(1, 5)))
        for p in (1, 2):
            worst = max(worst, abs(wasserstein_exact(mu, nu, p).value - wasserstein_oracle(mu, nu, p)))
    lp_worst = 0.0
    for _ in range(40):
        mu = random_measure(rng, int(rng.integers(1, 9)))
        nu = random_measure(rng, int(rng.integers(1, 9)))
        lp_worst = max(lp_worst, abs(levy_prokhorov(mu, nu) - levy_prokhorov_oracle(mu, nu)))
    ok = worst <= 1e-9 and lp_worst <= 1e-9
    return ok, f"max |W - oracle| = {worst:.2e}, max |LP - oracle| = {lp_worst:.2e} (tol 1e-9)"


def criterion_2():
    f = interval_homeo("x**2", inverse="x**0.5")
    proxy = ergodic_proxy(f)
    curve = topological_emergence_curve(proxy, "W1", dyadic(1, 8))
    fit = emergence_exponent(curve)
    const2 = all(c == 2 for e, c in zip(curve.epsilons, curve.counts) if e < 1)
    ok = const2 and abs(fit.tail_max) <= 1e-6 and abs(fit.slope) <= 1e-6
    return ok, f"counts {curve.counts}, exponent {fit.tail_max:.2e} (need 2 below eps=1, |exp| <= 1e-6)"


def criterion_3():
    proxy = ergodic_proxy(rotation("3/7"), grid=64)
    curve = topological_emergence_curve(proxy, "W1", dyadic(2, 8))
    fit = emergence_exponent(curve)
    bounded = all(c <= math.ceil(1 / e) for e, c in zip(curve.epsilons, curve.counts))
    ok = bounded and fit.tail_max <= 0.05
    return ok, (f"counts {curve.counts} <= ceil(1/eps): {bounded}; "
                f"exponent {fit.tail_max:.3f} (need <= 0.05)")


def criterion_4():
    est = order_estimates(TreeSpace.shift(2, 12), schedule=dyadic(2, 10), mode="exact")
    exact = est.packing == [2 ** (j + 1) for j in range(2, 11)]
    ok = exact and abs(est.upper_box - 1.0) <= 0.05
    return ok, f"upper_box {est.upper_box:.4f} (1 +- 0.05), S(2^-j) = 2^(j+1): {exact}"


def criterion_5():
    proxy = ergodic_proxy(full_shift(2), period_cap=12)
    ab = apart_lower_bound(proxy, dyadic(3, 9))
    ok = ab.gamma >= 0.8 and ab.mo_lower_bound <= 1.05
    return ok, (f"apart counts {ab.counts}, gamma {ab.gamma:.3f} (need >= 0.8), "
                f"mo lower bound {ab.mo_lower_bound:.3f} (need <= 1.05)")


def criterion_6():
    spec = PseudoHorseshoeSpec(k=2, r=1.0, N=3)
    phi = build_model_map(spec)
    runs = [verify_pseudo_horseshoe(phi, spec, h) for h in (0.01, 0.005)]
    statuses = [r.status for r in runs]
    gaps = [min(r.v_gap, r.h_gap) for r in runs]
    ident = verify_pseudo_horseshoe(identity_map(spec), spec, 0.01)
    ident_fail = ident.get("lower slices").status == "fail"
    ok = statuses == ["pass", "pass"] and min(gaps) >= 0.1 * spec.r and ident_fail
    return ok, (f"model map {statuses}, strip gaps {[round(g, 3) for g in gaps]} (>= 0.1 r); "
                f"identity fails lower slices: {ident_fail}")


def criterion_7():
    N, q, eps, ell, T = 8, 2, 0.25, 4, 1
    fam = hamming_family(N, exact=False)
    _, orbits = separated_periodic_orbits(N, q, eps)
    measures = shadowing_measure_family(fam, orbits, ell, T, q, eps)
    sep = family_separation(measures, 1)
    bound = eps ** q / 8
    pairs = len(measures) * (len(measures) - 1) // 2
    return sep >= bound, f"{pairs} pairs, min W1 {sep:.4f} (need >= {bound:.6f})"


def criterion_8():
    sizes, ok_exact = [], True
    for N in (8, 12, 16, 20):
        fam = hamming_family(N, exact=N <= 12)
        sizes.append(len(fam))
        if fam.exact_max is not None:
            ok_exact &= len(fam) <= fam.exact_max
    c1, _ = np.polyfit([8, 12, 16, 20], np.log(sizes), 1)
    return c1 > 0 and ok_exact, f"sizes {sizes}, C1 {c1:.4f} (> 0), greedy <= exact: {ok_exact}"


def criterion_9():
    tree = TreeSpace.for_metric_order(1.0, 0.5, 4)
    h = build_partition_hierarchy(tree, 0.5, 4)
    res = construct_Y_beta(h, 0.5)
    viol = res.trace.identity_violations()
    at_stage = all(st.counts[st.k] == st.threshold + 1 for st in res.trace.stages)
    mo = res.estimates().upper_mo
    ok = not viol and at_stage and 0.35 <= mo <= 0.65
    return ok, f"stages {res.trace.ks}, violations {viol}, upper_mo {mo:.3f} (in [0.35, 0.65])"


def _run(kind, name, out, **kw):
    code = run_experiment(kind, CONFIGS / f"{name}.json", out=str(out), **kw)
    if code:
        raise RuntimeError(f"{name}: exit {code}")
    return Path(out)


def criterion_10():
    held = {}
    with tempfile.TemporaryDirectory() as tmp:
        for name in ("square", "rotation_3_7", "shift2"):
            doc = json.loads((_run("emergence", name, Path(tmp) / name) / "metric_exponent.json").read_text())
            held[name] = doc["dominance"]["holds"] and len(doc["dominance"]["epsilons"]) > 0
    # a fixed-point Dirac of x**2
    f = interval_homeo("x**2", inverse="x**0.5")
    sched = dyadic(1, 8)
    top = topological_emergence_curve(ergodic_proxy(f), "W1", sched)
    me = metric_emergence_curve(f, DiscreteMeasure.dirac(1.0, f.metric), 4, sched)
    held["dirac"] = all(a is not None and a <= b for a, b in zip(me.curve.counts, top.counts))

    shift = full_shift(2)
    proxy = ergodic_proxy(shift, period_cap=8)
    sched = dyadic(2, 6)
    D = MeasureMetric.parse("W1").matrix(proxy)
    full = emergence_exponent(topological_emergence_curve(proxy, "W1", sched, distances=D)).tail_max
    hits = []
    for frac in (0.0, 0.5, 1.0):
        r = measure_with_emergence_beta(proxy, frac * full, shift, sched, distances=D, full_exponent=full)
        hits.append((round(r.target, 3), round(r.measured, 3)))
    targeted = all(abs(m - t) <= 0.2 for t, m in hits)
    ok = all(held.values()) and targeted
    return ok, f"dominance {held}; (target, measured) {hits} within 0.2: {targeted}"


def criterion_11():
    rng = np.random.default_rng(11)
    worst = 0.0
    for _ in range(60):
        a, b, c = (random_measure(rng, int(rng.integers(1, 7))) for _ in range(3))
        for dist in (lambda x, y: wasserstein(x, y, 1), lambda x, y: wasserstein(x, y, 2), levy_prokhorov):
            worst = max(worst, dist(a, a), abs(dist(a, b) - dist(b, a)),
                        dist(a, c) - dist(a, b) - dist(b, c))
    axioms = worst <= 1e-9

    proxy = ergodic_proxy(full_shift(2), period_cap=7)
    curve = topological_emergence_curve(proxy, "W1", dyadic(1, 7))
    monotone = not curve.check_monotone()

    sandwich = True
    for _ in range(20):
        space = ExplicitSpace.from_points(list(rng.random((12, 2))), kind="sup")
        for e in (0.1, 0.2, 0.4):
            sandwich &= (covering_number(space, eps=e) <= packing_number(space, eps=e)
                         <= covering_number(space, eps=e / 2))

    same = True
    with tempfile.TemporaryDirectory() as tmp:
        runs = [("metrics", "metrics_shift2"), ("metrics", "metrics_tree"), ("emergence", "shift2"),
                ("emergence", "square"), ("emergence", "rotation_3_7"), ("horseshoe", "horseshoe"),
                ("ivp", "ivp_tree"), ("ivp", "ivp_shift2")]
        for kind, name in runs:
            m1 = (_run(kind, name, Path(tmp) / "a" / name) / "manifest.json").read_bytes()
            m2 = (_run(kind, name, Path(tmp) / "b" / name, threads=2) / "manifest.json").read_bytes()
            same &= m1 == m2
    ok = axioms and monotone and sandwich and same
    return ok, (f"axiom defect {worst:.1e} (1e-9), monotone {monotone}, sandwich {sandwich}, "
                f"identical manifests {same}")


CRITERIA = {i: globals()[f"criterion_{i}"] for i in range(1, 12)}


# ---------------------------------------------------------------------------
# pytest entry points


def _check(n, acceptance_line):
    ok, detail = CRITERIA[n]()
    acceptance_line(n, ok, detail)
    assert ok, detail


def test_transport_matches_oracles(acceptance_line):
    _check(1, acceptance_line)


def test_interval_square_has_zero_emergence(acceptance_line):
    _check(2, acceptance_line)


def test_rotation_emergence_is_small(acceptance_line):
    # unattainable at these scales: the count grows like 1/(14 eps), see README
    _check(3, acceptance_line)


def test_shift_box_dimension(acceptance_line):
    _check(4, acceptance_line)


def test_apart_family_growth(acceptance_line):
    # unattainable: the optimal apart counts are necklace numbers, see README
    _check(5, acceptance_line)


def test_horseshoe_certification(acceptance_line):
    _check(6, acceptance_line)


def test_shadowing_family_separation(acceptance_line):
    _check(7, acceptance_line)


def test_hamming_growth(acceptance_line):
    _check(8, acceptance_line)


def test_prescribed_order_identities(acceptance_line):
    _check(9, acceptance_line)


def test_dominance_and_targeting(acceptance_line):
    _check(10, acceptance_line)


def test_property_suites(acceptance_line):
    _check(11, acceptance_line)


if __name__ == "__main__":
    failed = 0
    for n, fn in CRITERIA.items():
        ok, detail = fn()
        failed += not ok
        print(f"criterion {n:>2}: {'PASS' if ok else 'FAIL'}  {detail}", flush=True)
    sys.exit(1 if failed else 0)
