import math

import numpy as np
import pytest

from emergence_lab.dynamics import ergodic_proxy, full_shift
from emergence_lab.emergence import MeasureMetric
from emergence_lab.errors import CapacityError, DomainError, PreconditionError
from emergence_lab.intermediate_value import (
    NO_STAGE, PartitionHierarchy, build_partition_hierarchy, construct_Y_beta, measure_with_emergence_beta, threshold,
)
from emergence_lab.metric_space import ExplicitSpace, ScaleSchedule, TreeSpace, load_space, packing_number


@pytest.fixture(scope="module")
def tree_hierarchy():
    return build_partition_hierarchy(TreeSpace.for_metric_order(1.0, 0.5, 4), 0.5, 4)


@pytest.fixture(scope="module")
def shift_setup():
    proxy = ergodic_proxy(full_shift(2), period_cap=8)
    D = MeasureMetric.parse("W1").matrix(proxy)
    return proxy, D


def test_threshold():
    assert threshold(0.5, 0.0, 7) == 2
    assert threshold(0.5, 1.0, 1) == math.floor(math.e ** 2)
    assert threshold(0.5, 0.5, 4) == math.floor(math.exp(4))


def test_tree_hierarchy_certificates(tree_hierarchy):
    assert tree_hierarchy.is_tree
    assert [c["ok"] for c in tree_hierarchy.certificates] == [True] * 4
    with pytest.raises(DomainError):
        build_partition_hierarchy(TreeSpace(0.25, [2, 2]), 0.5, 2)
    with pytest.raises(DomainError):
        build_partition_hierarchy(TreeSpace(0.5, [2, 2]), 0.5, 3)
    with pytest.raises(DomainError):
        build_partition_hierarchy(TreeSpace(0.5, [2, 2]), 0.75, 2)


def test_explicit_hierarchy_is_nested_and_certified():
    rng = np.random.default_rng(0)
    space = ExplicitSpace.from_points(list(rng.random((60, 2))), kind="sup")
    h = build_partition_hierarchy(space, 0.5, 4)
    for k, (cert, lab) in enumerate(zip(h.certificates, h.labels), start=1):
        assert cert["ok"] and cert["diameter"] <= 0.5 ** k
        for c in np.unique(lab):
            members = np.flatnonzero(lab == c)
            assert space.D[np.ix_(members, members)].max() <= 0.5 ** k
            if k > 1:
                # refinement: a cell lies inside one parent cell
                assert len(np.unique(h.labels[k - 2][members])) == 1


@pytest.mark.parametrize("beta, ks, counts, mo", [
    (0.0, [2, 3, 4], {1: 1, 2: 1, 3: 1, 4: 3}, 0.034),
    (0.25, [2, 4], {1: 1, 2: 1, 3: 1, 4: 8}, 0.264),
    (0.5, [3], {1: 1, 2: 1, 3: 17, 4: 54}, 0.501),
])
def test_tree_construction_pinned(tree_hierarchy, beta, ks, counts, mo):
    res = construct_Y_beta(tree_hierarchy, beta)
    assert res.trace.ks == ks
    assert res.trace.final_counts == counts
    assert not res.trace.identity_violations()
    assert res.estimates().upper_mo == pytest.approx(mo, abs=1e-3)


def test_tree_sets_are_nested(tree_hierarchy):
    res = construct_Y_beta(tree_hierarchy, 0.0)
    tree = tree_hierarchy.space
    for a, b in zip(res.trace.sets, res.trace.sets[1:]):
        assert tree.is_subset(b, a)
    assert tree.is_subset(res.subset, res.trace.sets[-1])


def test_at_stage_counts_are_threshold_plus_one(tree_hierarchy):
    for beta in (0.0, 0.25, 0.5):
        for st in construct_Y_beta(tree_hierarchy, beta).trace.stages:
            assert st.counts[st.k] == st.threshold + 1
            assert st.trigger > st.threshold


def test_finer_schedule_agrees(tree_hierarchy):
    res = construct_Y_beta(tree_hierarchy, 0.5)
    fine = res.estimates(ScaleSchedule.geometric(0.5, 1, 4, step=0.5))
    assert fine.upper_mo == pytest.approx(res.estimates().upper_mo, abs=1e-9)


def test_order_grows_with_beta(tree_hierarchy):
    mos = [construct_Y_beta(tree_hierarchy, b).estimates().upper_mo for b in (0.0, 0.25, 0.5)]
    assert mos == sorted(mos)


def test_no_stage_returns_whole_space(tree_hierarchy):
    res = construct_Y_beta(tree_hierarchy, 1.0)
    assert res.trace.flags == [NO_STAGE]
    assert res.subset == tree_hierarchy.space.full()
    with pytest.raises(DomainError):
        construct_Y_beta(tree_hierarchy, -0.1)


def test_untrimmed_keeps_subtree(tree_hierarchy):
    res = construct_Y_beta(tree_hierarchy, 0.5, trim=False)
    assert res.trace.trimmed == []
    assert res.trace.final_counts[4] > 54


def test_rejects_uncertified_hierarchy():
    with pytest.raises(PreconditionError):
        construct_Y_beta(PartitionHierarchy(TreeSpace(0.5, [2]), 0.5, 1), 0.0)
    with pytest.raises(PreconditionError):
        construct_Y_beta("not a hierarchy", 0.0)


def test_tree_export_round_trip(tree_hierarchy):
    res = construct_Y_beta(tree_hierarchy, 0.25)
    doc = res.export()
    assert load_space(doc).branching == tree_hierarchy.space.branching
    assert len(doc["subset"]) >= 1
    assert res.trace.to_json()["stages"][0]["k"] == 2


def test_explicit_construction_on_shift_proxy(shift_setup):
    _, D = shift_setup
    space = ExplicitSpace(D, check_triangle=False)
    h = build_partition_hierarchy(space, 0.5, 6)
    res = construct_Y_beta(h, 0.2)
    assert all(st.counts[st.k] == st.threshold + 1 for st in res.trace.stages)
    assert set(res.subset) <= set(range(len(D)))
    assert packing_number(space, sorted(res.subset), eps=0.5 ** 6, mode="greedy") <= len(res.subset)
    doc = res.export()
    assert load_space(doc).D.shape == (len(res.subset),) * 2


def test_thin_proxy_flags_between_bound(shift_setup):
    # at beta = 0 no level-4 cell keeps level 3 at two cells on this proxy
    _, D = shift_setup
    h = build_partition_hierarchy(ExplicitSpace(D, check_triangle=False), 0.5, 6)
    res = construct_Y_beta(h, 0.0)
    assert res.trace.ks == [2, 4, 5, 6]
    assert res.trace.flags == ["between-bound-exceeded@4"]
    assert res.trace.identity_violations() == [(2, 3, "between", 3, 2)]
    with pytest.raises(AssertionError):
        construct_Y_beta(h, 0.0, strict=True)
    ok = construct_Y_beta(h, 0.1, strict=True)
    assert ok.trace.flags == [] and not ok.trace.identity_violations()


def test_measure_targets(shift_setup):
    proxy, D = shift_setup
    sched = ScaleSchedule.geometric(0.5, 2, 6)
    zero = measure_with_emergence_beta(proxy, 0.0, full_shift(2), sched, distances=D, samples=128)
    assert zero.target == 0.0 and abs(zero.measured) <= 0.2
    assert zero.measure.is_exact()
    doc = zero.to_json()
    assert doc["members"] == zero.members and doc["full_exponent"] == pytest.approx(0.507, abs=1e-3)


def test_measure_errors(shift_setup):
    proxy, D = shift_setup
    sched = ScaleSchedule.geometric(0.5, 2, 6)
    with pytest.raises(DomainError):
        measure_with_emergence_beta(proxy, 0.9, full_shift(2), sched, distances=D)
    with pytest.raises(CapacityError) as exc:
        measure_with_emergence_beta(proxy, 0.0, full_shift(2), sched, distances=D, budget=1)
    assert exc.value.cap == "mixture_budget"
