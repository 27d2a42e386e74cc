"""Subsets with prescribed upper metric order, and measures with prescribed
metric emergence built from them.

The construction walks a hierarchy of partitions. At each stage it finds
the first level where the current set is too rich for the target
threshold ``floor(exp(lam**(-beta*k)))``, keeps one cell whole and a
threshold's worth of single points from neighbouring cells, and recurses
inside the kept cell.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from .emergence import MeasureMetric, emergence_exponent, metric_emergence_curve, topological_emergence_curve
from .errors import CapacityError, DomainError, PreconditionError
from .measures import DiscreteMeasure, mixture
from .metric_space import (EXACT_CAP, ExplicitSpace, ScaleSchedule, TreeSpace, TreeSubset, loglog,
                           order_estimates, packing_number)

MIXTURE_BUDGET = 4096
NO_STAGE = "no-stage-found"


def threshold(lam, beta, k):
    """``floor(exp(lam**(-beta*k)))``; ``beta = 0`` gives 2 at every level."""
    return math.floor(math.exp(lam ** (-beta * k)))


# ---------------------------------------------------------------------------
# Partition hierarchy


@dataclass
class PartitionHierarchy:
    """Partitions ``P_1, ..., P_J`` of a finite (or tree) space.

    Level-``k`` cells have certified diameter at most ``lam**k`` and
    contain the open ball of radius ``lam**(k+1) / 2`` around their centre
    (inner diameter at least ``lam**(k+1)``). On tree backends the cells
    are the cylinders of length ``k``. On explicit spaces each level
    refines the previous one (nearest centre inside the parent cell), so
    the inner ball is certified relative to the parent cell; whether it
    also holds in the whole space is stored as ``inner_global``.
    """

    space: object
    lam: float
    levels: int
    centres: list = field(default_factory=list)
    labels: list = field(default_factory=list)
    certificates: list = field(default_factory=list)

    @property
    def is_tree(self):
        return isinstance(self.space, TreeSpace)

    def radius(self, k):
        return self.lam ** k


def _greedy_centres(D, r):
    """Maximal ``r``-separated set grown in index order."""
    n = len(D)
    centres = [0]
    mind = D[0].copy()
    for i in range(1, n):
        if mind[i] >= r * (1 - 1e-12):
            centres.append(i)
            mind = np.minimum(mind, D[i])
    return np.array(centres)


def build_partition_hierarchy(space, lam, levels):
    """Per-level nearest-centre partitions with diameter and inner-size certificates.

    Raises
    ------
    PreconditionError
        If a certificate fails; the message names the level.
    """
    if not 0 < lam <= 0.5:
        raise DomainError("lambda must lie in (0, 1/2]")
    levels = int(levels)
    if levels < 1:
        raise DomainError("need at least one level")
    if isinstance(space, TreeSpace):
        if abs(space.lam - lam) > 1e-12:
            raise DomainError("on a tree the hierarchy lambda must be the tree lambda")
        if levels > space.levels:
            raise DomainError(f"tree has only {space.levels} levels")
        h = PartitionHierarchy(space, lam, levels)
        for k in range(1, levels + 1):
            diam = space.scale(k + 1) if k < space.levels else 0.0
            # cylinders of length k are closed balls of radius scale(k+1)
            inner = space.scale(k + 1) if k < space.levels else math.inf
            ok = diam <= lam ** k * (1 + 1e-12) and inner >= lam ** (k + 1) / 2
            h.certificates.append({"level": k, "diameter": diam, "inner_radius": inner, "ok": ok})
            if not ok:
                raise PreconditionError(f"partition certificate fails at level {k}")
        return h
    D = space.D
    h = PartitionHierarchy(space, lam, levels)
    parent = np.zeros(len(D), dtype=int)
    for k in range(1, levels + 1):
        r = lam ** (k + 1)
        lab = np.empty(len(D), dtype=int)
        centres = []
        for p in np.unique(parent):
            members = np.flatnonzero(parent == p)
            cs = members[_greedy_centres(D[np.ix_(members, members)], r)]
            lab[members] = cs[np.argmin(D[np.ix_(members, cs)], axis=1)]
            centres.extend(int(c) for c in cs)
        centres = np.array(sorted(centres))
        diam = 0.0
        for c in centres:
            members = np.flatnonzero(lab == c)
            if len(members) > 1:
                diam = max(diam, float(D[np.ix_(members, members)].max()))
        # inner ball taken inside the parent cell; see the class docstring
        inner_ok = all(np.all(lab[(D[c] < r / 2) & (parent == parent[c])] == c) for c in centres)
        inner_global = all(np.all(lab[D[c] < r / 2] == c) for c in centres)
        ok = diam <= lam ** k * (1 + 1e-12) and inner_ok
        h.certificates.append({"level": k, "diameter": diam, "inner_radius": r / 2 if inner_ok else None,
                               "inner_global": bool(inner_global), "ok": bool(ok), "cells": int(len(centres))})
        if not ok:
            raise PreconditionError(f"partition certificate fails at level {k}")
        h.centres.append(centres)
        h.labels.append(lab)
        parent = lab
    return h


# ---------------------------------------------------------------------------
# Backend adapters


class _TreeOps:
    def __init__(self, h):
        self.h = h
        self.t = h.space

    def full(self):
        return self.t.full()

    def packing(self, Y, eps):
        return packing_number(self.t, Y, eps)

    def count(self, Y, k):
        return self.t.count_prefixes(Y, k)

    def cells(self, Y, k, root=()):
        """Level-``k`` cylinders meeting ``Y`` inside ``root``, in lex order."""
        sub = Y.restrict(root) if root else Y
        last = None
        for p in sub.sorted():
            if len(p) >= k:
                c = p[:k]
                if c != last:
                    last = c
                    yield c
            else:
                for tail in itertools.product(*[range(b) for b in self.t.branching[len(p):k]]):
                    yield p + tail

    def candidates(self, Y, k):
        seen = set()
        out = []
        for p in Y.sorted():
            c = p[:k] if len(p) >= k else p + (0,) * (k - len(p))
            if c not in seen:
                seen.add(c)
                out.append(c)
        return out

    def restrict(self, Y, cell, k=None):
        return Y.restrict(cell)

    def residual(self, Yc, k):
        best = 0.0
        for j in range(k + 1, self.h.levels + 1):
            best = max(best, loglog(self.count(Yc, j)) / (-j * math.log(self.h.lam)))
        return best

    def nearest(self, Y, E, k, want):
        """Up to ``want`` single points of ``Y`` in distinct level-``k`` cells
        other than ``E``, nearest to ``E`` first."""
        out = []
        for ell in range(k - 1, -1, -1):
            for c in self.cells(Y, k, E[:ell]):
                if c[: ell + 1] == E[: ell + 1]:
                    continue
                piece = Y.restrict(c)
                out.append(self.t.first_leaf(piece.sorted()[0]))
                if len(out) == want:
                    return out
        return out

    def make(self, samples, kept):
        return TreeSubset.of(list(kept.prefixes) + [tuple(s) for s in samples])

    def trim(self, Y, k, limit):
        parents = list(self.cells(Y, k - 1)) if k > 1 else [()]
        keep = [next(self.cells(Y, k, p)) for p in parents]
        keep_set = set(keep)
        target = max(limit, len(keep))
        if len(keep) < target:
            for c in self.cells(Y, k):
                if c not in keep_set:
                    keep.append(c)
                    keep_set.add(c)
                    if len(keep) >= target:
                        break
        return TreeSubset.of([p for c in keep for p in Y.restrict(c).prefixes])

    def size(self, Y):
        return self.t.count_prefixes(Y, self.t.levels)

    def export(self, Y):
        return [list(p) for p in Y.sorted()]


class _ExplicitOps:
    def __init__(self, h):
        self.h = h
        self.D = h.space.D

    def full(self):
        return frozenset(range(len(self.D)))

    def packing(self, Y, eps):
        idx = sorted(Y)
        mode = "exact" if len(idx) <= EXACT_CAP else "greedy"
        return packing_number(self.h.space, idx, eps, mode)

    def _lab(self, k):
        return self.h.labels[k - 1]

    def count(self, Y, k):
        lab = self._lab(k)
        return len({int(lab[i]) for i in Y})

    def cells(self, Y, k, root=None):
        lab = self._lab(k)
        return sorted({int(lab[i]) for i in Y})

    candidates = cells

    def restrict(self, Y, cell, k):
        lab = self._lab(k)
        return frozenset(i for i in Y if lab[i] == cell)

    def residual(self, Yc, k):
        best = 0.0
        for j in range(k + 1, self.h.levels + 1):
            best = max(best, loglog(self.count(Yc, j)) / (-j * math.log(self.h.lam)))
        return best

    def nearest(self, Y, E, k, want):
        """One point of ``Y`` from each of ``want`` other level-``k`` cells.

        Cells sharing deeper ancestors with ``E`` come first; within a
        shared ancestor, sub-branches holding more candidate cells are
        exhausted before new ones are opened, so coarser levels gain as
        few new cells as possible. Remaining ties go by distance to ``E``.
        """
        lab = self._lab(k)
        best = {}
        for i in sorted(Y):
            c = int(lab[i])
            if c == E:
                continue
            d = float(self.D[E, i])
            if c not in best or d < best[c][0]:
                best[c] = (d, i)
        anc = {c: [int(self._lab(j)[c]) for j in range(1, k)] for c in best}
        e_anc = [int(self._lab(j)[E]) for j in range(1, k)]

        def shared(c):
            n = 0
            while n < k - 1 and anc[c][n] == e_anc[n]:
                n += 1
            return n

        def order(cells, level):
            if level >= k - 1 or len(cells) <= 1:
                return sorted(cells, key=lambda c: (best[c][0], c))
            groups = {}
            for c in cells:
                groups.setdefault(anc[c][level], []).append(c)
            keyed = sorted(groups.values(), key=lambda g: (-len(g), min(best[c][0] for c in g), min(g)))
            return [c for g in keyed for c in order(g, level + 1)]

        by_depth = {}
        for c in best:
            by_depth.setdefault(shared(c), []).append(c)
        out = []
        for depth in sorted(by_depth, reverse=True):
            out.extend(order(by_depth[depth], depth))
        return [best[c][1] for c in out[:want]]

    def make(self, samples, kept):
        return frozenset(kept) | frozenset(samples)

    def trim(self, Y, k, limit):
        lab, plab = self._lab(k), self._lab(k - 1) if k > 1 else None
        members = sorted(Y)
        keep = []
        if plab is not None:
            for p in sorted({int(plab[i]) for i in members}):
                c = min(int(lab[i]) for i in members if plab[i] == p)
                if c not in keep:
                    keep.append(c)
        else:
            keep.append(min(int(lab[i]) for i in members))
        target = max(limit, len(keep))
        for c in sorted({int(lab[i]) for i in members}):
            if len(keep) >= target:
                break
            if c not in keep:
                keep.append(c)
        keep = set(keep)
        return frozenset(i for i in members if int(lab[i]) in keep)

    def size(self, Y):
        return len(Y)

    def export(self, Y):
        return sorted(int(i) for i in Y)


def _ops(h):
    return _TreeOps(h) if h.is_tree else _ExplicitOps(h)


# ---------------------------------------------------------------------------
# The recursion


@dataclass
class Stage:
    k: int
    threshold: int
    trigger: int
    """``S_{Y_{n-1}}(lam**(k-1))``, which exceeds the threshold."""
    cell: object
    samples: list
    counts: dict
    """Level-``j`` cells meeting ``Y_n``, for ``j = 1..J``."""


@dataclass
class ConstructionTrace:
    beta: float
    lam: float
    levels: int
    stages: list
    sets: list
    """``Y_0 = Z, Y_1, ..., Y_n`` (``Y_n`` before the terminal trim)."""
    final_counts: dict
    flags: list
    trimmed: list

    @property
    def ks(self):
        return [s.k for s in self.stages]

    def identity_violations(self):
        """Stages where the exact count identities fail (empty when they all hold).

        At ``k_n`` exactly ``threshold + 1`` cells meet ``Y_n``; at every
        level strictly between ``k_{n-1}`` and ``k_n`` at most the
        threshold does.
        """
        bad = []
        prev = 0
        for n, s in enumerate(self.stages, start=1):
            if s.counts[s.k] != s.threshold + 1:
                bad.append((n, s.k, "at-stage", s.counts[s.k], s.threshold + 1))
            for k in range(prev + 1, s.k):
                thr = threshold(self.lam, self.beta, k)
                if s.counts[k] > thr:
                    bad.append((n, k, "between", s.counts[k], thr))
            prev = s.k
        return bad

    def to_json(self, export=None):
        out = {
            "beta": self.beta, "lambda": self.lam, "levels": self.levels, "flags": list(self.flags),
            "stages": [
                {"k": s.k, "threshold": s.threshold, "trigger": s.trigger,
                 "cell": list(s.cell) if isinstance(s.cell, tuple) else s.cell,
                 "samples": [list(x) if isinstance(x, tuple) else x for x in s.samples],
                 "counts": {str(j): c for j, c in s.counts.items()}}
                for s in self.stages
            ],
            "final_counts": {str(j): c for j, c in self.final_counts.items()},
            "trimmed_levels": list(self.trimmed),
        }
        if export is not None:
            out["sets"] = [export(Y) for Y in self.sets]
        return out


@dataclass
class YBetaResult:
    subset: object
    trace: ConstructionTrace
    hierarchy: PartitionHierarchy

    def estimates(self, schedule=None):
        """Order estimates of ``Y_beta`` on ``lam**1 .. lam**J`` by default."""
        h = self.hierarchy
        if schedule is None:
            schedule = ScaleSchedule.geometric(h.lam, 1, h.levels)
        sub = self.subset if h.is_tree else sorted(self.subset)
        return order_estimates(h.space, sub, schedule)

    def export(self):
        """Point-set document loadable by :func:`~emergence_lab.metric_space.load_space`
        (explicit backend) or a tree subset listing (tree backend)."""
        h = self.hierarchy
        if h.is_tree:
            doc = h.space.to_json()
            doc["subset"] = [list(p) for p in self.subset.sorted()]
            return doc
        return h.space.restrict(sorted(self.subset)).to_json()


def construct_Y_beta(hierarchy, beta, trim=True, strict=None):
    """Run the stage recursion for target order ``beta``.

    Stage ``n`` takes the smallest ``k > k_{n-1}`` with
    ``S_{Y_{n-1}}(lam**(k-1)) > floor(exp(lam**(-beta*k)))``, keeps the
    level-``k`` cell of largest residual order (ties to the lowest cell)
    whole inside ``Y_{n-1}``, and adds one point of ``Y_{n-1}`` from each of
    the ``threshold`` nearest other cells. When no further stage fits in
    the level budget, levels past the last stage are trimmed (one cell per
    parent first, then in order) to at most the threshold, so the finite
    set carries the target growth down to the finest level.

    If no first stage exists the whole space is returned with the flag
    ``"no-stage-found"``.

    The count at ``k_n`` is always exactly ``threshold + 1``. The bound at
    levels between stages is guaranteed on trees; on thin finite spaces it
    can be unattainable, and unless ``strict`` (the default on trees only)
    the least violating cell is used and the level is flagged.
    """
    if not isinstance(hierarchy, PartitionHierarchy):
        raise PreconditionError("construct_Y_beta needs a certified PartitionHierarchy")
    if not hierarchy.certificates or not all(c["ok"] for c in hierarchy.certificates):
        raise PreconditionError("hierarchy certificates are missing")
    if not beta >= 0:
        raise DomainError("beta must be non-negative")
    h = hierarchy
    ops = _ops(h)
    lam, J = h.lam, h.levels
    if strict is None:
        strict = h.is_tree
    flags = []
    Y = ops.full()
    sets = [Y]
    stages = []
    prev = 0
    while True:
        found = None
        for k in range(prev + 1, J + 1):
            thr = threshold(lam, beta, k)
            trig = ops.packing(Y, lam ** (k - 1))
            if trig > thr:
                found = (k, thr, trig)
                break
        if found is None:
            break
        k, thr, trig = found
        cands = ops.candidates(Y, k)
        scored = [(ops.residual(ops.restrict(Y, c, k), k), i, c) for i, c in enumerate(cands)]
        scored.sort(key=lambda t: (-t[0], t[1]))
        stage = None
        fallback = None
        for _, _, E in scored:
            samples = ops.nearest(Y, E, k, thr)
            if len(samples) < thr:
                raise PreconditionError(f"stage at level {k} found only {len(samples)} of {thr} sample cells")
            Yn = ops.make(samples, ops.restrict(Y, E, k))
            counts = {j: ops.count(Yn, j) for j in range(1, J + 1)}
            excess = sum(max(0, counts[j] - threshold(lam, beta, j)) for j in range(prev + 1, k))
            # the top-ranked cell is kept unless its samples break the bound
            # between stages, then the next one is tried
            if excess == 0:
                stage = (Stage(k, thr, trig, E, samples, counts), Yn)
                break
            if fallback is None or excess < fallback[0]:
                fallback = (excess, Stage(k, thr, trig, E, samples, counts), Yn)
        if stage is None:
            if strict:
                raise AssertionError(f"no cell at level {k} keeps the between-stage count bound")
            flags.append(f"between-bound-exceeded@{k}")
            stage = fallback[1:]
        stage, Yn = stage
        Y = Yn
        sets.append(Y)
        stages.append(stage)
        prev = k
    trimmed = []
    if not stages:
        flags.append(NO_STAGE)
    elif trim:
        for k in range(prev + 1, J + 1):
            thr = threshold(lam, beta, k)
            if ops.count(Y, k) > thr:
                Y = ops.trim(Y, k, thr)
                trimmed.append(k)
    final = {j: ops.count(Y, j) for j in range(1, J + 1)}
    trace = ConstructionTrace(beta, lam, J, stages, sets, final, flags, trimmed)
    bad = [b for b in trace.identity_violations() if strict or b[2] == "at-stage"]
    if bad:
        raise AssertionError(f"count identities violated: {bad}")
    return YBetaResult(Y, trace, h)


# ---------------------------------------------------------------------------
# Measures with prescribed metric emergence


@dataclass
class BetaMeasureResult:
    measure: DiscreteMeasure
    members: list
    """Indices into the proxy of the measures mixed into ``measure``."""
    construction: YBetaResult
    target: float
    measured: float
    curve: object
    full_exponent: float

    def to_json(self):
        return {
            "target": self.target, "measured": self.measured, "full_exponent": self.full_exponent,
            "members": list(self.members), "curve": {"epsilons": self.curve.epsilons, "counts": self.curve.counts},
            "trace": self.construction.trace.to_json(),
        }


def measure_with_emergence_beta(proxy, beta, system, schedule, metric="W1", lam=0.5, levels=None,
                                budget=MIXTURE_BUDGET, n=None, samples=256, seed=0, N_max=256,
                                full_exponent=None, distances=None):
    """Invariant measure whose metric emergence targets exponent ``beta``.

    The proxy is treated as a finite metric space of measures; ``Y_beta``
    is built in it and ``mu`` is the uniform mixture of its members. The
    metric emergence of ``mu`` is then measured on ``schedule`` with orbit
    length ``n`` (default: lcm of the member support sizes, exact for
    periodic orbit measures).
    """
    metric = MeasureMetric.parse(metric)
    eps = list(ScaleSchedule(tuple(schedule)).values) if not isinstance(schedule, ScaleSchedule) else list(schedule.values)
    D = metric.matrix(proxy) if distances is None else np.asarray(distances)
    if full_exponent is None:
        full_exponent = emergence_exponent(topological_emergence_curve(proxy, metric, eps, distances=D)).tail_max
    if not 0 <= beta <= full_exponent + 1e-9:
        raise DomainError(f"beta must lie in [0, {full_exponent:.4g}], got {beta}")
    if levels is None:
        levels = max(1, math.ceil(math.log(min(eps)) / math.log(lam)))
    space = ExplicitSpace(D, check_triangle=False)
    h = build_partition_hierarchy(space, lam, levels)
    res = construct_Y_beta(h, beta)
    members = sorted(res.subset)
    if len(members) > budget:
        raise CapacityError(f"mixture of {len(members)} measures exceeds the budget {budget}", cap="mixture_budget")
    mu = mixture([proxy[i] for i in members])
    if n is None:
        n = math.lcm(*[len(proxy[i]) for i in members])
    me = metric_emergence_curve(system, mu, n, eps, N_max=N_max, M=samples, seed=seed, metric=metric)
    measured = emergence_exponent(me.curve).tail_max if not me.curve.truncated else float("nan")
    return BetaMeasureResult(mu, members, res, float(beta), measured, me.curve, float(full_exponent))
