"""Emergence curves and exponents.

Topological emergence covers a finite proxy of the ergodic measures by
balls in a measure metric. Metric emergence counts how many centre
measures are needed to approximate, on average, the empirical measures
of sampled orbits. Both curves are summarised by the double-logarithmic
exponent ``loglog count / -log eps``.
"""

from __future__ import annotations

import itertools
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError, PreconditionError
from .measures import empirical_measure, support_distance_matrix
from .metric_space import (EXACT_CAP, ExplicitSpace, ScaleSchedule, covering_number, loglog,
                           ratios_from_counts, tail_slice, _lstsq)
from .transport import levy_prokhorov, wasserstein

EXHAUSTIVE_CENTRES = 3


# ---------------------------------------------------------------------------
# Measure metrics


@dataclass(frozen=True)
class MeasureMetric:
    """``W_p`` (``kind='W'``) or Levy-Prokhorov (``kind='LP'``)."""

    kind: str = "W"
    p: float = 1.0

    def __post_init__(self):
        if self.kind not in ("W", "LP"):
            raise DomainError(f"unknown measure metric {self.kind!r}")
        if self.kind == "W" and not self.p >= 1:
            raise DomainError("p must be >= 1")

    @classmethod
    def parse(cls, spec):
        if isinstance(spec, MeasureMetric):
            return spec
        if isinstance(spec, str):
            if spec.upper() == "LP":
                return cls("LP", 1.0)
            if spec.upper().startswith("W"):
                return cls("W", float(spec[1:] or 1))
        if isinstance(spec, dict):
            return cls(spec.get("kind", "W"), float(spec.get("p", 1)))
        raise DomainError(f"cannot read measure metric {spec!r}")

    @property
    def label(self):
        return "LP" if self.kind == "LP" else "W"

    @property
    def p_label(self):
        return "" if self.kind == "LP" else f"{self.p:g}"

    def __call__(self, mu, nu):
        if self.kind == "LP":
            return levy_prokhorov(mu, nu)
        return wasserstein(mu, nu, self.p)

    def matrix(self, measures, others=None, threads=1):
        """Distance matrix; pairs are spread over ``threads`` workers and
        written back by index, so the result does not depend on scheduling."""
        if others is None:
            n = len(measures)
            pairs = [(i, j) for i in range(n) for j in range(i + 1, n)]
            vals = self._map(lambda ij: self(measures[ij[0]], measures[ij[1]]), pairs, threads)
            D = np.zeros((n, n))
            for (i, j), v in zip(pairs, vals):
                D[i, j] = D[j, i] = v
            return D
        pairs = [(i, j) for i in range(len(measures)) for j in range(len(others))]
        vals = self._map(lambda ij: self(measures[ij[0]], others[ij[1]]), pairs, threads)
        D = np.zeros((len(measures), len(others)))
        for (i, j), v in zip(pairs, vals):
            D[i, j] = v
        return D

    @staticmethod
    def _map(fn, items, threads):
        if threads <= 1 or len(items) < 64:
            return [fn(x) for x in items]
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(fn, items, chunksize=64))


# ---------------------------------------------------------------------------
# Curves and exponents


@dataclass
class EmergenceCurve:
    """Pairs ``(eps, count)``; counts are non-increasing in ``eps``.

    ``bound_kind`` per scale is ``exact`` or ``upper`` (greedy covering or
    heuristic centre search).
    """

    epsilons: list
    counts: list
    metric: MeasureMetric
    bound_kind: list
    provenance: dict = field(default_factory=dict)
    truncated: bool = False

    def check_monotone(self):
        """Indices ``i`` where ``count`` drops although ``eps`` shrank."""
        order = np.argsort(self.epsilons)[::-1]
        bad = []
        for a, b in zip(order, order[1:]):
            if self.counts[b] is not None and self.counts[a] is not None and self.counts[b] < self.counts[a]:
                bad.append(int(b))
        return bad

    def to_csv(self):
        lines = ["epsilon,count,bound_kind,metric,p"]
        for e, c, bk in zip(self.epsilons, self.counts, self.bound_kind):
            lines.append(f"{e!r},{'' if c is None else c},{bk},{self.metric.label},{self.metric.p_label}")
        return "\n".join(lines) + "\n"


@dataclass
class ExponentFit:
    epsilons: list
    counts: list
    ratios: list
    tail_max: float
    tail_min: float
    slope: float
    residual: float
    degenerate: bool = False

    def to_json(self):
        return {
            "epsilons": self.epsilons, "counts": self.counts, "ratios": self.ratios,
            "tail_max": self.tail_max, "tail_min": self.tail_min, "slope": self.slope,
            "residual": self.residual, "degenerate": self.degenerate,
        }


def emergence_exponent(curve, counts=None):
    """Per-scale ``loglog count / -log eps`` (``log log 1 = 0``), the
    maximum and minimum over the last half of the scales, and a
    least-squares slope of ``loglog count`` against ``-log eps``.

    Accepts a curve, or ``(epsilons, counts)``.
    """
    if counts is None:
        eps, counts = list(curve.epsilons), list(curve.counts)
    else:
        eps, counts = list(curve), list(counts)
    pairs = [(e, c) for e, c in zip(eps, counts) if c is not None]
    if not pairs:
        raise PreconditionError("curve is empty")
    eps = [float(e) for e, _ in pairs]
    counts = [int(c) for _, c in pairs]
    if any(c < 1 for c in counts):
        raise DomainError("counts must be positive")
    _, ratios = ratios_from_counts(eps, counts)
    n = len(eps)
    tail = [ratios[i] for i in list(range(n))[tail_slice(n)] if not math.isnan(ratios[i])]
    degenerate = all(c == 1 for c in counts)
    if degenerate or not tail:
        tmax = tmin = 0.0
    else:
        tmax, tmin = max(tail), min(tail)
    ok = [i for i in range(n) if eps[i] < 1]
    slope, resid = _lstsq([-math.log(eps[i]) for i in ok], [loglog(counts[i]) for i in ok])
    return ExponentFit(eps, counts, ratios, tmax, tmin, slope, resid, degenerate)


def _schedule_values(schedule):
    if isinstance(schedule, ScaleSchedule):
        return list(schedule.values)
    return list(ScaleSchedule(tuple(schedule)).values)


def topological_emergence_curve(proxy, metric="W1", schedule=(), cap=EXACT_CAP, distances=None,
                                provenance=None):
    """Covering numbers of a finite proxy set of measures by ``eps``-balls
    (centres in the proxy), exact up to ``cap`` measures and greedy above."""
    if len(proxy) == 0:
        raise PreconditionError("proxy must be nonempty")
    metric = MeasureMetric.parse(metric)
    eps = _schedule_values(schedule)
    D = metric.matrix(proxy) if distances is None else np.asarray(distances)
    space = ExplicitSpace(D, check_triangle=False)
    mode = "exact" if len(proxy) <= cap else "greedy"
    counts = [covering_number(space, None, e, mode, cap) for e in eps]
    kind = "exact" if mode == "exact" else "upper"
    prov = {"proxy_size": len(proxy)}
    prov.update(provenance or {})
    return EmergenceCurve(eps, counts, metric, [kind] * len(eps), prov)


# ---------------------------------------------------------------------------
# Apartness lower bound


@dataclass
class ApartBound:
    epsilons: list
    counts: list
    gamma: float
    """Least-squares slope of ``log count`` against ``-log eps``."""
    mo_lower_bound: float
    """Tail minimum of ``log count / -log eps`` (liminf proxy)."""
    ratios: list


def greedy_apart_family(S, eps):
    """Indices of a maximal family of pairwise ``eps``-apart measures.

    ``S`` is the matrix of support distances. Minimum-degree greedy on the
    conflict graph (pairs closer than ``eps``), ties to the lowest index;
    the size is a lower bound on the maximal apart cardinality.
    """
    S = np.asarray(S)
    n = len(S)
    conflict = S < eps
    np.fill_diagonal(conflict, False)
    alive = np.ones(n, dtype=bool)
    chosen = []
    while alive.any():
        deg = conflict[:, alive].sum(axis=1)
        deg[~alive] = n + 1
        i = int(np.argmin(deg))
        chosen.append(i)
        alive &= ~conflict[i]
        alive[i] = False
    return sorted(chosen)


def apart_lower_bound(proxy, schedule, metric=None):
    """Greedy pairwise-apart counts per scale and the exponents they give.

    ``gamma`` is the least-squares slope of ``log count`` against
    ``-log eps``; ``mo_lower_bound`` is the tail minimum of
    ``log count / -log eps``, the liminf proxy that bounds the lower metric
    order of the measure space from below.
    """
    if len(proxy) == 0:
        raise PreconditionError("proxy must be nonempty")
    eps = _schedule_values(schedule)
    S = support_distance_matrix(proxy, metric)
    counts = [len(greedy_apart_family(S, e)) for e in eps]
    t = [-math.log(e) for e in eps]
    ratios = [math.log(c) / ti if ti > 0 else float("nan") for c, ti in zip(counts, t)]
    if all(c == 1 for c in counts):
        gamma, lower = 0.0, 0.0
    else:
        gamma, _ = _lstsq(t, [math.log(c) for c in counts])
        tail = [r for r in ratios[tail_slice(len(ratios))] if not math.isnan(r)]
        lower = min(tail) if tail else 0.0
    return ApartBound(eps, counts, gamma, lower, ratios)


# ---------------------------------------------------------------------------
# Metric emergence


def _kmedian_cost(Dw, centres):
    return float(np.min(Dw[:, centres], axis=1).sum())


def optimal_centres(D, weights, n_centres, exhaustive=EXHAUSTIVE_CENTRES):
    """Weighted k-median over candidate centres (columns of ``D``).

    Exhaustive for ``n_centres <= exhaustive``; otherwise greedy addition
    followed by single swaps until no swap improves. Returns
    ``(cost, centres, exact)``.
    """
    D = np.asarray(D, float)
    w = np.asarray(weights, float)
    Dw = D * w[:, None]
    m = D.shape[1]
    k = min(n_centres, m)
    if k <= exhaustive and math.comb(m, k) <= 200_000:
        best = (math.inf, ())
        for comb in itertools.combinations(range(m), k):
            c = float(np.min(Dw[:, comb], axis=1).sum())
            if c < best[0] - 1e-15:
                best = (c, comb)
        return best[0], list(best[1]), True
    centres = []
    cur = np.full(D.shape[0], np.inf)
    for _ in range(k):
        gains = np.minimum(cur[:, None], D).T @ w
        gains[centres] = np.inf
        j = int(np.argmin(gains))
        centres.append(j)
        cur = np.minimum(cur, D[:, j])
    cost = float(cur @ w)
    improved = True
    while improved:
        improved = False
        for a in range(len(centres)):
            others = centres[:a] + centres[a + 1:]
            base = np.min(D[:, others], axis=1) if others else np.full(D.shape[0], np.inf)
            trial = np.minimum(base[:, None], D).T @ w
            trial[others] = np.inf
            j = int(np.argmin(trial))
            if trial[j] < cost - 1e-12:
                centres[a] = j
                cost = float(trial[j])
                improved = True
    return cost, centres, False


@dataclass
class MetricEmergenceResult:
    curve: EmergenceCurve
    costs: dict
    stable: list
    n_distinct: int


def sample_points(mu, M, rng):
    """``M`` states drawn from ``mu`` (reproducible under ``rng``)."""
    w = mu.weights_array()
    idx = rng.choice(len(mu), size=M, p=w / w.sum())
    return [mu.support[i] for i in idx]


def metric_emergence_curve(system, mu, n, schedule, N_max=16, M=256, seed=0, metric="W1",
                           extra_centres=None):
    """Minimal number of centre measures whose mean distance to the sampled
    empirical measures ``e_n(x)``, ``x ~ mu``, is at most ``eps``.

    Centres are the distinct sampled empirical measures, plus
    ``extra_centres`` when given. Stability of ``e_n`` is checked against
    ``e_2n`` (mean drift at most ``eps / 10``) and reported per scale.
    """
    metric = MeasureMetric.parse(metric)
    eps = _schedule_values(schedule)
    rng = np.random.default_rng(seed)
    xs = sample_points(mu, M, rng)
    uniq = {}
    order = []
    drift_total = 0.0
    drift_cache = {}
    for x in xs:
        key = x
        if key not in drift_cache:
            e1 = empirical_measure(system, x, n)
            e2 = empirical_measure(system, x, 2 * n)
            drift_cache[key] = (e1, metric(e1, e2))
        e1, dr = drift_cache[key]
        drift_total += dr
        k = e1.key()
        if k not in uniq:
            uniq[k] = [e1, 0]
            order.append(k)
        uniq[k][1] += 1
    drift = drift_total / M
    measures = [uniq[k][0] for k in order]
    weights = np.array([uniq[k][1] for k in order], float) / M
    cands = list(measures) + list(extra_centres or [])
    D = np.zeros((len(measures), len(cands)))
    D[:, : len(measures)] = metric.matrix(measures)
    if extra_centres:
        D[:, len(measures):] = metric.matrix(measures, list(extra_centres))
    costs = {}
    exact = {}

    def cost(N):
        if N not in costs:
            c, _, ex = optimal_centres(D, weights, N)
            costs[N] = c
            exact[N] = ex
        return costs[N]

    counts, kinds, stable = [], [], []
    truncated = False
    for e in eps:
        found = None
        for N in range(1, N_max + 1):
            if cost(N) <= e * (1 + 1e-12):
                found = N
                break
            if N >= len(cands):
                break
        if found is None:
            truncated = True
            counts.append(None)
            kinds.append("truncated")
        else:
            counts.append(found)
            # exact when every N below was ruled out exhaustively
            ok = all(exact[j] for j in range(1, found))
            kinds.append("exact" if ok else "upper")
        stable.append(drift <= e / 10)
    prov = {"system": system.name, "n": n, "samples": M, "seed": seed, "distinct": len(measures),
            "drift": drift, "centre_pool": "sample+extra" if extra_centres else "sample"}
    curve = EmergenceCurve(eps, counts, metric, kinds, prov, truncated)
    return MetricEmergenceResult(curve, costs, stable, len(measures))
