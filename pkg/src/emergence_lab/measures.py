"""Finitely supported probability measures and the ground metrics they live on."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from typing import Any

import numpy as np

from .errors import DomainError, PreconditionError

MERGE_TOL = 1e-12


# ---------------------------------------------------------------------------
# Ground metrics


class Metric:
    """Distance on a state space. Subclasses implement ``pairwise``."""

    name = "metric"

    def canonical(self, x):
        return x

    def pairwise(self, xs, ys):
        raise NotImplementedError

    def __call__(self, x, y):
        return float(self.pairwise([x], [y])[0, 0])

    def to_json(self):
        return {"metric": self.name}


@dataclass(frozen=True)
class LineMetric(Metric):
    """|x - y| on the real line."""

    name = "line"

    def canonical(self, x):
        return x if isinstance(x, Fraction) else float(x)

    def pairwise(self, xs, ys):
        a = np.array([float(x) for x in xs])
        b = np.array([float(y) for y in ys])
        return np.abs(a[:, None] - b[None, :])


@dataclass(frozen=True)
class CircleMetric(Metric):
    """Arc distance on R/Z (total length 1)."""

    name = "circle"

    def canonical(self, x):
        if isinstance(x, Fraction):
            return x - math.floor(x)
        x = float(x) % 1.0
        return 0.0 if x >= 1.0 - MERGE_TOL else x

    def pairwise(self, xs, ys):
        a = np.array([float(x) for x in xs])
        b = np.array([float(y) for y in ys])
        g = np.abs(a[:, None] - b[None, :]) % 1.0
        return np.minimum(g, 1.0 - g)


@lru_cache(maxsize=1 << 16)
def _expand_word(x, depth):
    reps = -(-depth // len(x))
    return (x * reps)[:depth]


@dataclass(frozen=True)
class ShiftMetric(Metric):
    """``2**-j`` with ``j`` the first index (from 0) where two sequences differ.

    A state is a tuple of symbols read as the periodic sequence it repeats,
    so a periodic point is stored by one period. Sequences that agree
    through ``depth`` symbols are at distance 0.
    """

    depth: int = 64
    name = "shift"

    def canonical(self, x):
        x = tuple(int(s) for s in x)
        n = len(x)
        if n == 0:
            raise DomainError("empty symbol sequence")
        for p in range(1, n + 1):
            if n % p == 0 and x == x[:p] * (n // p):
                return x[:p]
        return x

    def expand(self, xs):
        return np.array([_expand_word(tuple(x), self.depth) for x in xs], dtype=np.int64).reshape(len(xs), self.depth)

    def pairwise(self, xs, ys):
        A = self.expand(xs)
        B = self.expand(ys)
        neq = A[:, None, :] != B[None, :, :]
        anyd = neq.any(-1)
        first = neq.argmax(-1).astype(float)
        return np.where(anyd, 2.0 ** (-first), 0.0)

    def to_json(self):
        return {"metric": self.name, "depth": self.depth}


@dataclass(frozen=True)
class SupMetric(Metric):
    """Sup-norm distance between coordinate tuples."""

    name = "sup"

    def canonical(self, x):
        return tuple(float(v) for v in x)

    def pairwise(self, xs, ys):
        a = np.array(xs, dtype=float)
        b = np.array(ys, dtype=float)
        return np.max(np.abs(a[:, None, :] - b[None, :, :]), axis=-1)


@dataclass(frozen=True, eq=False)
class MatrixMetric(Metric):
    """Index metric backed by an :class:`~emergence_lab.metric_space.ExplicitSpace`."""

    space: Any = None
    name = "matrix"

    def canonical(self, x):
        i = int(x)
        if not 0 <= i < len(self.space):
            raise DomainError(f"index {i} outside the space")
        return i

    def pairwise(self, xs, ys):
        return self.space.D[np.ix_(np.asarray(xs, int), np.asarray(ys, int))]

    def __eq__(self, other):
        return isinstance(other, MatrixMetric) and other.space is self.space

    def __hash__(self):
        return id(self.space)


def metric_from_json(doc):
    kind = doc.get("metric")
    if kind == "line":
        return LineMetric()
    if kind == "circle":
        return CircleMetric()
    if kind == "shift":
        return ShiftMetric(doc.get("depth", 64))
    if kind == "sup":
        return SupMetric()
    raise DomainError(f"unknown metric {kind!r}")


# ---------------------------------------------------------------------------
# Measures


def _merge(support, weights, metric):
    """Canonicalise states and merge duplicates by adding weights."""
    exact = all(isinstance(w, (int, Fraction)) for w in weights)
    pts = [metric.canonical(x) if metric is not None else x for x in support]
    acc = {}
    order = []
    for x, w in zip(pts, weights):
        key = x
        if isinstance(x, float):
            # snap floats within MERGE_TOL of an existing key
            for k in order:
                if isinstance(k, float) and abs(k - x) <= MERGE_TOL:
                    key = k
                    break
        if key not in acc:
            acc[key] = Fraction(0) if exact else 0.0
            order.append(key)
        acc[key] += w
    items = [(k, acc[k]) for k in order if acc[k] > 0]
    try:
        items.sort(key=lambda kv: kv[0])
    except TypeError:
        pass
    return tuple(k for k, _ in items), tuple(Fraction(w) if exact else float(w) for _, w in items)


class DiscreteMeasure:
    """Finitely supported probability measure.

    Weights built from orbits and mixtures stay as :class:`fractions.Fraction`;
    they are converted to floats only when a distance is computed.
    """

    __slots__ = ("support", "weights", "metric", "meta")

    def __init__(self, support, weights, metric=None, meta=None):
        if len(support) != len(weights):
            raise DomainError("support and weights differ in length")
        if len(support) == 0:
            raise DomainError("measure needs a nonempty support")
        if any(w < 0 for w in weights):
            raise DomainError("weights must be non-negative")
        total = sum(weights)
        if abs(float(total) - 1.0) > 1e-12:
            raise DomainError(f"weights sum to {float(total)}, not 1")
        self.support, self.weights = _merge(list(support), list(weights), metric)
        self.metric = metric
        self.meta = dict(meta) if meta else {}

    @classmethod
    def dirac(cls, x, metric=None):
        return cls([x], [Fraction(1)], metric)

    @classmethod
    def uniform(cls, points, metric=None, meta=None):
        n = len(points)
        if n == 0:
            raise DomainError("uniform measure on an empty set")
        return cls(list(points), [Fraction(1, n)] * n, metric, meta)

    def __len__(self):
        return len(self.support)

    def weights_array(self):
        return np.array([float(w) for w in self.weights])

    def is_exact(self):
        return all(isinstance(w, Fraction) for w in self.weights)

    def key(self):
        """Hashable identity (support and weights)."""
        return (self.support, self.weights)

    def __eq__(self, other):
        return isinstance(other, DiscreteMeasure) and self.key() == other.key()

    def __hash__(self):
        return hash(self.key())

    def __repr__(self):
        body = ", ".join(f"{x}: {w}" for x, w in zip(self.support, self.weights))
        return f"DiscreteMeasure({{{body}}})"

    def to_json(self):
        def enc_pt(x):
            if isinstance(x, Fraction):
                return str(x)
            if isinstance(x, tuple):
                return list(x)
            return x

        def enc_w(w):
            return str(w) if isinstance(w, Fraction) else float(w)

        out = {"support": [enc_pt(x) for x in self.support], "weights": [enc_w(w) for w in self.weights]}
        if self.meta:
            out["meta"] = self.meta
        return out

    @classmethod
    def from_json(cls, doc, metric=None):
        if isinstance(doc, str):
            doc = json.loads(doc)

        def dec(v):
            if isinstance(v, str):
                return Fraction(v)
            if isinstance(v, list):
                return tuple(v)
            return v

        return cls([dec(x) for x in doc["support"]], [dec(w) for w in doc["weights"]], metric, doc.get("meta"))


def _same_metric(mu, nu, metric):
    if metric is not None:
        for m in (mu, nu):
            if m.metric is not None and m.metric != metric:
                raise DomainError("measure lives on a different metric space")
        return metric
    if mu.metric is None or nu.metric is None:
        raise DomainError("no metric given and a measure carries none")
    if mu.metric != nu.metric:
        raise DomainError("measures live on different metric spaces")
    return mu.metric


def cost_matrix(mu, nu, metric=None):
    metric = _same_metric(mu, nu, metric)
    return metric.pairwise(list(mu.support), list(nu.support))


def empirical_measure(system, x, n):
    """Uniform measure on ``x, f(x), ..., f^(n-1)(x)`` with duplicates merged."""
    if int(n) != n or n < 1:
        raise DomainError("n must be a positive integer")
    orbit = system.orbit(x, int(n))
    return DiscreteMeasure(orbit, [Fraction(1, int(n))] * int(n), system.metric,
                           meta={"system": system.name, "n": int(n)})


def periodic_dirac(orbit, metric=None):
    """Uniform measure on a periodic orbit given as a list of distinct states."""
    if len(orbit) == 0:
        raise PreconditionError("orbit must be nonempty")
    states = [metric.canonical(x) for x in orbit] if metric is not None else list(orbit)
    if len(set(states)) != len(states):
        raise PreconditionError("orbit states must be pairwise distinct")
    return DiscreteMeasure.uniform(states, metric, meta={"period": len(states)})


def mixture(measures, weights=None):
    """Convex combination ``sum w_i mu_i`` (uniform weights by default)."""
    if len(measures) == 0:
        raise DomainError("empty mixture")
    if weights is None:
        weights = [Fraction(1, len(measures))] * len(measures)
    if len(weights) != len(measures):
        raise DomainError("one weight per measure required")
    metric = measures[0].metric
    support, w = [], []
    for m, a in zip(measures, weights):
        if m.metric != metric:
            raise DomainError("mixture components live on different spaces")
        support.extend(m.support)
        w.extend(a * b for b in m.weights)
    return DiscreteMeasure(support, w, metric)


def min_support_distance(mu, nu, metric=None):
    """``min d(x, y)`` over ``x`` in supp mu and ``y`` in supp nu."""
    return float(cost_matrix(mu, nu, metric).min())


def support_distance_matrix(measures, metric=None, chunk=256):
    """Matrix of :func:`min_support_distance` over a list of measures,
    computed from one pass over all support points."""
    if metric is None:
        metric = measures[0].metric
    for m in measures:
        if m.metric is not None and m.metric != metric:
            raise DomainError("measures live on different metric spaces")
    pts = [x for m in measures for x in m.support]
    starts = np.cumsum([0] + [len(m) for m in measures])[:-1]
    n = len(measures)
    rows = np.empty((n, len(pts)))
    for a in range(0, n, chunk):
        b = min(n, a + chunk)
        lo, hi = starts[a], starts[b - 1] + len(measures[b - 1])
        P = metric.pairwise(pts[lo:hi], pts)
        rows[a:b] = np.minimum.reduceat(P, starts[a:b] - lo, axis=0)
    return np.minimum.reduceat(rows, starts, axis=1)


def apart(mu, nu, eps, metric=None):
    """True when the supports are at distance at least ``eps``."""
    return min_support_distance(mu, nu, metric) >= eps
