"""Finite-resolution metric spaces, separated sets, covering numbers and
metric orders.

Two backends are provided. :class:`ExplicitSpace` stores a full distance
table. :class:`TreeSpace` is an ultrametric tree whose leaves are never
materialised unless asked for; packing and covering counts on it are
computed from branching products, which is what makes double-exponential
growth ``S(eps) ~ exp(eps**-gamma)`` observable over several scales.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from itertools import product as iproduct

import numpy as np

from .errors import CapacityError, DomainError, PreconditionError

EXACT_CAP = 64
LEAF_BUDGET = 10_000
_REL_TOL = 1e-12


def _separated(d, eps):
    return d >= eps * (1.0 - _REL_TOL)


def _within(d, eps):
    return d <= eps * (1.0 + _REL_TOL)


def loglog(count):
    """``log log count`` with the convention ``log log 1 = 0``.

    Counts below ``e`` would give a negative value; they are floored at 0
    so that every exponent estimate stays non-negative.
    """
    if count < 1:
        raise DomainError(f"count must be >= 1, got {count}")
    lc = math.log(count)
    if lc <= 1.0:
        return 0.0
    return math.log(lc)


# ---------------------------------------------------------------------------
# Scales


@dataclass(frozen=True)
class ScaleSchedule:
    """A strictly decreasing list of scales in ``(0, 1)``-ish territory."""

    values: tuple

    def __post_init__(self):
        vals = tuple(float(v) for v in self.values)
        if len(vals) == 0:
            raise DomainError("schedule is empty")
        if any(v <= 0 for v in vals):
            raise DomainError("schedule values must be positive")
        if any(b >= a for a, b in zip(vals, vals[1:])):
            raise DomainError("schedule must be strictly decreasing")
        object.__setattr__(self, "values", vals)

    @classmethod
    def geometric(cls, lam, j_min, j_max, step=1.0):
        """Scales ``lam**j`` for ``j = j_min, j_min + step, ..., j_max``."""
        if not 0 < lam < 1:
            raise DomainError("lambda must lie in (0, 1)")
        n = int(round((j_max - j_min) / step)) + 1
        js = [j_min + i * step for i in range(n)]
        return cls(tuple(lam ** j for j in js))

    @classmethod
    def from_config(cls, cfg):
        if isinstance(cfg, (list, tuple)):
            return cls(tuple(cfg))
        if "values" in cfg:
            return cls(tuple(cfg["values"]))
        return cls.geometric(cfg["lambda"], cfg["j_min"], cfg["j_max"], cfg.get("step", 1.0))

    def check_against(self, diameter):
        if self.values[0] > diameter * (1 + _REL_TOL) and diameter > 0:
            raise DomainError(
                f"schedule starts at {self.values[0]} above the diameter {diameter}"
            )

    def __len__(self):
        return len(self.values)

    def __iter__(self):
        return iter(self.values)


# ---------------------------------------------------------------------------
# Explicit backend


class ExplicitSpace:
    """Finite metric space given by a symmetric distance table."""

    backend = "explicit"

    def __init__(self, distances, labels=None, check_triangle=True):
        D = np.array(distances, dtype=float)
        if D.ndim != 2 or D.shape[0] != D.shape[1]:
            raise DomainError("distance table must be square")
        if D.shape[0] == 0:
            raise DomainError("space must contain at least one point")
        if np.any(D < 0):
            raise DomainError("distances must be non-negative")
        if np.any(np.diag(D) != 0):
            raise DomainError("diagonal must be zero")
        if not np.array_equal(D, D.T):
            if np.max(np.abs(D - D.T)) > 1e-12:
                raise DomainError("distance table is not symmetric")
            D = 0.5 * (D + D.T)
        if check_triangle and D.shape[0] <= 2048:
            scale = max(1.0, float(D.max()))
            for k in range(D.shape[0]):
                viol = D - (D[:, k : k + 1] + D[k : k + 1, :])
                if viol.max() > 1e-12 * scale:
                    raise DomainError("distance table violates the triangle inequality")
        D.setflags(write=False)
        self.D = D
        self.labels = list(labels) if labels is not None else list(range(D.shape[0]))
        if len(self.labels) != D.shape[0]:
            raise DomainError("labels do not match the number of points")

    @classmethod
    def from_points(cls, points, kind="line"):
        """Points on the line, the unit circle R/Z, or rows of a sup-norm cloud."""
        x = np.asarray(points, dtype=float)
        if kind == "line":
            D = np.abs(x[:, None] - x[None, :])
        elif kind == "circle":
            g = np.abs(x[:, None] - x[None, :]) % 1.0
            D = np.minimum(g, 1.0 - g)
        elif kind == "sup":
            D = np.max(np.abs(x[:, None, :] - x[None, :, :]), axis=-1)
        else:
            raise DomainError(f"unknown point kind {kind!r}")
        return cls(D, labels=list(points), check_triangle=False)

    def __len__(self):
        return self.D.shape[0]

    @property
    def diameter(self):
        return float(self.D.max())

    def full(self):
        return np.arange(len(self))

    def distance(self, i, j):
        return float(self.D[i, j])

    def restrict(self, subset):
        idx = self._subset(subset)
        return ExplicitSpace(self.D[np.ix_(idx, idx)], [self.labels[i] for i in idx], check_triangle=False)

    def _subset(self, subset):
        if subset is None:
            return self.full()
        idx = np.unique(np.asarray(subset, dtype=int))
        if idx.size == 0:
            raise PreconditionError("subset must be nonempty")
        if idx[0] < 0 or idx[-1] >= len(self):
            raise DomainError("subset index out of range")
        return idx

    def to_json(self):
        labels = [lab if isinstance(lab, (int, float, str)) else str(lab) for lab in self.labels]
        return {"backend": "explicit", "points": labels, "distances": self.D.tolist()}


# ---------------------------------------------------------------------------
# Ultrametric tree backend


@dataclass(frozen=True)
class TreeSubset:
    """Union of cylinders (prefixes) in a :class:`TreeSpace`.

    A prefix of full depth is a single leaf. Canonical form keeps no prefix
    that extends another one.
    """

    prefixes: frozenset

    @classmethod
    def of(cls, prefixes):
        ps = sorted({tuple(p) for p in prefixes}, key=lambda p: (len(p), p))
        kept = []
        keep_set = set()
        for p in ps:
            if any(p[:i] in keep_set for i in range(len(p) + 1)):
                continue
            kept.append(p)
            keep_set.add(p)
        return cls(frozenset(kept))

    def union(self, other):
        return TreeSubset.of(self.prefixes | other.prefixes)

    def restrict(self, cell):
        """Intersection with the cylinder ``cell``."""
        cell = tuple(cell)
        out = []
        for p in self.prefixes:
            if len(p) <= len(cell) and cell[: len(p)] == p:
                out.append(cell)
            elif len(p) > len(cell) and p[: len(cell)] == cell:
                out.append(p)
        return TreeSubset.of(out)

    def is_empty(self):
        return not self.prefixes

    def issubset(self, other):
        """Sufficient test: each cylinder lies under a cylinder of ``other``.

        Use :meth:`TreeSpace.is_subset` for the exact answer.
        """
        return all(_covered_by(p, other) for p in self.prefixes)

    def sorted(self):
        return sorted(self.prefixes)


def _covered_by(p, other):
    return any(len(q) <= len(p) and p[: len(q)] == q for q in other.prefixes)


class TreeSpace:
    """Ultrametric tree: leaves are words ``(a_1, ..., a_J)`` with
    ``0 <= a_j < branching[j-1]``; two leaves that first differ at level
    ``j`` are at distance ``unit * lam**j``.
    """

    backend = "tree"

    def __init__(self, lam, branching, unit=1.0, leaf_budget=LEAF_BUDGET):
        if not 0 < lam < 1:
            raise DomainError("lambda must lie in (0, 1)")
        b = tuple(int(v) for v in branching)
        if len(b) == 0 or any(v < 1 for v in b):
            raise DomainError("branching counts must be positive integers")
        self.lam = float(lam)
        self.branching = b
        self.unit = float(unit)
        self.leaf_budget = int(leaf_budget)

    @classmethod
    def for_metric_order(cls, gamma, lam, levels, **kw):
        """Tree whose cumulative counts track ``floor(exp(lam**(-gamma*j)))``.

        Branching numbers must be integers, so each ``b_j`` is the rounded
        ratio of consecutive targets (at least 1).
        """
        b = []
        prod = 1
        for j in range(1, levels + 1):
            target = math.floor(math.exp(lam ** (-gamma * j)))
            bj = max(1, int(round(target / prod)))
            b.append(bj)
            prod *= bj
        return cls(lam, b, **kw)

    @classmethod
    def shift(cls, m, depth):
        """Truncated one-sided m-shift with ``d = 2**-(first difference index)``."""
        return cls(0.5, [m] * depth, unit=2.0)

    @property
    def levels(self):
        return len(self.branching)

    def scale(self, j):
        return self.unit * self.lam ** j

    @property
    def n_leaves(self):
        return math.prod(self.branching)

    @property
    def diameter(self):
        for j, bj in enumerate(self.branching, start=1):
            if bj >= 2:
                return self.scale(j)
        return 0.0

    def full(self):
        return TreeSubset.of([()])

    def cells_below(self, prefix_len, depth):
        """Number of depth-``depth`` prefixes inside one cylinder of length ``prefix_len``."""
        return math.prod(self.branching[prefix_len:depth])

    def count_prefixes(self, subset, depth):
        depth = min(depth, self.levels)
        seen = set()
        total = 0
        for p in subset.prefixes:
            if len(p) >= depth:
                seen.add(p[:depth])
            else:
                total += self.cells_below(len(p), depth)
        return total + len(seen)

    def separated_depth(self, eps):
        return sum(1 for j in range(1, self.levels + 1) if _separated(self.scale(j), eps))

    def covering_depth(self, eps):
        return sum(1 for j in range(1, self.levels + 1) if not _within(self.scale(j), eps))

    def distance(self, a, b):
        for j, (x, y) in enumerate(zip(a, b), start=1):
            if x != y:
                return self.scale(j)
        return 0.0

    def leaves(self, subset=None):
        subset = self.full() if subset is None else subset
        n = sum(self.cells_below(len(p), self.levels) for p in subset.prefixes)
        if n > self.leaf_budget:
            raise CapacityError(
                f"materialising {n} leaves exceeds the leaf budget {self.leaf_budget}",
                cap="leaf_budget",
            )
        out = []
        for p in sorted(subset.prefixes):
            tails = iproduct(*[range(bj) for bj in self.branching[len(p):]])
            out.extend(p + t for t in tails)
        return out

    def is_subset(self, a, b):
        """Exact inclusion test for two :class:`TreeSubset` values."""

        def inside(p):
            if _covered_by(p, b):
                return True
            if len(p) >= self.levels or not any(len(q) > len(p) and q[: len(p)] == p for q in b.prefixes):
                return False
            return all(inside(p + (c,)) for c in range(self.branching[len(p)]))

        return all(inside(p) for p in a.prefixes)

    def first_leaf(self, prefix):
        return tuple(prefix) + (0,) * (self.levels - len(prefix))

    def to_explicit(self, subset=None):
        pts = self.leaves(subset)
        arr = np.array(pts, dtype=int).reshape(len(pts), self.levels)
        neq = arr[:, None, :] != arr[None, :, :]
        first = np.where(neq.any(-1), neq.argmax(-1) + 1, 0)
        D = np.where(first > 0, self.unit * self.lam ** first.astype(float), 0.0)
        return ExplicitSpace(D, labels=pts, check_triangle=False)

    def to_json(self):
        out = {"backend": "tree", "lambda": self.lam, "branching": list(self.branching)}
        if self.unit != 1.0:
            out["unit"] = self.unit
        return out


def load_space(doc):
    """Build a space from its JSON document (dict, JSON text or path)."""
    if isinstance(doc, str):
        doc = json.loads(doc) if doc.lstrip().startswith("{") else json.load(open(doc))
    backend = doc.get("backend")
    if backend == "explicit":
        if "distances" in doc:
            return ExplicitSpace(doc["distances"], labels=doc.get("points"))
        return ExplicitSpace.from_points(doc["points"], kind=doc.get("kind", "line"))
    if backend == "tree":
        return TreeSpace(doc["lambda"], doc["branching"], unit=doc.get("unit", 1.0),
                         leaf_budget=doc.get("leaf_budget", LEAF_BUDGET))
    raise DomainError(f"unknown backend {backend!r}")


# ---------------------------------------------------------------------------
# Packing and covering


def _check_eps(eps):
    if not eps > 0:
        raise DomainError(f"eps must be positive, got {eps}")


def _max_clique(adj):
    """Maximum clique of a graph given as a list of neighbour bitsets.

    Branch and bound with greedy colouring bounds; vertices are relabelled
    by decreasing degree first.
    """
    n = len(adj)
    order = sorted(range(n), key=lambda v: -bin(adj[v]).count("1"))
    pos = {v: i for i, v in enumerate(order)}
    nadj = [0] * n
    for v in range(n):
        bits = 0
        a = adj[v]
        while a:
            low = a & -a
            bits |= 1 << pos[low.bit_length() - 1]
            a ^= low
        nadj[pos[v]] = bits

    best = []

    def colour_sort(P):
        verts, bounds = [], []
        colour = 0
        Q = P
        while Q:
            colour += 1
            avail = Q
            while avail:
                low = avail & -avail
                v = low.bit_length() - 1
                avail &= ~low & ~nadj[v]
                Q &= ~low
                verts.append(v)
                bounds.append(colour)
        return verts, bounds

    def expand(R, P):
        nonlocal best
        verts, bounds = colour_sort(P)
        for i in range(len(verts) - 1, -1, -1):
            if len(R) + bounds[i] <= len(best):
                return
            v = verts[i]
            R.append(v)
            newP = P & nadj[v]
            if newP:
                expand(R, newP)
            elif len(R) > len(best):
                best = list(R)
            R.pop()
            P &= ~(1 << v)

    expand([], (1 << n) - 1)
    return sorted(order[v] for v in best)


def separated_set(space, subset, eps, mode="exact", cap=EXACT_CAP):
    """Indices of an eps-separated subset (explicit backend).

    ``exact`` returns a maximum one; ``greedy`` a maximal one grown by
    farthest-point insertion from the first point of ``subset``.
    """
    _check_eps(eps)
    idx = space._subset(subset)
    D = space.D[np.ix_(idx, idx)]
    n = len(idx)
    if mode == "exact":
        if n > cap:
            raise CapacityError(f"exact packing on {n} points exceeds the cap {cap}", cap="exact_cap")
        sep = _separated(D, eps)
        adj = []
        for i in range(n):
            row = 0
            for j in np.flatnonzero(sep[i]):
                if j != i:
                    row |= 1 << int(j)
            adj.append(row)
        return idx[_max_clique(adj)]
    if mode == "greedy":
        chosen = [0]
        mind = D[0].copy()
        mind[0] = -np.inf
        while True:
            j = int(np.argmax(mind))
            if not _separated(mind[j], eps) or mind[j] == -np.inf:
                break
            chosen.append(j)
            mind = np.minimum(mind, D[j])
            mind[chosen] = -np.inf
        return idx[np.array(sorted(chosen))]
    raise DomainError(f"unknown mode {mode!r}")


def packing_number(space, subset=None, eps=None, mode="exact", cap=EXACT_CAP):
    """Maximal cardinality of an eps-separated subset of ``subset``.

    On the tree backend the count is analytic and ``mode`` is ignored.
    Greedy counts are lower bounds.
    """
    _check_eps(eps)
    if isinstance(space, TreeSpace):
        subset = space.full() if subset is None else subset
        if subset.is_empty():
            raise PreconditionError("subset must be nonempty")
        return space.count_prefixes(subset, space.separated_depth(eps))
    return int(len(separated_set(space, subset, eps, mode, cap)))


def _set_cover_exact(cover):
    """Minimum number of sets covering everything; ``cover[c]`` is a bitset."""
    n = len(cover)
    universe = (1 << n) - 1
    greedy = _set_cover_greedy(cover)
    best = [len(greedy)]
    max_cov = max(bin(c).count("1") for c in cover)
    # which centres cover point i
    covers_pt = [[c for c in range(n) if cover[c] >> i & 1] for i in range(n)]

    def rec(covered, used):
        if covered == universe:
            best[0] = min(best[0], used)
            return
        missing = bin(universe & ~covered).count("1")
        if used + math.ceil(missing / max_cov) >= best[0]:
            return
        # branch on the uncovered point with the fewest options
        rest = universe & ~covered
        opts = None
        while rest:
            low = rest & -rest
            i = low.bit_length() - 1
            o = covers_pt[i]
            if opts is None or len(o) < len(opts):
                opts = o
            rest ^= low
        for c in sorted(opts, key=lambda c: -bin(cover[c] & ~covered).count("1")):
            rec(covered | cover[c], used + 1)

    rec(0, 0)
    return best[0]


def _set_cover_greedy(cover):
    n = len(cover)
    universe = (1 << n) - 1
    covered = 0
    chosen = []
    while covered != universe:
        gains = [bin(c & ~covered).count("1") for c in cover]
        c = int(np.argmax(gains))
        chosen.append(c)
        covered |= cover[c]
    return chosen


def covering_number(space, subset=None, eps=None, mode="exact", cap=EXACT_CAP):
    """Minimal number of closed eps-balls, centred in ``subset``, covering it.

    Greedy counts (standard greedy set cover) are upper bounds.
    """
    _check_eps(eps)
    if isinstance(space, TreeSpace):
        subset = space.full() if subset is None else subset
        if subset.is_empty():
            raise PreconditionError("subset must be nonempty")
        return space.count_prefixes(subset, space.covering_depth(eps))
    idx = space._subset(subset)
    D = space.D[np.ix_(idx, idx)]
    n = len(idx)
    if mode == "exact" and n > cap:
        raise CapacityError(f"exact covering on {n} points exceeds the cap {cap}", cap="exact_cap")
    if mode not in ("exact", "greedy"):
        raise DomainError(f"unknown mode {mode!r}")
    inball = _within(D, eps)
    if mode == "greedy":
        # numpy greedy set cover; ties go to the lowest index
        uncovered = np.ones(n, dtype=bool)
        count = 0
        while uncovered.any():
            gains = inball[:, uncovered].sum(axis=1)
            c = int(np.argmax(gains))
            uncovered &= ~inball[c]
            count += 1
        return count
    cover = []
    for c in range(n):
        bits = 0
        for j in np.flatnonzero(inball[c]):
            bits |= 1 << int(j)
        cover.append(bits)
    return _set_cover_exact(cover)


def _auto_mode(space, subset, mode, cap):
    if mode != "auto":
        return mode
    if isinstance(space, TreeSpace):
        return "exact"
    return "exact" if len(space._subset(subset)) <= cap else "greedy"


# ---------------------------------------------------------------------------
# Orders


def _lstsq(x, y):
    x = np.asarray(x, float)
    y = np.asarray(y, float)
    if len(x) < 2 or np.ptp(x) == 0:
        return 0.0, 0.0
    A = np.vstack([x, np.ones_like(x)]).T
    coef, *_ = np.linalg.lstsq(A, y, rcond=None)
    resid = float(np.sqrt(np.mean((A @ coef - y) ** 2)))
    return float(coef[0]), resid


def tail_slice(n):
    """Indices of the last ceil(n/2) entries."""
    return slice(n - math.ceil(n / 2), n)


@dataclass
class OrderEstimates:
    """Per-scale counts and limsup/liminf proxies for box dimension and metric order.

    ``upper_mo``/``lower_mo`` are the max/min of ``loglog S / -log eps`` over
    the last half of the schedule. The box proxies use secant slopes of
    ``log S`` anchored at the coarsest scale, which removes the
    ``log C / -log eps`` bias that a multiplicative constant in ``S`` leaves
    in the raw ratio (the raw tail values are kept as ``*_raw``).
    """

    epsilons: list
    packing: list
    covering: list
    box_ratio: list
    mo_ratio: list
    upper_box: float
    lower_box: float
    upper_box_raw: float
    lower_box_raw: float
    upper_mo: float
    lower_mo: float
    box_slope: float
    box_residual: float
    mo_slope: float
    mo_residual: float
    mode: str
    degenerate: bool = False
    bound_kind: str = "exact"

    def rows(self):
        for e, s, c, b, m in zip(self.epsilons, self.packing, self.covering, self.box_ratio, self.mo_ratio):
            yield e, s, c, b, m

    def to_csv(self):
        lines = ["epsilon,packing,covering,box_ratio,mo_ratio"]
        for e, s, c, b, m in self.rows():
            lines.append(f"{e!r},{s},{c},{_fmt(b)},{_fmt(m)}")
        return "\n".join(lines) + "\n"

    def summary(self):
        keys = ["upper_box", "lower_box", "upper_box_raw", "lower_box_raw", "upper_mo", "lower_mo",
                "box_slope", "box_residual", "mo_slope", "mo_residual", "mode", "degenerate", "bound_kind"]
        return {k: getattr(self, k) for k in keys}


def _fmt(x):
    return "nan" if x is None or (isinstance(x, float) and math.isnan(x)) else repr(float(x))


def ratios_from_counts(epsilons, counts):
    """Per-scale ``log S/-log eps`` and ``loglog S/-log eps`` (NaN where eps >= 1)."""
    box, mo = [], []
    for e, s in zip(epsilons, counts):
        t = -math.log(e)
        if t <= 0:
            box.append(float("nan"))
            mo.append(float("nan"))
            continue
        box.append(math.log(s) / t)
        mo.append(loglog(s) / t)
    return box, mo


def estimates_from_counts(epsilons, packing, covering=None, mode="exact", bound_kind="exact"):
    eps = [float(e) for e in epsilons]
    if len(eps) < 3:
        raise PreconditionError("at least 3 scales are needed")
    packing = [int(s) for s in packing]
    covering = list(packing) if covering is None else [int(c) for c in covering]
    if any(s < 1 for s in packing):
        raise DomainError("packing counts must be >= 1")
    box, mo = ratios_from_counts(eps, packing)
    n = len(eps)
    tail = list(range(n))[tail_slice(n)]
    t = [-math.log(e) for e in eps]
    finite_tail = [i for i in tail if not math.isnan(mo[i])]

    anchored = []
    for i in tail:
        if i == 0 or t[i] <= t[0]:
            continue
        anchored.append((math.log(packing[i]) - math.log(packing[0])) / (t[i] - t[0]))
    degenerate = all(s == 1 for s in packing)
    if degenerate:
        upper_box = lower_box = ub_raw = lb_raw = upper_mo = lower_mo = 0.0
    else:
        upper_box = max(anchored) if anchored else 0.0
        lower_box = min(anchored) if anchored else 0.0
        ub_raw = max(box[i] for i in finite_tail) if finite_tail else 0.0
        lb_raw = min(box[i] for i in finite_tail) if finite_tail else 0.0
        upper_mo = max(mo[i] for i in finite_tail) if finite_tail else 0.0
        lower_mo = min(mo[i] for i in finite_tail) if finite_tail else 0.0
    box_slope, box_res = _lstsq(t, [math.log(s) for s in packing])
    mo_slope, mo_res = _lstsq(t, [loglog(s) for s in packing])
    return OrderEstimates(
        epsilons=eps, packing=packing, covering=covering, box_ratio=box, mo_ratio=mo,
        upper_box=upper_box, lower_box=lower_box, upper_box_raw=ub_raw, lower_box_raw=lb_raw,
        upper_mo=upper_mo, lower_mo=lower_mo, box_slope=box_slope, box_residual=box_res,
        mo_slope=mo_slope, mo_residual=mo_res, mode=mode, degenerate=degenerate,
        bound_kind=bound_kind,
    )


def order_estimates(space, subset=None, schedule=None, mode="auto", cap=EXACT_CAP):
    """Box-dimension and metric-order estimates of ``subset`` over ``schedule``."""
    if not isinstance(schedule, ScaleSchedule):
        schedule = ScaleSchedule(tuple(schedule))
    if len(schedule) < 3:
        raise PreconditionError("schedule needs at least 3 scales")
    schedule.check_against(space.diameter)
    mode = _auto_mode(space, subset, mode, cap)
    pack = [packing_number(space, subset, e, mode, cap) for e in schedule]
    cov = [covering_number(space, subset, e, mode, cap) for e in schedule]
    kind = "exact" if mode == "exact" else "lower"
    return estimates_from_counts(schedule.values, pack, cov, mode=mode, bound_kind=kind)
