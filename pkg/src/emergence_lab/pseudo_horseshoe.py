"""Explicit pseudo-horseshoe model maps, a grid verifier for their defining
conditions, the balanced Hamming family and the separated family of
periodic measures built from it.

Conventions
-----------
Points of R^k are arrays whose last axis has length k. Cubes are sup-norm
balls ``D_r(x)``. The last coordinate is the folding direction; the first
coordinate carries the width of the snake and the remaining ones are
contracted by ``c`` toward ``y``.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from functools import lru_cache
from itertools import combinations

import numpy as np
from scipy import ndimage
from scipy.spatial import cKDTree

from .errors import CapacityError, DomainError, PreconditionError
from .measures import DiscreteMeasure, ShiftMetric, min_support_distance
from .transport import wasserstein

LIPSCHITZ_CAP = 1e4
GRID_CAP = 2 ** 24
HAMMING_CAP = 1_000_000


# ---------------------------------------------------------------------------
# Specification


@dataclass
class PseudoHorseshoeSpec:
    """Parameters of a (coherent) pseudo-horseshoe of type ``N`` at scale ``r``."""

    k: int = 2
    r: float = 1.0
    N: int = 3
    x: tuple = None
    y: tuple = None
    delta: float = 1.0
    eps: float = 0.1
    q: int = 1
    alpha: float = 0.5
    L: float = 1.0

    def __post_init__(self):
        self.x = tuple(float(v) for v in (self.x if self.x is not None else [0.0] * self.k))
        self.y = tuple(float(v) for v in (self.y if self.y is not None else [0.0] * self.k))
        if self.k < 2:
            raise DomainError("dimension k must be at least 2")
        if len(self.x) != self.k or len(self.y) != self.k:
            raise DomainError("centres must have k coordinates")
        if not self.r > 0:
            raise DomainError("scale r must be positive")
        if int(self.N) != self.N or self.N < 1:
            raise DomainError("type N must be a positive integer")
        if not 0 < self.eps < self.delta:
            raise DomainError("need 0 < eps < delta")
        if int(self.q) != self.q or self.q < 1:
            raise DomainError("q must be a positive integer")
        if not 0 < self.alpha < 1:
            raise DomainError("alpha must lie in (0, 1)")
        if not self.L > 0:
            raise DomainError("L must be positive")
        if self.fold_target < 1:
            raise DomainError("fold count target floor((1/eps)**(alpha*k)) must be >= 1")

    @property
    def fold_target(self):
        return math.floor((1.0 / self.eps) ** (self.alpha * self.k))

    @classmethod
    def from_dict(cls, d):
        return cls(**d)

    def to_dict(self):
        out = asdict(self)
        out["x"] = list(self.x)
        out["y"] = list(self.y)
        return out


# ---------------------------------------------------------------------------
# Model map


class ModelMap:
    """Snake-shaped homeomorphism folding ``D_r(x)`` ``N`` times.

    Slab ``j`` of the domain (last coordinate in ``[x_k - r + 2jr/N,
    x_k - r + 2(j+1)r/N]``) goes to a vertical column of half-width
    ``w = c r / N`` centred at ``a_j``; consecutive columns are joined by
    half-annuli (alternately above and below the target cube) whose apexes
    are the images of the slices ``x_k - r + 2ir/N``. The two end slices are
    pushed straight to ``y_k -+ (1 + m) r``.

    ``amplitude`` rescales the vertical coordinate around ``y_k``; values
    below 1 give counterexamples.
    """

    def __init__(self, spec, c=1 / 3, m=0.2, rho=0.25, amplitude=1.0, lipschitz_cap=LIPSCHITZ_CAP):
        if spec.N % 2 == 0:
            raise PreconditionError(
                "even N is impossible: the centre slice would be a fold slice, "
                "so phi(x) = y contradicts the slice conditions"
            )
        if not 0 < c <= 0.5:
            raise DomainError("contraction c must lie in (0, 1/2]")
        if not m > 0:
            raise DomainError("overshoot m must be positive")
        if not 0 < rho < 0.5:
            raise DomainError("turn half-width rho must lie in (0, 1/2)")
        self.spec = spec
        self.c, self.m, self.rho, self.amplitude = float(c), float(m), float(rho), float(amplitude)
        r, N = spec.r, spec.N
        self.w = self.c * r / N
        self.step = 4 * self.w
        yk = spec.y[-1]
        self.centres = spec.y[0] + (np.arange(N) - (N - 1) / 2) * self.step
        self.y_lo = yk - (1 + self.m) * r
        self.y_hi = yk + (1 + self.m) * r
        self.z_bot = self.y_lo + self.w
        self.z_top = self.y_hi - self.w
        if N > 1 and self.w > self.m * r:
            raise PreconditionError("turns would enter the target cube; increase m or decrease c")
        self.lipschitz = self._lipschitz()
        if self.lipschitz > lipschitz_cap:
            raise CapacityError(
                f"branch slopes give Lipschitz constant {self.lipschitz:.3g} above the cap {lipschitz_cap:g}",
                cap="lipschitz_cap",
            )

    def _lipschitz(self):
        r, N, rho, w, a = self.spec.r, self.spec.N, self.rho, self.w, self.amplitude
        dtau = N / (2 * r)
        straight = a * (self.z_top - self.z_bot) / (1 - 2 * rho)
        ext = a * (self.z_bot - self.y_lo) / rho
        turn = max(1.0, a) * 3 * w * math.pi / (2 * rho)
        return max(straight, ext, turn) * dtau + w / r + self.c

    def __call__(self, P):
        P = np.asarray(P, dtype=float)
        spec = self.spec
        N, r, rho, w = spec.N, spec.r, self.rho, self.w
        x, y = np.array(spec.x), np.array(spec.y)
        s = (P[..., 0] - x[0]) / r
        tau = np.clip((P[..., -1] - x[-1] + r) * N / (2 * r), 0.0, float(N))
        col = np.clip(np.floor(tau), 0, N - 1).astype(int)
        f = tau - col
        sigma = np.where(col % 2 == 0, 1.0, -1.0)
        hor = self.centres[col] + sigma * w * s
        # straight part of the column
        g = np.clip((f - rho) / (1 - 2 * rho), 0.0, 1.0)
        g = np.where(sigma > 0, g, 1 - g)
        ver = self.z_bot + g * (self.z_top - self.z_bot)
        # end extensions
        start = (col == 0) & (f < rho)
        ver = np.where(start, self.y_lo + (f / rho) * (self.z_bot - self.y_lo), ver)
        end = (col == N - 1) & (f > 1 - rho)
        ver = np.where(end, self.z_top + ((f - (1 - rho)) / rho) * (self.y_hi - self.z_top), ver)
        # turns around tau = n for n = 1..N-1
        n = np.rint(tau).astype(int)
        in_turn = (np.abs(tau - n) <= rho) & (n >= 1) & (n <= N - 1)
        if np.any(in_turn):
            nt = n[in_turn]
            left = nt - 1
            sig_l = np.where(left % 2 == 0, 1.0, -1.0)
            h = sig_l * w * s[in_turn]
            R = 2 * w - h
            phi = (tau[in_turn] - (nt - rho)) / (2 * rho)
            top = left % 2 == 0
            theta = np.where(top, math.pi * (1 - phi), math.pi * (1 + phi))
            cx = self.centres[left] + 2 * w
            cy = np.where(top, self.z_top, self.z_bot)
            hor = hor.copy()
            hor[in_turn] = cx + R * np.cos(theta)
            ver = ver.copy()
            ver[in_turn] = cy + R * np.sin(theta)
        out = np.empty_like(P)
        out[..., 0] = hor
        out[..., -1] = y[-1] + self.amplitude * (ver - y[-1])
        for i in range(1, spec.k - 1):
            out[..., i] = y[i] + self.c * (P[..., i] - x[i])
        return out

    def strip_geometry(self):
        """Closed-form gaps between vertical strips (target) and horizontal
        strips (domain), valid for ``amplitude = 1``."""
        spec = self.spec
        r, N, rho = spec.r, spec.N, self.rho
        v_gap = self.step - 2 * self.w if N > 1 else math.inf
        # fraction of the straight part whose image lies in [y_k - r, y_k + r]
        frac = 2 * r / (self.z_top - self.z_bot) * (1 - 2 * rho)
        h_gap = (1 - frac) * 2 * r / N if N > 1 else math.inf
        return {
            "v_gap": v_gap,
            "h_gap": h_gap,
            "containment_margin": r - (2 * N - 1) * self.w,
            "slice_margin": self.m * spec.r,
        }


class AffineMap:
    """``P -> y + A (P - x)``; handy for identity and counterexamples."""

    def __init__(self, A, x, y):
        self.A = np.asarray(A, dtype=float)
        self.x = np.asarray(x, dtype=float)
        self.y = np.asarray(y, dtype=float)
        self.lipschitz = float(np.abs(self.A).sum(axis=1).max())

    def __call__(self, P):
        P = np.asarray(P, dtype=float)
        return self.y + (P - self.x) @ self.A.T


def identity_map(spec):
    return AffineMap(np.eye(spec.k), spec.x, spec.x)


def build_model_map(spec, c=1 / 3, m=0.2, **kw):
    """Model map realising a pseudo-horseshoe of type ``spec.N`` at scale ``spec.r``."""
    return ModelMap(spec, c=c, m=m, **kw)


# ---------------------------------------------------------------------------
# Verifier


PASS, FAIL, INCONCLUSIVE = "pass", "fail", "inconclusive"


@dataclass
class Condition:
    name: str
    status: str
    margin: float | None = None
    detail: str = ""


@dataclass
class HorseshoeReport:
    resolution: float
    conditions: list = field(default_factory=list)
    n_strips: int = 0
    v_gap: float | None = None
    h_gap: float | None = None

    @property
    def status(self):
        st = [c.status for c in self.conditions]
        if FAIL in st:
            return FAIL
        if INCONCLUSIVE in st or not st:
            return INCONCLUSIVE
        return PASS

    def get(self, name):
        for c in self.conditions:
            if c.name == name:
                return c
        raise KeyError(name)

    def min_margin(self):
        ms = [c.margin for c in self.conditions if c.margin is not None]
        return min(ms) if ms else None

    def to_json(self):
        return {
            "status": self.status,
            "resolution": self.resolution,
            "n_strips": self.n_strips,
            "v_gap_lower_bound": self.v_gap,
            "h_gap_lower_bound": self.h_gap,
            "conditions": [asdict(c) for c in self.conditions],
        }


def _status(margin, witness):
    if margin > 0:
        return PASS
    if witness:
        return FAIL
    return INCONCLUSIVE


def _euler_closed_pixels(mask):
    """Euler characteristic of the union of closed unit squares at ``mask``."""
    H, W = mask.shape
    big = np.zeros((2 * H + 1, 2 * W + 1), dtype=bool)
    ii, jj = np.nonzero(mask)
    for di in (0, 1, 2):
        for dj in (0, 1, 2):
            big[2 * ii + di, 2 * jj + dj] = True
    vert = big[0::2, 0::2].sum()
    edges = big[1::2, 0::2].sum() + big[0::2, 1::2].sum()
    faces = big[1::2, 1::2].sum()
    return int(vert - edges + faces)


def _box_gap(A, B):
    lo = np.maximum(A.min(0), B.min(0))
    hi = np.minimum(A.max(0), B.max(0))
    return float(np.max(lo - hi))


def _set_gap(A, B):
    """Sup-norm distance between two point clouds.

    The bounding-box gap is a lower bound and is used when positive;
    otherwise the exact nearest-neighbour distance is computed.
    """
    gap = _box_gap(A, B)
    if gap > 0:
        return gap
    d, _ = cKDTree(B).query(A, p=np.inf)
    return float(d.min())


def verify_pseudo_horseshoe(phi, spec, resolution, check_coherence=True):
    """Check the pseudo-horseshoe conditions on a domain grid.

    Every sampled quantity is turned into a certified bound with the map's
    sup-norm Lipschitz constant ``phi.lipschitz``: a condition passes only
    when the bound has a positive margin, fails only on a sampled witness
    of violation, and is inconclusive otherwise. Topological conditions
    (connectedness, simple connectivity, crossing foliations) are read off
    the raster of grid nodes mapped into ``D_r(y)``; since ``phi`` is a
    homeomorphism, the strip ``V_i`` and its preimage in slab ``i`` have
    the same topology.

    Item (5c) is evaluated as: ``V_i`` is simply connected. Because ``V_i``
    is connected and meets the boundary of the target cube, every
    component of its complement in the cube is then simply connected too.

    A resolution coarser than ``r / (8 N)`` yields an inconclusive report.
    """
    r, N, k = spec.r, spec.N, spec.k
    L = float(phi.lipschitz)
    per = max(1, math.ceil((2 * r / N) / resolution))
    h = 2 * r / (N * per)
    report = HorseshoeReport(resolution=h)
    names = ["centre", "containment", "lower slices", "upper slices",
             "connected", "bottom face", "top face", "simply connected"]
    if check_coherence:
        names += ["strip separation", "crossing"]
    if resolution > r / (8 * N) * (1 + 1e-12):
        report.conditions = [Condition(nm, INCONCLUSIVE, None, "resolution coarser than r/(8N)") for nm in names]
        return report
    M = N * per
    n_pts = (M + 1) ** k
    if n_pts > GRID_CAP:
        raise CapacityError(f"grid of {n_pts} points exceeds the cap {GRID_CAP}", cap="grid_cap")
    x = np.array(spec.x)
    y = np.array(spec.y)
    axes = [x[i] - r + h * np.arange(M + 1) for i in range(k)]
    G = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1)  # last axis coordinate, last grid axis = t
    Z = phi(G)
    slack = L * h / 2
    conds = []

    # (1)
    err = float(np.max(np.abs(phi(x[None, :])[0] - y)))
    conds.append(Condition("centre", PASS if err <= 1e-9 else FAIL, None, f"|phi(x) - y| = {err:.3g}"))

    # (2)
    hdev = np.max(np.abs(Z[..., : k - 1] - y[: k - 1]), axis=-1)
    smax = float(hdev.max())
    margin2 = r - (smax + slack)
    conds.append(Condition("containment", _status(margin2, smax >= r), margin2,
                           f"sampled max horizontal deviation {smax:.6f}"))
    contained = margin2 > 0

    # (3), (4): slices at t-index multiples of per
    def slice_vals(idx):
        sl = Z[..., idx, :]
        return sl[..., -1], np.max(np.abs(sl[..., : k - 1] - y[: k - 1]), axis=-1)

    m3, w3 = math.inf, False
    for i in range(0, N // 2 + 1):
        vk, hd = slice_vals(2 * i * per)
        m3 = min(m3, (y[-1] - r) - (float(vk.max()) + slack), r - (float(hd.max()) + slack))
        w3 = w3 or bool(vk.max() >= y[-1] - r) or bool(hd.max() >= r)
    conds.append(Condition("lower slices", _status(m3, w3), float(m3)))
    m4, w4 = math.inf, False
    for i in range(0, (N - 1) // 2 + 1):
        vk, hd = slice_vals((2 * i + 1) * per)
        m4 = min(m4, (float(vk.min()) - slack) - (y[-1] + r), r - (float(hd.max()) + slack))
        w4 = w4 or bool(vk.min() <= y[-1] + r) or bool(hd.max() >= r)
    conds.append(Condition("upper slices", _status(m4, w4), float(m4)))

    # (5) strips, read in the domain
    inside = np.max(np.abs(Z - y), axis=-1) <= r
    near = np.max(np.abs(Z - y), axis=-1) <= r + slack
    vk = Z[..., -1]
    conn_ok, simple_ok, face_lo, face_hi = True, True, math.inf, math.inf
    lo_witness = hi_witness = False
    cross_ok = True
    strips = 0
    slabs = []
    for i in range(N):
        sl = (Ellipsis, slice(i * per, (i + 1) * per + 1))
        ins = inside[sl]
        slabs.append((sl, sl + (slice(None),)))
        below = float(((y[-1] - r) - vk[sl]).max())
        above = float((vk[sl] - (y[-1] + r)).max())
        face_lo = min(face_lo, below - slack)
        face_hi = min(face_hi, above - slack)
        # certified miss of a face is a definite failure
        lo_witness |= float(vk[sl].min()) - slack > y[-1] - r
        hi_witness |= float(vk[sl].max()) + slack < y[-1] + r
        if not ins.any():
            conn_ok = simple_ok = cross_ok = False
            continue
        strips += 1
        if k == 2:
            lab, ncomp = ndimage.label(ins, structure=np.ones((3, 3), dtype=int))
            if ncomp != 1:
                conn_ok = False
            if ncomp != 1 or _euler_closed_pixels(ins) != 1:
                simple_ok = False
            # crossing: each u-column of the strip is one run entered from
            # one face and left through the other
            vs = vk[sl]
            for col in range(ins.shape[0]):
                run = np.flatnonzero(ins[col])
                if run.size == 0:
                    cross_ok = False
                    break
                if run[-1] - run[0] + 1 != run.size or run[0] == 0 or run[-1] == ins.shape[1] - 1:
                    cross_ok = False
                    break
                a, b = vs[col, run[0] - 1], vs[col, run[-1] + 1]
                lo_f, hi_f = y[-1] - r, y[-1] + r
                if not ((a < lo_f and b > hi_f) or (a > hi_f and b < lo_f)):
                    cross_ok = False
                    break
    report.n_strips = strips
    topo_status = (lambda ok: PASS if ok else FAIL) if k == 2 else (lambda ok: INCONCLUSIVE)
    conds.append(Condition("connected", topo_status(conn_ok), None, f"{strips} strips found"))
    conds.append(Condition("bottom face", _status(face_lo if contained else -1, lo_witness), face_lo))
    conds.append(Condition("top face", _status(face_hi if contained else -1, hi_witness), face_hi))
    conds.append(Condition("simply connected", topo_status(simple_ok), None))

    if check_coherence:
        v_gap = h_gap = math.inf
        if N > 1:
            pieces = []
            for sl, slv in slabs:
                sel = near[sl]
                pieces.append((Z[slv][sel], G[slv][sel]))
            for a, b in combinations(range(N), 2):
                (za, ga), (zb, gb) = pieces[a], pieces[b]
                if len(za) == 0 or len(zb) == 0:
                    continue
                v_gap = min(v_gap, _set_gap(za, zb) - L * h)
                h_gap = min(h_gap, _set_gap(ga, gb) - h)
        report.v_gap, report.h_gap = v_gap, h_gap
        sep_margin = min(v_gap, h_gap) - spec.eps
        conds.append(Condition("strip separation", PASS if sep_margin > 0 else INCONCLUSIVE, sep_margin,
                               f"V gap >= {v_gap:.4f}, H gap >= {h_gap:.4f}"))
        if k == 2:
            conds.append(Condition("crossing", PASS if cross_ok and contained else FAIL, None))
        else:
            conds.append(Condition("crossing", INCONCLUSIVE, None, "raster crossing check needs k = 2"))
    report.conditions = conds
    return report


# ---------------------------------------------------------------------------
# Hamming family


def _popcount(a):
    return np.bitwise_count(a) if hasattr(np, "bitwise_count") else np.array([bin(int(v)).count("1") for v in a])


def balanced_words(N):
    """All balanced words of length ``N`` as int bitmasks, in lexicographic
    order of the words (bit ``N-1`` is the first letter)."""
    out = np.fromiter((sum(1 << (N - 1 - i) for i in c) for c in combinations(range(N), N // 2)),
                      dtype=np.int64, count=math.comb(N, N // 2))
    return np.sort(out)[::-1]


def _bits(v, N):
    return tuple((int(v) >> (N - 1 - i)) & 1 for i in range(N))


@dataclass
class HammingFamily:
    N: int
    min_distance: int
    words: list
    exact_max: int | None = None

    def __len__(self):
        return len(self.words)


def hamming_family(N, cap=HAMMING_CAP, exact=None):
    """Greedy maximal ``N/4``-separated family of balanced binary words.

    Words are scanned in lexicographic order (``1 > 0``) and kept when at
    Hamming distance ``>= N/4`` from all kept words. For ``N <= 12`` the
    exact maximum is also computed (set ``exact=False`` to skip).
    """
    if N % 2:
        raise PreconditionError("N must be even")
    if not 4 <= N <= 32:
        raise DomainError("N must lie in [4, 32]")
    ncand = math.comb(N, N // 2)
    if ncand > cap:
        raise CapacityError(f"{ncand} balanced words exceed the cap {cap}", cap="hamming_cap")
    d = math.ceil(N / 4)
    cand = balanced_words(N)
    alive = np.ones(len(cand), dtype=bool)
    kept = []
    i = 0
    while True:
        nz = np.flatnonzero(alive[i:])
        if nz.size == 0:
            break
        i += int(nz[0])
        v = cand[i]
        kept.append(v)
        alive &= _popcount(cand ^ v) >= d
        i += 1
    exact_max = None
    if exact is None:
        exact = N <= 12
    if exact:
        exact_max = hamming_exact_max(N)
    return HammingFamily(N, d, [_bits(v, N) for v in kept], exact_max)


@lru_cache(maxsize=None)
def hamming_exact_max(N):
    """Largest ``N/4``-separated family of balanced words (``N <= 12``).

    Distances between balanced words are even, so the conflict graph is
    empty when ``ceil(N/4) <= 2`` and consists of pairs at distance 2
    otherwise. Words at pairwise distance 2 sharing a common
    ``(N/2 - 1)``-subset form cliques covering every conflict edge; the
    resulting set-packing problem is solved exactly by integer programming.
    """
    from scipy.optimize import Bounds, LinearConstraint, milp
    from scipy.sparse import lil_matrix

    if N > 12:
        raise CapacityError("exact maximum only for N <= 12", cap="hamming_exact")
    d = math.ceil(N / 4)
    words = list(combinations(range(N), N // 2))
    if d <= 2:
        return len(words)
    if d > 4:
        raise DomainError("clique formulation covers distance 4 only")
    index = {w: i for i, w in enumerate(words)}
    half = N // 2
    rows = []
    # words through a common (N/2 - 1)-subset, and words inside a common
    # (N/2 + 1)-superset, are pairwise at distance 2
    for s in combinations(range(N), half - 1):
        rows.append([index[tuple(sorted(s + (e,)))] for e in range(N) if e not in s])
    for s in combinations(range(N), half + 1):
        rows.append([index[tuple(t for t in s if t != e)] for e in s])
    A = lil_matrix((len(rows), len(words)))
    for r_, cols in enumerate(rows):
        for c in cols:
            A[r_, c] = 1
    res = milp(c=-np.ones(len(words)), constraints=LinearConstraint(A.tocsr(), -np.inf, 1),
               integrality=np.ones(len(words)), bounds=Bounds(0, 1),
               options={"mip_rel_gap": 0})
    if not res.success:
        raise RuntimeError(f"integer program failed: {res.message}")
    return int(round(-res.fun))


def hamming_distance(a, b):
    return sum(x != y for x, y in zip(a, b))


# ---------------------------------------------------------------------------
# Shadowing family of periodic measures


def separated_periodic_orbits(count, q, eps, depth=64, max_alphabet=16):
    """``count`` orbits of exact period ``q`` in the smallest full shift that
    has enough of them, pairwise ``eps**q``-apart (min support distance).

    Returns ``(m, orbits)`` with each orbit given by its Lyndon word.
    """
    from .dynamics import lyndon_words

    metric = ShiftMetric(depth)
    for m in range(2, max_alphabet + 1):
        words = lyndon_words(m, q)
        if len(words) < count:
            continue
        chosen = []
        for w in words:
            orb = [w[i:] + w[:i] for i in range(q)]
            mu = DiscreteMeasure.uniform(orb, metric)
            if all(min_support_distance(mu, o, metric) >= eps ** q for _, o in chosen):
                chosen.append((w, mu))
            if len(chosen) == count:
                return m, [w for w, _ in chosen]
    raise CapacityError(f"no alphabet up to {max_alphabet} has {count} separated period-{q} orbits",
                        cap="max_alphabet")


def concatenated_word(beta, orbits, ell, T, transition_symbol=0):
    """Word of the periodic orbit shadowing ``(P_{i_1})^ell, gap, (P_{i_2})^ell, gap, ...``."""
    selected = [orbits[i] for i, b in enumerate(beta) if b]
    word = []
    for w in selected:
        word.extend(tuple(w) * ell)
        word.extend([transition_symbol] * T)
    return tuple(word)


def shadowing_measure_family(family, orbits, ell, T, q, eps, depth=64, transition_symbol=0):
    """Periodic measures ``mu_beta``, one per word ``beta`` of ``family``.

    ``orbits`` are ``N`` words of exact period ``q`` (``N`` the length of
    each ``beta``). Each ``beta`` selects ``N/2`` of them in index order;
    ``mu_beta`` is the uniform measure on the periodic orbit of the word
    made of ``ell`` copies of each selected orbit word followed by ``T``
    transition symbols. In the full shift concatenation is exact, so this
    orbit shadows the pseudo-orbit with no error.
    """
    words = family.words if isinstance(family, HammingFamily) else list(family)
    if ell % 2 or ell < 2:
        raise PreconditionError("ell must be a positive even integer")
    if q * ell < T:
        raise PreconditionError("need q * ell >= T")
    metric = ShiftMetric(depth)
    orbit_measures = []
    for o in orbits:
        if len(metric.canonical(o)) != q:
            raise PreconditionError(f"orbit {o} does not have exact period {q}")
        orbit_measures.append(DiscreteMeasure.uniform([tuple(o[i:]) + tuple(o[:i]) for i in range(q)], metric))
    for a, b in combinations(range(len(orbits)), 2):
        dist = min_support_distance(orbit_measures[a], orbit_measures[b], metric)
        if dist < eps ** q:
            raise PreconditionError(
                f"orbits {a} and {b} are only {dist:g} apart, below eps**q = {eps ** q:g}"
            )
    out = []
    for beta in words:
        if len(beta) != len(orbits):
            raise PreconditionError("each beta needs one entry per orbit")
        w = concatenated_word(beta, orbits, ell, T, transition_symbol)
        period = len(w)
        states = [w[i:] + w[:i] for i in range(period)]
        if len(set(metric.canonical(s) for s in states)) != period:
            raise PreconditionError("concatenated word is not primitive")
        out.append(DiscreteMeasure.uniform(states, metric, meta={"beta": "".join(map(str, beta))}))
    return out


def family_separation(measures, p=1):
    """Minimum pairwise ``W_p`` over a measure family (exact transport)."""
    best = math.inf
    for a, b in combinations(range(len(measures)), 2):
        best = min(best, wasserstein(measures[a], measures[b], p))
    return best
