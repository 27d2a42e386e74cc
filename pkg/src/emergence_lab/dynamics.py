"""System zoo: interval and circle homeomorphisms, rotations, the doubling
map and full shifts, with orbit, fixed-point, rotation-number and
periodic-orbit machinery plus proxy catalogs of ergodic measures."""

from __future__ import annotations

import ast
import math
import operator
import warnings
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable

import numpy as np

from .errors import CapacityError, DomainError, PreconditionError
from .measures import CircleMetric, DiscreteMeasure, LineMetric, ShiftMetric, periodic_dirac

PERIOD_CAP = 2 ** 20


class DomainEscape(DomainError):
    """An orbit left the representable domain."""


class NotAHomeomorphism(UserWarning):
    """Sampled values of an interval map are not monotone."""


# ---------------------------------------------------------------------------
# Formula grammar


_BINOPS = {ast.Add: operator.add, ast.Sub: operator.sub, ast.Mult: operator.mul,
           ast.Div: operator.truediv, ast.Pow: operator.pow}
_FUNCS = {"sin": np.sin, "cos": np.cos, "exp": np.exp}
_SCALAR_FUNCS = {"sin": math.sin, "cos": math.cos, "exp": math.exp}
_CONSTS = {"pi": math.pi}


def parse_formula(text, var="x", vector=False):
    """Compile an arithmetic expression in one variable to a callable.

    Grammar: numbers, ``x``, ``pi``, ``+ - * / **``, unary minus and the
    functions ``sin``, ``cos``, ``exp``. Anything else is rejected.
    The result works on floats, or on numpy arrays when ``vector`` is set.
    """
    funcs = _FUNCS if vector else _SCALAR_FUNCS
    try:
        tree = ast.parse(text, mode="eval")
    except SyntaxError as exc:
        raise DomainError(f"cannot parse formula {text!r}: {exc.msg}") from None

    def build(node):
        if isinstance(node, ast.Expression):
            return build(node.body)
        if isinstance(node, ast.Constant) and isinstance(node.value, (int, float)):
            v = node.value
            return lambda x: v
        if isinstance(node, ast.Name):
            if node.id == var:
                return lambda x: x
            if node.id in _CONSTS:
                c = _CONSTS[node.id]
                return lambda x: c
            raise DomainError(f"unknown name {node.id!r} in formula")
        if isinstance(node, ast.BinOp) and type(node.op) in _BINOPS:
            op = _BINOPS[type(node.op)]
            lhs, rhs = build(node.left), build(node.right)
            return lambda x: op(lhs(x), rhs(x))
        if isinstance(node, ast.UnaryOp) and isinstance(node.op, (ast.USub, ast.UAdd)):
            inner = build(node.operand)
            if isinstance(node.op, ast.USub):
                return lambda x: -inner(x)
            return inner
        if (isinstance(node, ast.Call) and isinstance(node.func, ast.Name)
                and node.func.id in _FUNCS and len(node.args) == 1 and not node.keywords):
            fn = funcs[node.func.id]
            arg = build(node.args[0])
            return lambda x: fn(arg(x))
        raise DomainError(f"unsupported syntax in formula {text!r}")

    return build(tree)


# ---------------------------------------------------------------------------
# Systems


@dataclass
class DynamicalSystem:
    """A forward map on a state space with an ambient metric.

    ``kind`` is one of ``interval``, ``circle`` or ``shift``. Circle
    systems carry a ``lift`` on the real line; ``exact`` systems iterate in
    rational arithmetic.
    """

    name: str
    kind: str
    forward: Callable
    metric: object
    inverse: Callable | None = None
    lift: Callable | None = None
    exact: bool = False
    params: dict = field(default_factory=dict)

    def in_domain(self, x):
        if self.kind == "interval":
            return 0 <= x <= 1 and not (isinstance(x, float) and math.isnan(x))
        if self.kind == "circle":
            return 0 <= x < 1
        return isinstance(x, tuple) and len(x) > 0

    def step(self, x):
        return self.forward(x)

    def orbit(self, x, n):
        return iterate_orbit(self, x, n)


def iterate_orbit(system, x, n):
    """``[x, f(x), ..., f^(n-1)(x)]``."""
    if int(n) != n or n < 1:
        raise DomainError("n must be a positive integer")
    if system.kind == "circle":
        x = system.metric.canonical(x)
    if system.exact and system.kind != "shift":
        x = Fraction(x)
    out = []
    for _ in range(int(n)):
        if not system.in_domain(x):
            raise DomainEscape(f"orbit of {system.name} left the domain at {x!r}")
        out.append(x)
        x = system.forward(x)
    return out


def identity_map(kind="interval"):
    metric = LineMetric() if kind == "interval" else CircleMetric()
    return DynamicalSystem("identity", kind, lambda x: x, metric, inverse=lambda x: x,
                           lift=(lambda x: x) if kind == "circle" else None)


def interval_homeo(formula, inverse=None, name=None):
    """Map of [0, 1] from a formula string or a callable."""
    f = parse_formula(formula) if isinstance(formula, str) else formula
    inv = parse_formula(inverse) if isinstance(inverse, str) else inverse

    def fwd(x):
        y = float(f(float(x)))
        # endpoints may drift by rounding
        if -1e-15 < y < 0:
            y = 0.0
        elif 1 < y < 1 + 1e-15:
            y = 1.0
        return y

    return DynamicalSystem(name or f"interval_homeo({formula})", "interval", fwd, LineMetric(),
                           inverse=inv, params={"formula": formula if isinstance(formula, str) else None})


def circle_homeo(formula, name=None):
    """Circle map given by a lift ``F`` on R; the map is ``F mod 1``."""
    F = parse_formula(formula) if isinstance(formula, str) else formula

    def lift(x):
        return float(F(float(x)))

    def fwd(x):
        return CircleMetric().canonical(lift(x))

    return DynamicalSystem(name or f"circle_homeo({formula})", "circle", fwd, CircleMetric(),
                           lift=lift, params={"formula": formula if isinstance(formula, str) else None})


def rotation(alpha):
    """Rigid rotation ``x -> x + alpha mod 1``; exact when ``alpha`` is rational."""
    exact = isinstance(alpha, (Fraction, int)) or (isinstance(alpha, str) and "/" in alpha)
    a = Fraction(alpha) if exact else float(alpha)
    metric = CircleMetric()

    def fwd(x):
        return metric.canonical(x + a)

    def inv(x):
        return metric.canonical(x - a)

    return DynamicalSystem(f"rotation({a})", "circle", fwd, metric, inverse=inv,
                           lift=lambda x: x + a, exact=exact, params={"alpha": str(a)})


def doubling_map():
    """``x -> 2x mod 1`` in exact arithmetic."""
    def fwd(x):
        y = 2 * x
        return y - math.floor(y)

    return DynamicalSystem("doubling", "circle", fwd, CircleMetric(), exact=True)


def full_shift(m, depth=64):
    """One-sided full shift on ``m`` symbols.

    States are tuples read as the periodic sequences they repeat; the
    shift rotates the tuple, which is exact on periodic points.
    """
    if m < 2:
        raise DomainError("alphabet needs at least 2 symbols")
    metric = ShiftMetric(depth)

    def fwd(x):
        x = tuple(x)
        if any(not 0 <= s < m for s in x):
            raise DomainEscape(f"symbol outside alphabet in {x}")
        return x[1:] + x[:1]

    return DynamicalSystem(f"shift({m})", "shift", fwd, metric, params={"m": m})


def system_from_config(cfg):
    """Build a system from ``{"system": name, ...}``."""
    kind = cfg.get("system")
    if kind == "interval_homeo":
        return interval_homeo(cfg["formula"], cfg.get("inverse"))
    if kind == "circle_homeo":
        return circle_homeo(cfg["formula"])
    if kind == "rotation":
        return rotation(cfg["alpha"])
    if kind == "doubling":
        return doubling_map()
    if kind == "shift":
        return full_shift(cfg.get("m", 2), cfg.get("depth", 64))
    if kind == "identity":
        return identity_map(cfg.get("kind", "interval"))
    raise DomainError(f"unknown system {kind!r}")


# ---------------------------------------------------------------------------
# Fixed points


@dataclass
class FixedPointResult:
    brackets: list
    everywhere_fixed: bool = False
    monotone: bool = True

    def points(self):
        return [0.5 * (a + b) for a, b in self.brackets]


def fixed_points(system, grid=1e-4, tol=1e-10, zero_tol=1e-14):
    """Brackets ``[a, b]`` (width <= tol) around the fixed points of an
    interval homeomorphism; runs of grid points where ``f(x) = x`` are
    reported as one interval."""
    n = int(round(1.0 / grid))
    xs = np.linspace(0.0, 1.0, n + 1)
    fx = np.array([system.forward(float(x)) for x in xs])
    monotone = bool(np.all(np.diff(fx) > 0) or np.all(np.diff(fx) < 0))
    if not monotone:
        warnings.warn("sampled map is not strictly monotone", NotAHomeomorphism, stacklevel=2)
    g = fx - xs
    zero = np.abs(g) <= zero_tol
    if zero.all():
        return FixedPointResult([(0.0, 1.0)], everywhere_fixed=True, monotone=monotone)

    def h(x):
        return system.forward(x) - x

    brackets = []
    i = 0
    while i <= n:
        if zero[i]:
            j = i
            while j + 1 <= n and zero[j + 1]:
                j += 1
            brackets.append((float(xs[i]), float(xs[j])))
            i = j + 1
            continue
        if i < n and not zero[i + 1] and np.sign(g[i]) != np.sign(g[i + 1]):
            a, b = float(xs[i]), float(xs[i + 1])
            ga = g[i]
            while b - a > tol:
                c = 0.5 * (a + b)
                gc = h(c)
                if gc == 0:
                    a = b = c
                    break
                if np.sign(gc) == np.sign(ga):
                    a, ga = c, gc
                else:
                    b = c
            brackets.append((a, b))
        i += 1
    return FixedPointResult(brackets, monotone=monotone)


# ---------------------------------------------------------------------------
# Rotation numbers


@dataclass
class RotationResult:
    value: float
    error: float
    rational: Fraction | None
    inconclusive: bool
    bound: float = 0.0
    """Rigorous bound ``1/n`` on the distance to the true rotation number."""


def rotation_number(system, x=0.0, n=10_000, tol=1e-6, max_den=64):
    """Rotation number in [0, 1) of a circle homeomorphism from its lift.

    Estimates ``rho_n = (F^n(x) - x)/n`` at ``x`` and ``x + 1/2`` and also
    ``rho_(n/2)``; the error estimate is the larger of the spread between
    base points and the change from ``n/2`` to ``n``. Every estimate is
    within ``1/n`` of the true value, reported as ``bound``.
    """
    if system.lift is None:
        raise PreconditionError("rotation number needs a lift")
    if n < 1000:
        raise PreconditionError("n must be at least 1000")
    if system.exact:
        # rigid rational rotation: one step of the lift is exact
        rho = Fraction(system.lift(Fraction(0)) - 0)
        val = rho - math.floor(rho)
        return RotationResult(float(val), 0.0, val if val.denominator <= max_den else None, False, 0.0)
    half = n // 2
    ests = []
    for x0 in (float(x), float(x) + 0.5):
        y = x0
        for _ in range(half):
            y = system.lift(y)
        mid = y
        for _ in range(n - half):
            y = system.lift(y)
        ests.append(((mid - x0) / half, (y - x0) / n))
    (h1, r1), (h2, r2) = ests
    err = max(abs(r1 - r2), abs(r1 - h1), abs(r2 - h2))
    val = 0.5 * (r1 + r2)
    val -= math.floor(val)
    frac = Fraction(val).limit_denominator(max_den)
    rational = frac if abs(float(frac) - val) <= max(tol, err) else None
    if rational is not None and rational == 1:
        rational = Fraction(0)
    return RotationResult(val, err, rational, err > 10 * tol, 1.0 / n)


# ---------------------------------------------------------------------------
# Shift periodic orbits


def _mobius(n):
    res, k = 1, 2
    while k * k <= n:
        if n % k == 0:
            n //= k
            if n % k == 0:
                return 0
            res = -res
        k += 1
    return -res if n > 1 else res


def necklace_count(m, q):
    """Number of orbits of exact period ``q`` under the ``m``-shift."""
    return sum(_mobius(e) * m ** (q // e) for e in range(1, q + 1) if q % e == 0) // q


def lyndon_words(m, q):
    """Lyndon words of length exactly ``q`` over ``m`` symbols (Duval), in lexicographic order."""
    w = [-1]
    out = []
    while w:
        w[-1] += 1
        if len(w) == q:
            out.append(tuple(w))
        k = len(w)
        while len(w) < q:
            w.append(w[len(w) - k])
        while w and w[-1] == m - 1:
            w.pop()
    return out


def periodic_orbits_shift(m, q, cap=PERIOD_CAP):
    """Every orbit of exact period ``q``, each as its ``q`` cyclic rotations
    starting from the lexicographically least one."""
    if m < 2 or q < 1:
        raise DomainError("need m >= 2 and q >= 1")
    if m ** q > cap:
        raise CapacityError(f"m**q = {m ** q} exceeds the cap {cap}", cap="period_cap")
    return [[w[i:] + w[:i] for i in range(q)] for w in lyndon_words(m, q)]


# ---------------------------------------------------------------------------
# Proxy catalogs of ergodic measures


def _grid_diracs(system, k):
    pts = [i / k for i in range(k + 1)] if system.kind == "interval" else [i / k for i in range(k)]
    return [DiscreteMeasure.dirac(p, system.metric) for p in pts]


def ergodic_proxy(system, *, period_cap=10, grid=256, fp_grid=1e-4, rot_n=20_000):
    """Finite stand-in for the set of ergodic measures.

    Interval homeomorphisms give Diracs at fixed points; circle maps with
    rational rotation number ``p/q`` give periodic Diracs (the orbits of
    ``grid`` base points in ``[0, 1/q)`` when every point is periodic);
    irrational rotations give one discretised uniform measure; shifts give
    periodic Diracs up to ``period_cap``.
    """
    if system.kind == "interval":
        res = fixed_points(system, grid=fp_grid)
        if res.everywhere_fixed:
            return _grid_diracs(system, grid)
        pts = sorted({round(p, 12) for p in res.points()})
        return [DiscreteMeasure.dirac(p, system.metric) for p in pts]
    if system.kind == "shift":
        m = system.params["m"]
        out = []
        for q in range(1, period_cap + 1):
            for orb in periodic_orbits_shift(m, q):
                out.append(periodic_dirac(orb, system.metric))
        return out
    rot = rotation_number(system, n=rot_n)
    if rot.rational is None:
        return [DiscreteMeasure.uniform([i / grid for i in range(grid)], system.metric,
                                        meta={"proxy": "uniform"})]
    q = rot.rational.denominator
    p = rot.rational.numerator
    base = _periodic_points(system, p, q, grid)
    out, seen = [], set()
    for x in base:
        orb = iterate_orbit(system, x, q)
        m = periodic_dirac(orb, system.metric)
        if m.key() not in seen:
            seen.add(m.key())
            out.append(m)
    return out


def _periodic_points(system, p, q, grid):
    """Base points of period-``q`` orbits with lift displacement ``p``."""
    if system.exact:
        return [Fraction(i, grid * q) for i in range(grid)]

    def g(x):
        y = x
        for _ in range(q):
            y = system.lift(y)
        return y - x - p

    xs = np.linspace(0.0, 1.0, grid * q + 1)
    gs = np.array([g(float(x)) for x in xs])
    if np.all(np.abs(gs) <= 1e-12):
        return [float(x) for x in xs[:grid]]
    pts = []
    for a, b, ga, gb in zip(xs[:-1], xs[1:], gs[:-1], gs[1:]):
        if abs(ga) <= 1e-12:
            pts.append(float(a))
        elif np.sign(ga) != np.sign(gb) and abs(gb) > 1e-12:
            lo, hi = float(a), float(b)
            for _ in range(60):
                c = 0.5 * (lo + hi)
                if np.sign(g(c)) == np.sign(ga):
                    lo = c
                else:
                    hi = c
            pts.append(0.5 * (lo + hi))
    return pts
