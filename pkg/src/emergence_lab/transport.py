"""Wasserstein and Levy-Prokhorov distances between finitely supported measures.

The production solvers call the network simplex of POT; the oracles
(vertex enumeration of the transport polytope, exhaustive events) are
independent and only meant for small instances.
"""

from __future__ import annotations

import itertools
import math
import os
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .errors import CapacityError, CertificateError, DomainError
from .measures import cost_matrix

# POT probes every installed deep-learning backend on import, which costs
# seconds; only the numpy backend is used here.
for _name in ("PYTORCH", "JAX", "CUPY", "TENSORFLOW"):
    os.environ.setdefault(f"POT_BACKEND_DISABLE_{_name}", "1")
import ot  # noqa: E402

SUPPORT_CAP = 4096
ORACLE_CAP = 16
LP_ORACLE_CAP = 15
CERT_TOL = 1e-9


@dataclass
class TransportPlan:
    """Coupling ``plan[i, j]`` between supp mu (rows) and supp nu (columns)."""

    plan: np.ndarray
    row_marginal: np.ndarray
    col_marginal: np.ndarray

    def marginal_error(self):
        return max(
            float(np.abs(self.plan.sum(1) - self.row_marginal).max()),
            float(np.abs(self.plan.sum(0) - self.col_marginal).max()),
        )


@dataclass
class WassersteinResult:
    value: float
    plan: TransportPlan
    cost: float
    residual: float
    """Complementary-slackness / dual-feasibility residual of the certificate."""


def _check_p(p):
    if not p >= 1:
        raise DomainError(f"p must be >= 1, got {p}")


def _check_cap(n, m, cap):
    if n > cap or m > cap:
        raise CapacityError(f"support sizes {n} x {m} exceed the cap {cap} x {cap}", cap="support_cap")


def _emd(a, b, M):
    """Exact transport with POT; returns plan, cost and certificate residual."""
    a = a / a.sum()
    b = b / b.sum()
    G, log = ot.emd(a, b, M, log=True, numItermax=10_000_000)
    if log.get("warning"):
        raise CertificateError(f"network simplex did not converge: {log['warning']}")
    u, v = log["u"], log["v"]
    reduced = M - u[:, None] - v[None, :]
    scale = max(1.0, float(M.max()))
    dual_infeas = max(0.0, -float(reduced.min()))
    slack = float(np.sum(G * np.abs(reduced)))
    marg = max(float(np.abs(G.sum(1) - a).max()), float(np.abs(G.sum(0) - b).max()))
    residual = max(dual_infeas, slack, marg) / scale
    cost = float(np.sum(G * M))
    return G, max(cost, 0.0), residual, a, b


def wasserstein_exact(mu, nu, p=1, metric=None, cap=SUPPORT_CAP):
    """``W_p(mu, nu)`` with an optimal plan, certified by complementary slackness."""
    _check_p(p)
    _check_cap(len(mu), len(nu), cap)
    C = cost_matrix(mu, nu, metric)
    a = mu.weights_array()
    b = nu.weights_array()
    M = C ** p
    G, cost, residual, a, b = _emd(a, b, M)
    if residual > CERT_TOL:
        raise CertificateError(f"optimality residual {residual:.3g} above {CERT_TOL}")
    return WassersteinResult(cost ** (1.0 / p), TransportPlan(G, a, b), cost, residual)


def wasserstein(mu, nu, p=1, metric=None, cap=SUPPORT_CAP):
    """Value of :func:`wasserstein_exact`, with closed forms for Dirac inputs."""
    _check_p(p)
    if len(mu) == 1 or len(nu) == 1:
        C = cost_matrix(mu, nu, metric)
        w = nu.weights_array() if len(mu) == 1 else mu.weights_array()
        return float(np.dot(w, C.ravel() ** p)) ** (1.0 / p)
    return wasserstein_exact(mu, nu, p, metric, cap).value


def pairwise_wasserstein(measures, p=1, metric=None, cap=SUPPORT_CAP):
    """Symmetric matrix of ``W_p`` distances."""
    n = len(measures)
    D = np.zeros((n, n))
    for i in range(n):
        for j in range(i + 1, n):
            D[i, j] = D[j, i] = wasserstein(measures[i], measures[j], p, metric, cap)
    return D


# ---------------------------------------------------------------------------
# Vertex-enumeration oracle


def _tree_flow(cells, a, b):
    """Flows on a candidate basis (spanning tree of rows + columns) or None."""
    m, n = len(a), len(b)
    supply = {("r", i): a[i] for i in range(m)}
    supply.update({("c", j): b[j] for j in range(n)})
    incident = {k: set() for k in supply}
    for e in cells:
        incident[("r", e[0])].add(e)
        incident[("c", e[1])].add(e)
    flow = {}
    remaining = set(cells)
    while remaining:
        leaf = next((k for k, es in incident.items() if len(es) == 1), None)
        if leaf is None:
            return None  # contains a cycle
        (e,) = incident[leaf]
        x = supply[leaf]
        flow[e] = x
        other = ("c", e[1]) if leaf[0] == "r" else ("r", e[0])
        supply[other] -= x
        supply[leaf] = Fraction(0)
        incident[leaf].discard(e)
        incident[other].discard(e)
        remaining.discard(e)
    if any(v != 0 for v in supply.values()):
        return None
    return flow


def wasserstein_oracle(mu, nu, p=1, metric=None):
    """Exact ``W_p`` by enumerating every vertex of the transport polytope.

    Weights must be rational; the flows on each basis are solved in exact
    arithmetic and only the final cost is evaluated in floating point.
    """
    _check_p(p)
    m, n = len(mu), len(nu)
    if m * n > ORACLE_CAP:
        raise CapacityError(f"oracle needs |supp mu|*|supp nu| <= {ORACLE_CAP}, got {m * n}", cap="oracle_cap")
    a = [Fraction(w) for w in mu.weights]
    b = [Fraction(w) for w in nu.weights]
    if sum(a) != sum(b):
        raise DomainError("total masses differ")
    C = cost_matrix(mu, nu, metric) ** p
    all_cells = [(i, j) for i in range(m) for j in range(n)]
    best = math.inf
    for cells in itertools.combinations(all_cells, m + n - 1):
        flow = _tree_flow(cells, a, b)
        if flow is None or any(x < 0 for x in flow.values()):
            continue
        cost = math.fsum(float(x) * C[e] for e, x in flow.items())
        best = min(best, cost)
    return max(best, 0.0) ** (1.0 / p)


# ---------------------------------------------------------------------------
# Levy-Prokhorov


def _cross_distances(C):
    return np.unique(np.concatenate([[0.0], C.ravel()]))


def _flow_deficit(a, b, C, eps):
    """``1 - (max mass movable along pairs at distance <= eps)``.

    Solved as a 0/1-cost transport problem, which is the bipartite max
    flow in disguise.
    """
    M = (C > eps * (1 + 1e-12) + 1e-15).astype(float)
    G, cost, residual, _, _ = _emd(a, b, M)
    return cost


def levy_prokhorov(mu, nu, metric=None, cap=SUPPORT_CAP):
    """Exact Levy-Prokhorov distance with closed neighbourhoods.

    ``g(eps) = sup_E mu(E) - nu(V_eps(E))`` is a right-continuous step
    function that jumps only at cross distances ``d_i``, and by Hall's
    theorem it equals one minus the maximal flow through pairs at
    distance ``<= eps`` (the same in both directions). The distance is
    ``min_i max(d_i, g(d_i))`` capped at 1. The sequence ``max(d_i, g_i)``
    is unimodal, so a binary search over the ``d_i`` suffices.
    """
    _check_cap(len(mu), len(nu), cap)
    C = cost_matrix(mu, nu, metric)
    a = mu.weights_array()
    b = nu.weights_array()
    d = _cross_distances(C)
    cache = {}

    def g(i):
        if i not in cache:
            cache[i] = _flow_deficit(a, b, C, d[i])
        return cache[i]

    lo, hi = 0, len(d) - 1
    # first index where d_i >= g_i
    while lo < hi:
        mid = (lo + hi) // 2
        if d[mid] >= g(mid):
            hi = mid
        else:
            lo = mid + 1
    best = max(d[lo], g(lo))
    if lo > 0:
        best = min(best, max(d[lo - 1], g(lo - 1)))
    return float(min(best, 1.0))


def _event_gap(wA, wB, C_AB, eps):
    """``max over E in supp A of A(E) - B(V_eps(E))`` by enumerating events."""
    close = C_AB <= eps * (1 + 1e-12) + 1e-15
    best = 0.0
    n = len(wA)
    for mask in range(1, 1 << n):
        sel = [i for i in range(n) if mask >> i & 1]
        mass = sum(wA[i] for i in sel)
        nb = close[sel].any(0)
        best = max(best, float(mass - sum(w for w, c in zip(wB, nb) if c)))
    return best


def levy_prokhorov_oracle(mu, nu, metric=None):
    """Levy-Prokhorov distance by exhaustive enumeration of events.

    The infimum is attained at a cross distance or at an achievable mass
    gap; every such candidate is tested directly against all events.
    """
    if len(mu) > LP_ORACLE_CAP or len(nu) > LP_ORACLE_CAP:
        raise CapacityError(f"event enumeration limited to supports <= {LP_ORACLE_CAP}", cap="lp_oracle_cap")
    C = cost_matrix(mu, nu, metric)
    wa = list(mu.weights)
    wb = list(nu.weights)

    def gap(eps):
        return max(_event_gap(wa, wb, C, eps), _event_gap(wb, wa, C.T, eps))

    cands = set(_cross_distances(C).tolist()) | {1.0}
    for e in list(cands):
        cands.add(gap(e))
    for e in sorted(cands):
        if gap(e) <= e + 1e-12:
            return float(min(e, 1.0))
    return 1.0
