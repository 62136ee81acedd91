"""Exhaustive enumeration oracle on micro-windows.

Every stochastic estimator in the laboratory is validated against exact
probabilities computed by summing over all 2^#pairs configurations of a
micro-window (at most 7 vertices / 21 pairs).  Configuration weights are
accumulated in log space with compensated summation; the one-step escape
protocol enters in closed form, exp(-beta * J(K, exterior)), rather than
as a sampled bit, so the oracle and the samplers share one protocol
definition.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .blocks import (block_decomposition, block_graph,
                     block_graph_connected, is_isolated)
from .clusters import UnionFind
from .kernel import KernelSpec, TailSum, doubling_remainder, total_kernel_mass
from .sampler import Configuration, PairTable
from .window import Window, external_masses

MAX_PAIRS = 21


@dataclass
class MicroState:
    """One configuration of the micro-window, handed to event predicates."""

    micro: "MicroWindow"
    open_pairs: np.ndarray
    clusters: list[list[int]]
    K: list[int]                 # origin's cluster (window indices)

    @property
    def size(self) -> int:
        return len(self.K)

    @property
    def max_dist(self) -> int:
        return int(max(self.micro.window.dist0[i] for i in self.K))

    def no_escape_factor(self, indices=None) -> float:
        """P(one-step escape sample closed) for a vertex set (default: K)."""
        idx = self.K if indices is None else list(indices)
        mass = float(np.sum(self.micro.masses.tail[np.asarray(idx, dtype=np.int64)]))
        return math.exp(-self.micro.spec.beta * mass)

    def all_finite_factor(self, seeds) -> float:
        """P(every cluster meeting the seed set is escape-closed)."""
        idx = set()
        for c in self.clusters:
            if any(s in seeds for s in c):
                idx.update(c)
        return self.no_escape_factor(sorted(idx)) if idx else 1.0

    def configuration(self) -> Configuration:
        return Configuration(window=self.micro.window,
                             spec_snapshot=self.micro.spec.snapshot(),
                             seed=-1, trial=-1, method="enumeration",
                             open_pairs=self.open_pairs,
                             kernel_horizon=self.micro.masses.kernel_horizon,
                             mass_remainder=self.micro.masses.remainder_per_vertex)


class MicroWindow:
    """A tiny explicit window with every pair enumerable exactly."""

    def __init__(self, model, vertices, spec: KernelSpec, origin=None):
        self.window = Window.explicit(model, vertices, origin=origin)
        self.spec = spec
        self.table = PairTable(self.window, spec)
        self.n_pairs = len(self.table.p)
        if self.n_pairs > MAX_PAIRS:
            raise ValueError(f"{self.n_pairs} pairs exceed the enumeration cap {MAX_PAIRS}")
        self.masses = external_masses(self.window, spec)
        p = self.table.p
        self.log_p = np.where(p > 0, np.log(np.maximum(p, 1e-300)), -math.inf)
        self.log_q = np.log1p(-p)

    @classmethod
    def rectangle(cls, model, nx: int, ny: int, spec: KernelSpec):
        verts = [(x, y) for x in range(nx) for y in range(ny)]
        return cls(model, verts, spec, origin=(0, 0))

    def states(self):
        """Iterate all configurations with their exact log-weights."""
        P = self.n_pairs
        ii, jj = self.table.ii, self.table.jj
        n = self.window.n
        o = self.window.o_index
        for mask in range(1 << P):
            opens = np.array([k for k in range(P) if mask >> k & 1], dtype=np.int64)
            logw = math.fsum((self.log_p[k] if mask >> k & 1 else self.log_q[k])
                             for k in range(P))
            uf = UnionFind(n)
            for k in opens:
                uf.union(int(ii[k]), int(jj[k]))
            groups: dict[int, list[int]] = {}
            for i in range(n):
                groups.setdefault(uf.find(i), []).append(i)
            clusters = sorted(groups.values(), key=lambda g: g[0])
            K = groups[uf.find(o)]
            yield logw, MicroState(micro=self, open_pairs=opens,
                                   clusters=clusters, K=sorted(K))


def enumerate_exact(micro: MicroWindow, event) -> float:
    """Exact probability of an event.

    ``event(state) -> float`` returns the conditional probability of the
    event given the configuration (an indicator for purely configurational
    events; times escape factors for protocol events).
    """
    terms = []
    for logw, state in micro.states():
        val = event(state)
        if val != 0.0:
            terms.append(math.exp(logw) * val)
    return math.fsum(terms)


# canned events ---------------------------------------------------------------

def ev_true(state: MicroState) -> float:
    return 1.0

def ev_finite(state: MicroState) -> float:
    return state.no_escape_factor()

def ev_one_arm_and_finite(r: int):
    def ev(state: MicroState) -> float:
        return state.no_escape_factor() if state.max_dist > r else 0.0
    return ev

def ev_cluster_tail_and_finite(k: int):
    def ev(state: MicroState) -> float:
        return state.no_escape_factor() if state.size > k else 0.0
    return ev

def ev_all_finite(seed_indices):
    seeds = set(seed_indices)
    def ev(state: MicroState) -> float:
        return state.all_finite_factor(seeds)
    return ev

def ev_giant(threshold: int):
    def ev(state: MicroState) -> float:
        return 1.0 if state.size >= threshold else 0.0
    return ev


# -- closed-form single-long-edge event ---------------------------------------

def single_long_edge_probability(spec: KernelSpec, r: int, horizon: int,
                                 L_cap: int | None = None) -> tuple[float, float]:
    """Brackets for P(the origin's cluster is exactly one edge into B(r)^c).

    The exact value is sum over x at distance L > r of
    p(o, x) * prod_{y != o,x} q(o, y) q(x, y), which is at least
    exp(-2 beta ||J||_1) * sum_{L > r} D_L.  Shell sums run to the
    horizon; the doubling remainder widens the bracket.  ``L_cap``
    restricts the target sphere range (used to compare against a window
    whose protocol only accepts end vertices up to that distance).
    """
    if horizon <= r:
        raise ValueError("horizon must exceed r")
    model = spec.model
    H = min(horizon, model.horizon)
    mass = total_kernel_mass(spec, horizon=H, analytic=False)
    top = min(H, L_cap) if L_cap is not None else H
    d_exact = 0.0
    if spec.is_distance_kernel:
        for L in range(r + 1, top + 1):
            d_exact += model.sphere_size(L) * spec.probability_at_distance(L)
    else:
        o = model.origin
        for L in range(r + 1, top + 1):
            d_exact += math.fsum(spec.probability(o, y) for y in model.sphere(o, L))
    d_rem = 0.0 if (L_cap is not None and L_cap <= H) else spec.beta * doubling_remainder(spec, H)
    lower = math.exp(-2.0 * spec.beta * mass.upper) * d_exact
    upper = math.exp(-2.0 * spec.beta * mass.lower) * (d_exact + d_rem)
    return lower, upper


# -- partition and union-bound audits ------------------------------------------

@dataclass
class PartitionAuditReport:
    p_finite: float
    p_by_decomposition: dict
    partition_gap: float
    union_bound_ok: bool
    union_bound_worst: float
    size_split_gap: float
    conn_iso_failures: int


def partition_audit(micro: MicroWindow, r_values=None, k_values=None) -> PartitionAuditReport:
    """Exact identities of the block-decomposition calculus on a micro-window.

    * the decomposition-conditioned events partition {verdict FINITE}:
      sum over B of P(B(K) = B, H connected, isolated, escape closed)
      equals P(FINITE);
    * the one-arm union bound
      P(arm, FINITE) <= P(arm, #K <= k) + P(k < #K, FINITE)
      holds for every (r, k);
    * the size split P(arm, FINITE) =
      P(arm, #K <= k, FINITE) + P(arm, k < #K, FINITE) is exact.

    The connectivity and isolation predicates are evaluated explicitly on
    every configuration (they must hold whenever B = B(K)); failures are
    counted and must be zero.
    """
    window = micro.window
    model = window.model
    if r_values is None:
        r_values = sorted({int(d) for d in window.dist0 if d > 0})
    if k_values is None:
        k_values = list(range(1, window.n + 1))
    p_finite_terms = []
    by_dec: dict = {}
    conn_iso_failures = 0
    arm_fin = {rr: [] for rr in r_values}
    arm_small = {(rr, k): [] for rr in r_values for k in k_values}
    tail_fin = {k: [] for k in k_values}
    arm_fin_small = {(rr, k): [] for rr in r_values for k in k_values}
    arm_fin_large = {(rr, k): [] for rr in r_values for k in k_values}

    for logw, state in micro.states():
        w = math.exp(logw)
        esc = state.no_escape_factor()
        w_fin = w * esc
        p_finite_terms.append(w_fin)
        K_verts = frozenset(window.vertices[i] for i in state.K)
        dec = block_decomposition(K_verts, model, origin=window.origin)
        cfg = state.configuration()
        H, _ = block_graph(cfg, dec)
        ok = block_graph_connected(dec, H) and is_isolated(cfg, dec)
        if not ok:
            conn_iso_failures += 1
        key = tuple(sorted(tuple(sorted(b)) for b in dec.blocks))
        by_dec.setdefault(key, []).append(w_fin if ok else 0.0)
        md, sz = state.max_dist, state.size
        for rr in r_values:
            arm = md > rr
            if arm:
                arm_fin[rr].append(w_fin)
            for k in k_values:
                if arm and sz <= k:
                    arm_small[(rr, k)].append(w)
                    arm_fin_small[(rr, k)].append(w_fin)
                if arm and sz > k:
                    arm_fin_large[(rr, k)].append(w_fin)
        for k in k_values:
            if sz > k:
                tail_fin[k].append(w_fin)

    p_finite = math.fsum(p_finite_terms)
    p_by_dec = {key: math.fsum(v) for key, v in by_dec.items()}
    gap = abs(p_finite - math.fsum(p_by_dec.values()))

    worst = -math.inf
    union_ok = True
    split_gap = 0.0
    for rr in r_values:
        lhs = math.fsum(arm_fin[rr])
        for k in k_values:
            rhs = math.fsum(arm_small[(rr, k)]) + math.fsum(tail_fin[k])
            margin = lhs - rhs
            worst = max(worst, margin)
            if margin > 1e-12:
                union_ok = False
            split = abs(lhs - (math.fsum(arm_fin_small[(rr, k)])
                               + math.fsum(arm_fin_large[(rr, k)])))
            split_gap = max(split_gap, split)
    return PartitionAuditReport(p_finite=p_finite, p_by_decomposition=p_by_dec,
                                partition_gap=gap, union_bound_ok=union_ok,
                                union_bound_worst=worst,
                                size_split_gap=split_gap,
                                conn_iso_failures=conn_iso_failures)
