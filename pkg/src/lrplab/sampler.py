"""Configuration sampling and the finiteness verdict protocol.

Two samplers produce full configurations on a window:

* the exact pairwise Bernoulli sweep (default), one uniform per
  canonical pair, keyed by (seed, purpose, trial, pair index);
* the shell-skip accelerator, which groups pairs by graph distance and
  jumps geometrically between successes inside each homogeneous group.
  It is a different but distributionally indistinguishable sampler.

The finiteness verdict classifies the origin's cluster as ESCAPING
(touches the guard annulus, or its one-step escape sample is open),
FINITE (contained in the inner ball and the escape sample is closed), or
UNDECIDED otherwise.  UNDECIDED trials are excluded from both numerator
and denominator of every estimator and their count is reported.  The
verdict's one-sided bias -- a protocol-finite cluster could reconnect
through the exterior in two or more steps -- is bounded by the escape
probability of the cluster's closed 1-neighbourhood and attached to
every estimate.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import rng
from .kernel import KernelSpec
from .window import ExternalMasses, Window, external_masses

FINITE, ESCAPING, UNDECIDED = 0, 1, 2
VERDICT_NAMES = {FINITE: "FINITE", ESCAPING: "ESCAPING", UNDECIDED: "UNDECIDED"}


class PairTable:
    """Per-(window, spec) pair arrays: probabilities and distance groups."""

    def __init__(self, window: Window, spec: KernelSpec):
        self.window = window
        self.spec = spec
        ii, jj, dist = window.pair_table
        self.ii, self.jj, self.dist = ii, jj, dist
        if spec.is_distance_kernel:
            by_d = spec.probabilities_by_distance(int(dist.max()))
            self.p = by_d[dist]
        else:
            verts = window.vertices
            self.p = np.array([spec.probability(verts[i], verts[j])
                               for i, j in zip(ii, jj)])
        self.expected_edges = float(np.sum(self.p))
        # distance groups for the shell-skip accelerator
        order = np.argsort(dist, kind="stable")
        self.group_order = order
        self.group_dist, starts = np.unique(dist[order], return_index=True)
        self.group_start = np.append(starts, len(order))

    def adjacency(self, open_pairs: np.ndarray):
        """Neighbour lists (as index arrays) for the open pairs."""
        n = self.window.n
        adj = [[] for _ in range(n)]
        for k in open_pairs:
            i, j = int(self.ii[k]), int(self.jj[k])
            adj[i].append(j)
            adj[j].append(i)
        return adj


@dataclass
class Configuration:
    """One sampled configuration: canonical open-pair list plus provenance."""

    window: Window
    spec_snapshot: dict
    seed: int
    trial: int
    method: str
    open_pairs: np.ndarray          # indices into the canonical pair table
    kernel_horizon: int
    mass_remainder: float

    def edge_vertex_list(self):
        verts = self.window.vertices
        ii, jj, _ = self.window.pair_table
        return [(verts[ii[k]], verts[jj[k]]) for k in self.open_pairs]


def _sample_sweep(table: PairTable, seed: int, trial: int) -> np.ndarray:
    key = rng.stream_key(seed, rng.PURPOSE_EDGES, trial)
    u = rng.uniforms(key, np.arange(len(table.p)))
    return np.flatnonzero(u < table.p).astype(np.int64)

def _sample_shell_skip(table: PairTable, seed: int, trial: int) -> np.ndarray:
    stream = rng.Stream(seed, rng.PURPOSE_EDGES_SHELL, trial)
    opens = []
    for g in range(len(table.group_dist)):
        a, b = table.group_start[g], table.group_start[g + 1]
        p = table.p[table.group_order[a]]
        if p <= 0.0:
            continue
        log1mp = math.log1p(-p)
        pos = -1
        count = b - a
        while True:
            pos += 1 + int(math.log(stream.next()) / log1mp)
            if pos >= count:
                break
            opens.append(table.group_order[a + pos])
    return np.array(sorted(opens), dtype=np.int64)


def sample_configuration(window_or_table, spec: KernelSpec | None = None,
                         seed: int = 0, trial: int = 0,
                         method: str = "sweep",
                         kernel_horizon: int | None = None) -> Configuration:
    """Sample one configuration; bit-identical for identical arguments."""
    if isinstance(window_or_table, PairTable):
        table = window_or_table
        spec = table.spec
    else:
        table = PairTable(window_or_table, spec)
    if method == "sweep":
        opens = _sample_sweep(table, seed, trial)
    elif method == "shell":
        opens = _sample_shell_skip(table, seed, trial)
    else:
        raise ValueError(f"unknown sampling method {method!r}")
    if kernel_horizon is None:
        kernel_horizon = max(4 * table.window.r_out, 256)
    return Configuration(window=table.window, spec_snapshot=spec.snapshot(),
                         seed=seed, trial=trial, method=method,
                         open_pairs=opens, kernel_horizon=kernel_horizon,
                         mass_remainder=0.0)


def external_escape_probability(window: Window, spec: KernelSpec,
                                cluster_indices,
                                masses: ExternalMasses | None = None,
                                upper: bool = False) -> float:
    """Exact probability that at least one edge leaves the window from the set."""
    idx = list(cluster_indices)
    if any(window.dist0[i] >= window.guard_lo for i in idx):
        raise ValueError("set intersects the guard annulus")
    if masses is None:
        masses = external_masses(window, spec)
    return masses.escape_probability(spec, idx, upper=upper)


@dataclass
class Verdict:
    kind: int
    escape_probability: float
    bias_bound: float

    @property
    def name(self):
        return VERDICT_NAMES[self.kind]


def finiteness_verdict(window: Window, spec: KernelSpec, cluster_indices,
                       masses: ExternalMasses, seed: int, trial: int,
                       escape_u: float | None = None) -> Verdict:
    """Classify the cluster under the guard + one-step-escape protocol.

    The escape sample is a Bernoulli with the cluster's exact escape
    probability, drawn from the trial's dedicated escape substream.
    """
    idx = list(cluster_indices)
    touches_guard = any(window.dist0[i] >= window.guard_lo for i in idx)
    if touches_guard:
        return Verdict(ESCAPING, 1.0, 0.0)
    p_esc = masses.escape_probability(spec, idx)
    if escape_u is None:
        escape_u = rng.uniform_at(rng.stream_key(seed, rng.PURPOSE_ESCAPE, trial), 0)
    if escape_u < p_esc:
        return Verdict(ESCAPING, p_esc, 0.0)
    inside_inner = all(window.dist0[i] <= window.r_in for i in idx)
    if not inside_inner:
        return Verdict(UNDECIDED, p_esc, 0.0)
    # one-sided bias: exterior reconnection through >= 2 steps is bounded by
    # the escape probability of the closed 1-neighbourhood
    hood = set(idx)
    for i in idx:
        hood.update(window.nn_neighbor_indices(i))
    bias = masses.escape_probability(spec, hood, upper=True)
    return Verdict(FINITE, p_esc, bias)


@dataclass
class TrialRecord:
    verdict: int
    size: int
    max_dist: int
    bias_bound: float


def origin_cluster_indices(table: PairTable, opens: np.ndarray) -> list[int]:
    """Connected component of the origin under the open pairs (BFS)."""
    adj = table.adjacency(opens)
    o = table.window.o_index
    seen = {o}
    stack = [o]
    while stack:
        x = stack.pop()
        for y in adj[x]:
            if y not in seen:
                seen.add(y)
                stack.append(y)
    return sorted(seen)


def run_trials_generic(window: Window, spec: KernelSpec, seed: int,
                       trials: range, method: str = "sweep",
                       masses: ExternalMasses | None = None) -> list[TrialRecord]:
    """Reference per-trial driver: full configuration, then verdict.

    Used for explicit windows, audits, and cross-validation of the fast
    lattice engine.  Trials are independent substreams, so results do not
    depend on how the range is split across workers.
    """
    table = PairTable(window, spec)
    if masses is None:
        masses = external_masses(window, spec)
    out = []
    for t in trials:
        if method == "sweep":
            opens = _sample_sweep(table, seed, t)
        else:
            opens = _sample_shell_skip(table, seed, t)
        K = origin_cluster_indices(table, opens)
        v = finiteness_verdict(window, spec, K, masses, seed, t)
        out.append(TrialRecord(verdict=v.kind, size=len(K),
                               max_dist=int(max(window.dist0[i] for i in K)),
                               bias_bound=v.bias_bound))
    return out
