"""Cluster statistics: estimators, confidence intervals, exponent fits.

Estimators farm independent trials (each trial is its own substream of
the run seed) to workers in fixed-size chunks and merge the per-chunk
reductions in chunk order, so no emitted number depends on the worker
count.  All binomial estimates carry 95% Wilson score intervals;
UNDECIDED trials are excluded from numerator and denominator and
reported, and every estimate carries the protocol's escape-bias bound.
"""

from __future__ import annotations

import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import rng
from ._fastlat import LatticeEngine
from .graphs import Lattice, model_from_config
from .kernel import KernelSpec
from .sampler import (ESCAPING, FINITE, UNDECIDED, PairTable, _sample_sweep,
                      finiteness_verdict, origin_cluster_indices)
from .window import Window, external_masses

Z95 = 1.959963984540054


class FitError(ValueError):
    """Exponent fit impossible (fewer than 3 usable points)."""


class UnionFind:
    """Disjoint sets over range(n) with path compression and union by size."""

    def __init__(self, n: int):
        self.parent = list(range(n))
        self.size = [1] * n

    def find(self, x: int) -> int:
        root = x
        while self.parent[root] != root:
            root = self.parent[root]
        while self.parent[x] != root:
            self.parent[x], x = root, self.parent[x]
        return root

    def union(self, a: int, b: int) -> bool:
        ra, rb = self.find(a), self.find(b)
        if ra == rb:
            return False
        if self.size[ra] < self.size[rb]:
            ra, rb = rb, ra
        self.parent[rb] = ra
        self.size[ra] += self.size[rb]
        return True


def clusters(config) -> list[list[int]]:
    """Partition of window vertex indices under the open pairs.

    Classes are sorted internally and listed by their minimal member, so
    the representative of each class is its minimum canonical vertex.
    """
    window = config.window
    ii, jj, _ = window.pair_table
    uf = UnionFind(window.n)
    for k in config.open_pairs:
        uf.union(int(ii[k]), int(jj[k]))
    groups: dict[int, list[int]] = {}
    for i in range(window.n):
        groups.setdefault(uf.find(i), []).append(i)
    return sorted(groups.values(), key=lambda g: g[0])


def wilson_interval(k: int, n: int, z: float = Z95) -> tuple[float, float]:
    """95% Wilson score interval for a binomial proportion."""
    if n == 0:
        return 0.0, 1.0
    p = k / n
    denom = 1.0 + z * z / n
    center = (p + z * z / (2 * n)) / denom
    half = z * np.sqrt(p * (1 - p) / n + z * z / (4 * n * n)) / denom
    return max(0.0, center - half), min(1.0, center + half)


@dataclass
class EstimateSeries:
    """Binomial estimates over a list of abscissae with full bookkeeping."""

    x: np.ndarray
    p_hat: np.ndarray
    ci_lo: np.ndarray
    ci_hi: np.ndarray
    trials: np.ndarray        # decided trials (the denominator)
    undecided: np.ndarray
    bias_bound: np.ndarray

    @classmethod
    def from_counts(cls, x, num, decided, undecided, bias):
        x = np.asarray(x, dtype=np.float64)
        num = np.asarray(num, dtype=np.int64)
        decided = np.broadcast_to(np.asarray(decided, dtype=np.int64), num.shape)
        undecided = np.broadcast_to(np.asarray(undecided, dtype=np.int64), num.shape)
        bias = np.broadcast_to(np.asarray(bias, dtype=np.float64), num.shape)
        p = np.where(decided > 0, num / np.maximum(decided, 1), 0.0)
        lohi = np.array([wilson_interval(int(k), int(n))
                         for k, n in zip(num, decided)])
        return cls(x=x, p_hat=p, ci_lo=lohi[:, 0], ci_hi=lohi[:, 1],
                   trials=decided.copy(), undecided=undecided.copy(),
                   bias_bound=bias.copy())

    def sigma(self) -> np.ndarray:
        """Normal-scale standard error implied by the Wilson interval width."""
        return (self.ci_hi - self.ci_lo) / (2 * Z95)


# -- trial farming ------------------------------------------------------------

CHUNK = 4096


@dataclass
class _ChunkStats:
    num: np.ndarray          # per abscissa
    decided: int
    undecided: int
    bias_max: float


def _reduce_records(verdict, size, maxd, bias, kind, thresholds):
    decided = int(np.sum(verdict != UNDECIDED))
    undec = int(np.sum(verdict == UNDECIDED))
    fin = verdict == FINITE
    if kind == "one_arm":
        num = np.array([int(np.sum(fin & (maxd > r))) for r in thresholds], dtype=np.int64)
    elif kind == "cluster_tail":
        num = np.array([int(np.sum(fin & (size > k))) for k in thresholds], dtype=np.int64)
    else:
        raise ValueError(kind)
    bias_max = float(np.max(bias[fin])) if np.any(fin) else 0.0
    return _ChunkStats(num=num, decided=decided, undecided=undec, bias_max=bias_max)


_WORKER_ENGINE = None


def _worker_chunk(payload):
    """Process-pool entry: rebuild the engine once per process, run one chunk."""
    global _WORKER_ENGINE
    (cfg, t0, t1, seed, kind, thresholds) = payload
    if _WORKER_ENGINE is None or _WORKER_ENGINE[0] != cfg:
        model = model_from_config(cfg)
        spec = KernelSpec(model, alpha=cfg["kernel.alpha"], beta=cfg["kernel.beta"],
                          r_j=int(cfg.get("kernel.rj", 1)))
        window = Window.ball(model, r_in=cfg["window.r_in"],
                             r_out=cfg["window.r_out"], guard=cfg["window.guard"])
        _WORKER_ENGINE = (cfg, LatticeEngine(window, spec))
    engine = _WORKER_ENGINE[1]
    verdict, size, maxd, bias = engine.run(t0, t1, seed)
    return _reduce_records(verdict, size, maxd, bias, kind, thresholds)


def _farm_lattice(window, spec, seed, trials, kind, thresholds, workers):
    cfg = dict(spec.snapshot())
    cfg.update({"window.r_in": window.r_in, "window.r_out": window.r_out,
                "window.guard": window.guard})
    chunks = [(t0, min(t0 + CHUNK, trials)) for t0 in range(0, trials, CHUNK)]
    payloads = [(cfg, t0, t1, seed, kind, tuple(thresholds)) for t0, t1 in chunks]
    if workers <= 1:
        engine = LatticeEngine(window, spec)
        stats = []
        for t0, t1 in chunks:
            verdict, size, maxd, bias = engine.run(t0, t1, seed)
            stats.append(_reduce_records(verdict, size, maxd, bias, kind, thresholds))
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            stats = list(pool.map(_worker_chunk, payloads, chunksize=1))
    num = np.sum([s.num for s in stats], axis=0)
    decided = sum(s.decided for s in stats)
    undec = sum(s.undecided for s in stats)
    bias = max((s.bias_max for s in stats), default=0.0)
    return num, decided, undec, bias


def _farm_generic(window, spec, seed, trials, kind, thresholds, masses=None):
    table = PairTable(window, spec)
    if masses is None:
        masses = external_masses(window, spec)
    num = np.zeros(len(thresholds), dtype=np.int64)
    decided = undec = 0
    bias_max = 0.0
    for t in range(trials):
        opens = _sample_sweep(table, seed, t)
        K = origin_cluster_indices(table, opens)
        v = finiteness_verdict(window, spec, K, masses, seed, t)
        if v.kind == UNDECIDED:
            undec += 1
            continue
        decided += 1
        if v.kind == FINITE:
            bias_max = max(bias_max, v.bias_bound)
            if kind == "one_arm":
                md = max(window.dist0[i] for i in K)
                num += np.array([md > r for r in thresholds], dtype=np.int64)
            else:
                num += np.array([len(K) > k for k in thresholds], dtype=np.int64)
    return num, decided, undec, bias_max


def _use_fast_engine(window, spec, engine):
    if engine == "lazy":
        return True
    if engine == "sweep":
        return False
    return (window.is_ball and isinstance(window.model, Lattice)
            and spec.is_distance_kernel)


def truncated_one_arm_estimate(spec: KernelSpec, window: Window, r_list,
                               trials: int, seed: int, workers: int = 1,
                               engine: str = "auto") -> EstimateSeries:
    """P(origin connects beyond B(r) AND verdict FINITE) for each r."""
    r_list = list(r_list)
    if max(r_list) > window.r_in:
        raise ValueError("one-arm radii must not exceed the inner radius")
    if _use_fast_engine(window, spec, engine):
        num, dec, und, bias = _farm_lattice(window, spec, seed, trials,
                                            "one_arm", r_list, workers)
    else:
        num, dec, und, bias = _farm_generic(window, spec, seed, trials,
                                            "one_arm", r_list)
    return EstimateSeries.from_counts(r_list, num, dec, und, bias)


def cluster_tail_estimate(spec: KernelSpec, window: Window, k_list,
                          trials: int, seed: int, workers: int = 1,
                          engine: str = "auto") -> EstimateSeries:
    """P(k < #K AND verdict FINITE) for each k."""
    k_list = list(k_list)
    if _use_fast_engine(window, spec, engine):
        num, dec, und, bias = _farm_lattice(window, spec, seed, trials,
                                            "cluster_tail", k_list, workers)
    else:
        num, dec, und, bias = _farm_generic(window, spec, seed, trials,
                                            "cluster_tail", k_list)
    return EstimateSeries.from_counts(k_list, num, dec, und, bias)


@dataclass
class SetEscapeEstimate:
    series: EstimateSeries      # single row, x = #S
    n_components: int
    set_size: int
    surface_term: float         # (#S)^((d-1)/d)


def set_escape_estimate(spec: KernelSpec, window: Window, S, trials: int,
                        seed: int) -> SetEscapeEstimate:
    """P(no cluster of S escapes) under the window protocol.

    Each percolation cluster meeting S receives its own verdict (escape
    samples indexed by cluster rank); the event requires every one of
    them to be FINITE.  The empty set escapes nowhere: probability 1.
    """
    S = sorted(set(S))
    idxS = [window.index[v] for v in S]
    if any(window.dist0[i] > window.r_in for i in idxS):
        raise ValueError("S must lie inside the inner region")
    # nearest-neighbour component count of S itself
    uf = UnionFind(len(S))
    pos = {v: a for a, v in enumerate(S)}
    for a, v in enumerate(S):
        for y in window.model.neighbors(v):
            if y in pos:
                uf.union(a, pos[y])
    n_comp = len({uf.find(a) for a in range(len(S))}) if S else 0

    table = PairTable(window, spec)
    masses = external_masses(window, spec)
    num = decided = undec = 0
    bias_max = 0.0
    for t in range(trials):
        if not S:
            num += 1
            decided += 1
            continue
        opens = _sample_sweep(table, seed, t)
        adj = table.adjacency(opens)
        todo = set(idxS)
        all_finite = True
        any_escaping = False
        bias_trial = 0.0
        rank = 0
        while todo:
            start = min(todo)
            seen = {start}
            stack = [start]
            while stack:
                x = stack.pop()
                for y in adj[x]:
                    if y not in seen:
                        seen.add(y)
                        stack.append(y)
            todo -= seen
            u = rng.uniform_at(rng.stream_key(seed, rng.PURPOSE_ESCAPE, t), rank)
            v = finiteness_verdict(window, spec, sorted(seen), masses, seed, t,
                                   escape_u=u)
            rank += 1
            if v.kind == ESCAPING:
                any_escaping = True
                all_finite = False
                break
            if v.kind == UNDECIDED:
                all_finite = False
            else:
                bias_trial = max(bias_trial, v.bias_bound)
        if any_escaping:
            decided += 1
        elif all_finite:
            decided += 1
            num += 1
            bias_max = max(bias_max, bias_trial)
        else:
            undec += 1
    series = EstimateSeries.from_counts([len(S)], [num], decided, undec, bias_max)
    d = spec.d
    return SetEscapeEstimate(series=series, n_components=n_comp, set_size=len(S),
                             surface_term=float(len(S)) ** ((d - 1) / d))


def giant_fraction_estimate(spec: KernelSpec, r: int, rho: float, trials: int,
                            seed: int, workers: int = 1,
                            engine: str = "auto") -> EstimateSeries:
    """P(#K(r) >= rho * #B(r)) with K(r) restricted to pairs inside B(r)."""
    if not 0.0 < rho < 1.0:
        raise ValueError("rho must be in (0, 1)")
    model = spec.model
    n_ball = model.ball_size(r)
    threshold = rho * n_ball
    window = Window(model, model.ball(model.origin, r), model.origin,
                    r_in=r, r_out=2 * r + 1, guard=0, is_ball=True)
    if _use_fast_engine(window, spec, engine):
        eng = LatticeEngine(window, spec, confined=True)
        num = decided = 0
        for t0 in range(0, trials, CHUNK):
            t1 = min(t0 + CHUNK, trials)
            _, size, _, _ = eng.run(t0, t1, seed)
            num += int(np.sum(size >= threshold))
            decided += t1 - t0
    else:
        table = PairTable(window, spec)
        num = decided = 0
        for t in range(trials):
            opens = _sample_sweep(table, seed, t)
            K = origin_cluster_indices(table, opens)
            num += len(K) >= threshold
            decided += 1
    return EstimateSeries.from_counts([r], [num], decided, 0, 0.0)


# -- exponent fits ------------------------------------------------------------

@dataclass
class ExponentFit:
    slope: float
    stderr: float
    intercept: float
    n_points: int


def exponent_fit(series: EstimateSeries, transform: str = "LOGLOG") -> ExponentFit:
    """Weighted log-log (or log-log-log) slope of an estimate series.

    LOGLOG regresses log p_hat on log x; LOGLOGLOG regresses
    log(-log p_hat) on log x for stretched-exponential tails (points with
    p_hat >= 0.9 are outside that regime and dropped).  Points with zero
    estimates are dropped with a warning.  Weights are inverse squared
    interval widths (uniform if widths are degenerate).
    """
    x = np.asarray(series.x, dtype=np.float64)
    p = np.asarray(series.p_hat, dtype=np.float64)
    width = np.asarray(series.ci_hi, dtype=np.float64) - np.asarray(series.ci_lo)
    keep = p > 0.0
    if np.any(~keep):
        warnings.warn(f"dropping {int(np.sum(~keep))} zero estimates from the fit")
    if transform == "LOGLOGLOG":
        high = keep & (p >= 0.9)
        if np.any(high):
            warnings.warn(f"dropping {int(np.sum(high))} points with p_hat >= 0.9 "
                          "(outside the stretched-exponential regime)")
        keep &= p < 0.9
    elif transform != "LOGLOG":
        raise ValueError(f"unknown transform {transform!r}")
    x, p, width = x[keep], p[keep], width[keep]
    if len(x) < 3:
        raise FitError(f"need at least 3 usable points, have {len(x)}")
    X = np.log(x)
    Y = np.log(p) if transform == "LOGLOG" else np.log(-np.log(p))
    w = np.ones_like(X)
    if np.all(width > 0):
        w = 1.0 / width ** 2
    Sw = np.sum(w)
    Sx = np.sum(w * X)
    Sy = np.sum(w * Y)
    Sxx = np.sum(w * X * X)
    Sxy = np.sum(w * X * Y)
    delta = Sw * Sxx - Sx * Sx
    slope = (Sw * Sxy - Sx * Sy) / delta
    intercept = (Sy - slope * Sx) / Sw
    resid = Y - (intercept + slope * X)
    dof = max(len(X) - 2, 1)
    sigma2 = np.sum(w * resid * resid) / dof
    stderr = float(np.sqrt(sigma2 * Sw / delta))
    return ExponentFit(slope=float(slope), stderr=stderr,
                       intercept=float(intercept), n_points=len(X))
