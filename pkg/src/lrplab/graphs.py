"""Transitive base graphs of polynomial growth.

Two families are provided: the integer lattices Z^d (d = 1, 2, 3) with
nearest-neighbour edges and the L1 word metric, and the discrete
Heisenberg group with generators a^{±1}, b^{±1}, whose word metric is
built by breadth-first search out to a configurable horizon.

All vertices are plain integer tuples; canonical order is lexicographic.
The metric is exact everywhere it is reported: queries beyond a model's
horizon raise :class:`MetricHorizonError` instead of approximating.
"""

from __future__ import annotations

import itertools
from collections import deque
from dataclasses import dataclass

import numpy as np

Vertex = tuple


class MetricHorizonError(Exception):
    """Raised when a metric/ball query exceeds the model's exact range."""


class Lattice:
    """Z^d with nearest-neighbour edges; the word metric is the L1 norm.

    Growth degree equals the dimension.  ``ball_upper_constant`` is a
    proven constant C with #B(r) <= C r^d for all r >= 1 (used by tail
    remainder bounds): 3, 5, 7 for d = 1, 2, 3.
    """

    _BALL_UPPER = {1: 3.0, 2: 5.0, 3: 7.0}

    def __init__(self, dim: int, horizon: int = 1 << 20):
        if dim not in (1, 2, 3):
            raise ValueError(f"lattice dimension must be 1, 2 or 3, got {dim}")
        self.dim = dim
        self.d = dim
        self.horizon = horizon
        self.origin: Vertex = (0,) * dim
        self.ball_upper_constant = self._BALL_UPPER[dim]

    # -- metric ------------------------------------------------------------

    def distance(self, x: Vertex, y: Vertex) -> int:
        return sum(abs(a - b) for a, b in zip(x, y))

    def neighbors(self, x: Vertex):
        for i in range(self.dim):
            for s in (1, -1):
                yield x[:i] + (x[i] + s,) + x[i + 1:]

    def translate(self, x: Vertex, v: Vertex) -> Vertex:
        return tuple(a + b for a, b in zip(x, v))

    # -- balls and spheres ---------------------------------------------------

    def sphere_offsets(self, r: int):
        """All v with |v|_1 = r, lexicographically sorted."""
        if r == 0:
            return [self.origin]
        out = []
        if self.dim == 1:
            out = [(-r,), (r,)]
        elif self.dim == 2:
            for a in range(-r, r + 1):
                b = r - abs(a)
                if b == 0:
                    out.append((a, 0))
                else:
                    out.append((a, -b))
                    out.append((a, b))
        else:
            for a in range(-r, r + 1):
                rem = r - abs(a)
                for b in range(-rem, rem + 1):
                    c = rem - abs(b)
                    if c == 0:
                        out.append((a, b, 0))
                    else:
                        out.append((a, b, -c))
                        out.append((a, b, c))
        return sorted(out)

    def sphere(self, x: Vertex, r: int):
        self._check(r)
        return sorted(self.translate(x, v) for v in self.sphere_offsets(r))

    def ball(self, x: Vertex, r: int):
        self._check(r)
        out = []
        for s in range(r + 1):
            out.extend(self.translate(x, v) for v in self.sphere_offsets(s))
        return sorted(out)

    def sphere_size(self, r: int) -> int:
        if r == 0:
            return 1
        if self.dim == 1:
            return 2
        if self.dim == 2:
            return 4 * r
        return 4 * r * r + 2

    def ball_size(self, r: int) -> int:
        return 1 + sum(self.sphere_size(s) for s in range(1, r + 1))

    def sphere_sizes(self, r_max: int) -> np.ndarray:
        self._check(r_max)
        return np.array([self.sphere_size(r) for r in range(r_max + 1)], dtype=np.int64)

    def _check(self, r: int):
        if r < 0:
            raise ValueError("radius must be nonnegative")
        if r > self.horizon:
            raise MetricHorizonError(f"radius {r} beyond lattice horizon {self.horizon}")

    def config(self) -> dict:
        return {"graph.family": "lattice", "graph.dimension": self.dim}

    def __repr__(self):
        return f"Lattice(dim={self.dim})"


def _heis_mul(x: Vertex, y: Vertex) -> Vertex:
    a1, b1, c1 = x
    a2, b2, c2 = y
    return (a1 + a2, b1 + b2, c1 + c2 + a1 * b2)


def _heis_inv(x: Vertex) -> Vertex:
    a, b, c = x
    return (-a, -b, a * b - c)


class Heisenberg:
    """Discrete Heisenberg group in normal form (a-, b-, commutator-exponent).

    Cayley graph with respect to {a^{±1}, b^{±1}}.  Growth degree 4.  The
    word metric from the identity is memoized by BFS up to ``horizon``;
    general distances use left invariance, d(x, y) = |x^{-1} y|.
    """

    GENERATORS = ((1, 0, 0), (-1, 0, 0), (0, 1, 0), (0, -1, 0))

    def __init__(self, horizon: int = 14):
        self.d = 4
        self.horizon = horizon
        self.origin: Vertex = (0, 0, 0)
        self._dist: dict[Vertex, int] = {}
        self._spheres: list[list[Vertex]] = []
        self._build_table()
        counts = np.array([len(s) for s in self._spheres], dtype=np.float64)
        balls = np.cumsum(counts)
        r = np.arange(1, horizon + 1, dtype=np.float64)
        # descriptive only: tightest constant over the measured range
        self.ball_upper_constant = float(np.max(balls[1:] / r ** self.d))

    def _build_table(self):
        dist = {self.origin: 0}
        spheres = [[self.origin]]
        frontier = [self.origin]
        for r in range(1, self.horizon + 1):
            nxt = []
            for x in frontier:
                for g in self.GENERATORS:
                    y = _heis_mul(x, g)
                    if y not in dist:
                        dist[y] = r
                        nxt.append(y)
            spheres.append(sorted(nxt))
            frontier = nxt
        self._dist = dist
        self._spheres = spheres

    def distance(self, x: Vertex, y: Vertex) -> int:
        w = _heis_mul(_heis_inv(x), y)
        try:
            return self._dist[w]
        except KeyError:
            raise MetricHorizonError(
                f"word {w} beyond Heisenberg metric horizon {self.horizon}"
            ) from None

    def neighbors(self, x: Vertex):
        for g in self.GENERATORS:
            yield _heis_mul(x, g)

    def translate(self, x: Vertex, v: Vertex) -> Vertex:
        return _heis_mul(x, v)

    def sphere(self, x: Vertex, r: int):
        self._check(r)
        return sorted(_heis_mul(x, v) for v in self._spheres[r])

    def sphere_offsets(self, r: int):
        self._check(r)
        return list(self._spheres[r])

    def ball(self, x: Vertex, r: int):
        self._check(r)
        out = []
        for s in range(r + 1):
            out.extend(_heis_mul(x, v) for v in self._spheres[s])
        return sorted(out)

    def sphere_size(self, r: int) -> int:
        self._check(r)
        return len(self._spheres[r])

    def ball_size(self, r: int) -> int:
        self._check(r)
        return sum(len(self._spheres[s]) for s in range(r + 1))

    def sphere_sizes(self, r_max: int) -> np.ndarray:
        self._check(r_max)
        return np.array([len(self._spheres[r]) for r in range(r_max + 1)], dtype=np.int64)

    def _check(self, r: int):
        if r < 0:
            raise ValueError("radius must be nonnegative")
        if r > self.horizon:
            raise MetricHorizonError(f"radius {r} beyond Heisenberg horizon {self.horizon}")

    def config(self) -> dict:
        return {"graph.family": "heisenberg", "graph.horizon": self.horizon}

    def __repr__(self):
        return f"Heisenberg(horizon={self.horizon})"


GraphModel = Lattice | Heisenberg


def model_from_config(cfg: dict) -> GraphModel:
    family = cfg.get("graph.family", "lattice")
    if family == "lattice":
        return Lattice(int(cfg.get("graph.dimension", 2)))
    if family == "heisenberg":
        return Heisenberg(int(cfg.get("graph.horizon", 14)))
    raise ValueError(f"unknown graph.family {family!r}")


@dataclass(frozen=True)
class GrowthFit:
    d_hat: float
    c_hat: float
    C_hat: float


def growth_fit(model: GraphModel, r_max: int) -> GrowthFit:
    """Least-squares growth degree and the tightest volume-sandwich constants.

    Fits log #B(r) against log r over r in [2, r_max] and reports the
    smallest c and largest C with c r^d <= #B(r) <= C r^d on that range,
    for the model's declared degree d.  The constants are descriptive.
    """
    if r_max < 4:
        raise ValueError("need r_max >= 4")
    r = np.arange(2, r_max + 1, dtype=np.float64)
    vols = np.array([model.ball_size(int(s)) for s in r], dtype=np.float64)
    slope, _ = np.polyfit(np.log(r), np.log(vols), 1)
    ratios = vols / r ** model.d
    return GrowthFit(d_hat=float(slope), c_hat=float(ratios.min()), C_hat=float(ratios.max()))


def sphere_volume_fit(model: GraphModel, r_max: int) -> tuple[float, float]:
    """Fit #S(r) <= c r^{d-delta}: returns (delta_hat, c_hat) over [2, r_max].

    delta_hat = d - slope of log #S(r) on log r; c_hat is the tightest
    constant making the bound hold on the fitted range.
    """
    r = np.arange(2, r_max + 1, dtype=np.float64)
    sizes = np.array([model.sphere_size(int(s)) for s in r], dtype=np.float64)
    slope, _ = np.polyfit(np.log(r), np.log(sizes), 1)
    delta_hat = model.d - float(slope)
    c_hat = float(np.max(sizes / r ** (model.d - delta_hat)))
    return delta_hat, c_hat


def pairs_sorted_canonically(vertices) -> list:
    """Canonical unordered-pair order: sorted vertex list, then (i, j), i < j."""
    verts = sorted(vertices)
    return [(verts[i], verts[j]) for i, j in itertools.combinations(range(len(verts)), 2)]
