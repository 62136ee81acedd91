"""Finite sampling windows and the one-step escape protocol masses.

A window is the finite vertex set on which configurations are sampled.
Ball windows carry the inner/outer/guard structure used by the
finiteness protocol: analysis sets must stay inside the inner ball, the
guard annulus at the outer edge flags clusters as escaping, and edges
leaving the window are collapsed into a single exact escape sample per
cluster with probability 1 - exp(-beta * J(cluster, exterior)).

``external_masses`` computes, for every window vertex x, the exterior
kernel mass sum_{y not in W} J(x, y).  For power-law kernels on lattices
this is exact (zeta closed form for the total mass, in-window part by
convolution or direct summation); otherwise it is exact to the kernel
horizon with the doubling remainder reported separately.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy.signal import fftconvolve

from .graphs import Lattice, Vertex
from .kernel import KernelSpec, total_kernel_mass

PAIR_CAP = 50_000_000


class WindowMemoryError(Exception):
    """Window too large for the configured pair-table memory budget."""


class Window:
    """Finite vertex window with inner region and guard annulus.

    Ball windows are B(o, r_out) with inner radius r_in (r_out >= 2 r_in)
    and guard width g; explicit windows (used by the exact oracle) are
    arbitrary vertex lists where every vertex is inner and the guard is
    empty, so the verdict reduces to the escape sample alone.
    """

    def __init__(self, model, vertices, origin: Vertex, r_in: int,
                 r_out: int, guard: int, is_ball: bool):
        self.model = model
        self.vertices = sorted(vertices)
        self.origin = origin
        self.r_in = r_in
        self.r_out = r_out
        self.guard = guard
        self.is_ball = is_ball
        self.n = len(self.vertices)
        self.index = {v: i for i, v in enumerate(self.vertices)}
        if origin not in self.index:
            raise ValueError("origin must belong to the window")
        self.o_index = self.index[origin]
        self.dist0 = np.array([model.distance(origin, v) for v in self.vertices],
                              dtype=np.int64)
        self.guard_lo = r_out - guard + 1  # vertices with dist0 >= guard_lo are guard
        self.inner_mask = self.dist0 <= r_in
        self.guard_mask = self.dist0 >= self.guard_lo

    @classmethod
    def ball(cls, model, r_in: int, r_out: int | None = None, guard: int | None = None):
        if r_out is None:
            r_out = 4 * r_in
        if r_out < 2 * r_in:
            raise ValueError("need r_out >= 2 * r_in")
        if guard is None:
            guard = max(4, r_out // 8)
        if guard >= r_out - r_in:
            raise ValueError("guard annulus would overlap the inner ball")
        verts = model.ball(model.origin, r_out)
        return cls(model, verts, model.origin, r_in, r_out, guard, is_ball=True)

    @classmethod
    def explicit(cls, model, vertices, origin: Vertex | None = None):
        verts = sorted(vertices)
        if origin is None:
            origin = verts[0]
        r_max = max(model.distance(origin, v) for v in verts)
        return cls(model, verts, origin, r_in=r_max, r_out=2 * r_max + 1,
                   guard=0, is_ball=False)

    def __repr__(self):
        kind = "ball" if self.is_ball else "explicit"
        return (f"Window({kind}, n={self.n}, r_in={self.r_in}, "
                f"r_out={self.r_out}, guard={self.guard})")

    @cached_property
    def pair_table(self):
        """Canonical unordered pair arrays (i < j in canonical vertex order)."""
        m = self.n * (self.n - 1) // 2
        if m > PAIR_CAP:
            raise WindowMemoryError(f"{m} pairs exceed the pair-table budget")
        ii = np.empty(m, dtype=np.int32)
        jj = np.empty(m, dtype=np.int32)
        dist = np.empty(m, dtype=np.int32)
        k = 0
        for i in range(self.n):
            vi = self.vertices[i]
            for j in range(i + 1, self.n):
                ii[k] = i
                jj[k] = j
                dist[k] = self.model.distance(vi, self.vertices[j])
                k += 1
        return ii, jj, dist

    def nn_neighbor_indices(self, i: int):
        """Window indices of the nearest-neighbour vertices of vertex i."""
        out = []
        for y in self.model.neighbors(self.vertices[i]):
            j = self.index.get(y)
            if j is not None:
                out.append(j)
        return out


@dataclass(frozen=True)
class ExternalMasses:
    """Per-vertex exterior kernel masses with a shared remainder bound.

    tail[i] is the exact part of sum_{y not in W} J(v_i, y); adding
    ``remainder_per_vertex`` gives an upper bound.  ``exact`` is True when
    the remainder is structurally zero (lattice power-law kernels).
    """

    tail: np.ndarray
    remainder_per_vertex: float
    kernel_horizon: int
    exact: bool

    def cross_mass(self, indices) -> float:
        idx = np.asarray(list(indices), dtype=np.int64)
        return float(np.sum(self.tail[idx]))

    def escape_probability(self, spec: KernelSpec, indices, upper: bool = False) -> float:
        idx = list(indices)
        mass = self.cross_mass(idx)
        if upper:
            mass += len(idx) * self.remainder_per_vertex
        return -math.expm1(-spec.beta * mass)


def _lattice_masses_fft(window: Window, spec: KernelSpec) -> np.ndarray:
    """In-window kernel mass for every vertex of a lattice window, via FFT."""
    model: Lattice = window.model
    dim = model.dim
    coords = np.array(window.vertices, dtype=np.int64)
    lo = coords.min(axis=0)
    hi = coords.max(axis=0)
    shape = tuple(int(h - l + 1) for l, h in zip(lo, hi))
    ind = np.zeros(shape)
    ind[tuple((coords - lo).T)] = 1.0
    span = int(np.max(coords.max(axis=0) - coords.min(axis=0)))
    patch_r = span  # covers every in-window pair distance
    axes = [np.abs(np.arange(-patch_r, patch_r + 1))] * dim
    if dim == 1:
        L = axes[0]
    elif dim == 2:
        L = axes[0][:, None] + axes[1][None, :]
    else:
        L = axes[0][:, None, None] + axes[1][None, :, None] + axes[2][None, None, :]
    patch = np.zeros(L.shape)
    nz = L > 0
    patch[nz] = np.array([spec.value_at_distance(int(v)) for v in L[nz]])
    conv = fftconvolve(ind, patch, mode="same")
    vals = conv[tuple((coords - lo).T)]
    return np.maximum(vals, 0.0)


def _in_window_masses_direct(window: Window, spec: KernelSpec) -> np.ndarray:
    out = np.zeros(window.n)
    for i, x in enumerate(window.vertices):
        out[i] = math.fsum(spec.value(x, y) for y in window.vertices if y != x)
    return out


def external_masses(window: Window, spec: KernelSpec,
                    kernel_horizon: int | None = None) -> ExternalMasses:
    """Exterior kernel mass of every window vertex under the one-step protocol."""
    if kernel_horizon is None:
        kernel_horizon = max(4 * window.r_out, 256)
    analytic = spec.form == "power" and isinstance(window.model, Lattice)
    total = total_kernel_mass(spec, horizon=kernel_horizon, analytic=analytic)
    if not analytic and kernel_horizon < 2 * window.r_out:
        raise ValueError("kernel horizon must cover in-window pair distances")
    if isinstance(window.model, Lattice) and spec.is_distance_kernel and window.n > 4000:
        inside = _lattice_masses_fft(window, spec)
    else:
        inside = _in_window_masses_direct(window, spec)
    tail = np.maximum(total.exact - inside, 0.0)
    return ExternalMasses(tail=tail, remainder_per_vertex=total.remainder,
                          kernel_horizon=kernel_horizon, exact=analytic)
