"""Compiled trial engine for lattice ball windows.

Grows only the origin's cluster, sampling each unordered pair exactly
once (when its first endpoint is expanded), and aborts a trial as soon
as its verdict is certain:

* a discovered vertex lies in the guard annulus -> ESCAPING;
* the escape uniform, drawn up front, is already below the escape
  probability of the partial cluster -> ESCAPING (the escape probability
  is monotone in the cluster, so the final comparison is decided).

Unexplored pairs are independent of the explored ones and cannot change
the verdict, so the produced (verdict, size, max distance) law is the
law of the full pairwise sweep; the test suite checks this against the
reference sampler and against exact enumeration.

Randomness is the shared splitmix64 counter scheme: the grow stream of
trial t consumes sequential counters of key (seed, PURPOSE_GROW, t), and
the escape uniform is counter 0 of (seed, PURPOSE_ESCAPE, t) -- the same
value the reference sampler uses, independent of worker scheduling.
"""

from __future__ import annotations

import math

import numpy as np
from numba import njit, uint64

from . import rng
from .graphs import Lattice
from .kernel import KernelSpec
from .window import Window, external_masses

_U = np.uint64
_GOLD = _U(rng.GOLDEN)
_M1 = _U(0xBF58476D1CE4E5B9)
_M2 = _U(0x94D049BB133111EB)
_PGROW = _U(rng.PURPOSE_GROW)
_PESC = _U(rng.PURPOSE_ESCAPE)

DENSE_CUT = 0.25


@njit(inline="always")
def _mix64(z):
    z ^= z >> _U(30)
    z *= _M1
    z ^= z >> _U(27)
    z *= _M2
    z ^= z >> _U(31)
    return z


@njit(inline="always")
def _stream_key(seed, purpose, trial):
    k = _mix64(seed + _GOLD)
    k = _mix64(k ^ (purpose * _GOLD))
    k = _mix64(k ^ (trial * _GOLD))
    return k


@njit(inline="always")
def _uniform_at(key, counter):
    z = _mix64(key + (counter + _U(1)) * _GOLD)
    return (np.float64(z >> _U(11)) + 0.5) * (2.0 ** -53)


@njit(cache=True, nogil=True)
def _run_trials(t0, t1, seed, o_idx, vert_flat, grid, dist0,
                shell_start, deltas, p_shell, log1mp_shell,
                tail_mass, rem_per_vertex, beta, guard_lo, r_in,
                out_verdict, out_size, out_maxd, out_bias):
    n = vert_flat.shape[0]
    n_shell = p_shell.shape[0]
    stamp_k = np.zeros(n, np.int64)
    stamp_x = np.zeros(n, np.int64)
    stamp_b = np.zeros(n, np.int64)
    queue = np.empty(n, np.int64)
    seed_u = _U(seed)
    for t in range(t0, t1):
        ti = t - t0
        stamp = t + 1
        key = _stream_key(seed_u, _PGROW, _U(t))
        ctr = _U(0)
        u_esc = _uniform_at(_stream_key(seed_u, _PESC, _U(t)), _U(0))
        thresh = -math.log1p(-u_esc)

        head = 0
        tail_q = 1
        queue[0] = o_idx
        stamp_k[o_idx] = stamp
        size = 1
        maxd = dist0[o_idx]
        hazard = 0.0
        verdict = -1

        while head < tail_q:
            x = queue[head]
            head += 1
            stamp_x[x] = stamp
            hazard += tail_mass[x]
            if beta * hazard > thresh:
                verdict = 1  # ESCAPING via the one-step escape sample
                break
            xf = vert_flat[x]
            aborted = False
            for L in range(1, n_shell):
                p = p_shell[L]
                if p <= 0.0:
                    continue
                a = shell_start[L]
                b = shell_start[L + 1]
                if p >= DENSE_CUT:
                    for k in range(a, b):
                        u = _uniform_at(key, ctr)
                        ctr += _U(1)
                        if u < p:
                            vid = grid[xf + deltas[k]]
                            if vid >= 0 and stamp_x[vid] != stamp and stamp_k[vid] != stamp:
                                stamp_k[vid] = stamp
                                queue[tail_q] = vid
                                tail_q += 1
                                size += 1
                                d0 = dist0[vid]
                                if d0 > maxd:
                                    maxd = d0
                                if d0 >= guard_lo:
                                    aborted = True
                                    break
                else:
                    inv = 1.0 / log1mp_shell[L]
                    pos = -1
                    cnt = b - a
                    while True:
                        u = _uniform_at(key, ctr)
                        ctr += _U(1)
                        pos += 1 + np.int64(math.floor(math.log(u) * inv))
                        if pos >= cnt:
                            break
                        vid = grid[xf + deltas[a + pos]]
                        if vid >= 0 and stamp_x[vid] != stamp and stamp_k[vid] != stamp:
                            stamp_k[vid] = stamp
                            queue[tail_q] = vid
                            tail_q += 1
                            size += 1
                            d0 = dist0[vid]
                            if d0 > maxd:
                                maxd = d0
                            if d0 >= guard_lo:
                                aborted = True
                                break
                if aborted:
                    break
            if aborted:
                verdict = 1  # ESCAPING via guard contact
                break

        if verdict < 0:
            verdict = 0 if maxd <= r_in else 2  # FINITE / UNDECIDED

        bias = 0.0
        if verdict == 0:
            mass = 0.0
            cnt_hood = 0
            for q in range(tail_q):
                x = queue[q]
                mass += tail_mass[x]
                cnt_hood += 1
                xf = vert_flat[x]
                for k in range(shell_start[1], shell_start[2]):
                    vid = grid[xf + deltas[k]]
                    if vid >= 0 and stamp_k[vid] != stamp and stamp_b[vid] != stamp:
                        stamp_b[vid] = stamp
                        mass += tail_mass[vid]
                        cnt_hood += 1
            bias = -math.expm1(-beta * (mass + cnt_hood * rem_per_vertex))

        out_verdict[ti] = verdict
        out_size[ti] = size
        out_maxd[ti] = maxd
        out_bias[ti] = bias


class LatticeEngine:
    """Precomputed window tables feeding the compiled trial kernel."""

    def __init__(self, window: Window, spec: KernelSpec, confined: bool = False):
        model = window.model
        if not isinstance(model, Lattice):
            raise TypeError("the fast engine requires a lattice model")
        if not spec.is_distance_kernel:
            raise TypeError("the fast engine requires a rotationally symmetric kernel")
        if not window.is_ball:
            raise TypeError("the fast engine requires a ball window")
        self.window = window
        self.spec = spec
        self.confined = confined
        dim = model.dim
        r_out = window.r_out
        L_max = 2 * r_out
        R = 3 * r_out  # padded bounding box: x + v never leaves it

        coords = np.zeros((window.n, 3), dtype=np.int64)
        coords[:, :dim] = np.array(window.vertices, dtype=np.int64)
        side = 2 * R + 1
        sides = [side if i < dim else 1 for i in range(3)]
        strides = np.array([sides[1] * sides[2], sides[2], 1], dtype=np.int64)
        offs = np.array([R if i < dim else 0 for i in range(3)], dtype=np.int64)

        grid = np.full(sides[0] * sides[1] * sides[2], -1, dtype=np.int32)
        flat = (coords + offs) @ strides
        grid[flat] = np.arange(window.n, dtype=np.int32)

        deltas = []
        shell_start = np.zeros(L_max + 2, dtype=np.int64)
        for L in range(1, L_max + 1):
            for v in model.sphere_offsets(L):
                dv = np.zeros(3, dtype=np.int64)
                dv[:dim] = v
                deltas.append(int(dv @ strides))
            shell_start[L + 1] = len(deltas)

        p_shell = spec.probabilities_by_distance(L_max)
        log1mp = np.zeros_like(p_shell)
        pos = (p_shell > 0) & (p_shell < 1)
        log1mp[pos] = np.log1p(-p_shell[pos])

        if confined:
            tail = np.zeros(window.n)
            rem = 0.0
            self.masses = None
            guard_lo = r_out + 1
            r_in = r_out
        else:
            self.masses = external_masses(window, spec)
            tail = self.masses.tail
            rem = self.masses.remainder_per_vertex
            guard_lo = window.guard_lo
            r_in = window.r_in

        self._args = (np.int64(window.o_index), flat.astype(np.int64), grid,
                      window.dist0.astype(np.int64), shell_start,
                      np.array(deltas, dtype=np.int64), p_shell, log1mp,
                      np.asarray(tail, dtype=np.float64), float(rem),
                      float(spec.beta), np.int64(guard_lo), np.int64(r_in))

    def run(self, t0: int, t1: int, seed: int):
        m = t1 - t0
        verdict = np.empty(m, dtype=np.int8)
        size = np.empty(m, dtype=np.int64)
        maxd = np.empty(m, dtype=np.int64)
        bias = np.empty(m, dtype=np.float64)
        _run_trials(t0, t1, seed & 0xFFFFFFFFFFFFFFFF, *self._args,
                    verdict, size, maxd, bias)
        return verdict, size, maxd, bias
