"""Counter-based splittable random streams.

Every random quantity in the laboratory is a pure function of
``(seed, purpose, trial, counter)``.  Substreams are derived with a
splitmix64-style bit mixer, so trials can be farmed out to any number of
workers in any order and still reproduce bit-identically.

Three synchronized implementations exist:

* scalar (this module), used by the slow reference samplers,
* vectorized over numpy uint64 arrays (:func:`uniforms`), used by the
  pairwise sweep sampler,
* an inlined copy inside the numba trial kernels (``_fastlat.py``).

They are cross-checked in the test suite.
"""

from __future__ import annotations

import numpy as np

_MASK = np.uint64(0xFFFFFFFFFFFFFFFF)
GOLDEN = 0x9E3779B97F4A7C15
_MIX1 = 0xBF58476D1CE4E5B9
_MIX2 = 0x94D049BB133111EB

# Purpose tags.  Distinct tags give independent substreams for the same
# (seed, trial) pair.
PURPOSE_EDGES = 1       # pairwise sweep, counter = canonical pair index
PURPOSE_EDGES_SHELL = 2  # shell-skip accelerator, sequential counter
PURPOSE_ESCAPE = 3      # one-step external escape sample
PURPOSE_GROW = 4        # lazy cluster-growth engine, sequential counter


def mix64(z: int) -> int:
    """One splitmix64 finalization round on a 64-bit integer."""
    z &= 0xFFFFFFFFFFFFFFFF
    z ^= z >> 30
    z = (z * _MIX1) & 0xFFFFFFFFFFFFFFFF
    z ^= z >> 27
    z = (z * _MIX2) & 0xFFFFFFFFFFFFFFFF
    z ^= z >> 31
    return z


def stream_key(seed: int, purpose: int, trial: int) -> int:
    """Derive the 64-bit substream key for (seed, purpose, trial)."""
    k = mix64((seed & 0xFFFFFFFFFFFFFFFF) + GOLDEN)
    k = mix64(k ^ ((purpose * GOLDEN) & 0xFFFFFFFFFFFFFFFF))
    k = mix64(k ^ ((trial * GOLDEN) & 0xFFFFFFFFFFFFFFFF))
    return k


def uniform_at(key: int, counter: int) -> float:
    """Uniform in the open interval (0, 1) at a given counter position."""
    z = mix64((key + ((counter + 1) * GOLDEN)) & 0xFFFFFFFFFFFFFFFF)
    return ((z >> 11) + 0.5) * 2.0 ** -53


def uniforms(key: int, counters: np.ndarray) -> np.ndarray:
    """Vectorized :func:`uniform_at` over an array of counter positions."""
    c = counters.astype(np.uint64)
    z = (np.uint64(key) + (c + np.uint64(1)) * np.uint64(GOLDEN)) & _MASK
    z ^= z >> np.uint64(30)
    z = (z * np.uint64(_MIX1)) & _MASK
    z ^= z >> np.uint64(27)
    z = (z * np.uint64(_MIX2)) & _MASK
    z ^= z >> np.uint64(31)
    return ((z >> np.uint64(11)).astype(np.float64) + 0.5) * 2.0 ** -53


class Stream:
    """Sequential view of a substream (counter auto-increments)."""

    def __init__(self, seed: int, purpose: int, trial: int):
        self.key = stream_key(seed, purpose, trial)
        self.counter = 0

    def next(self) -> float:
        u = uniform_at(self.key, self.counter)
        self.counter += 1
        return u

    def take(self, n: int) -> np.ndarray:
        out = uniforms(self.key, np.arange(self.counter, self.counter + n))
        self.counter += n
        return out
