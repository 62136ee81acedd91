"""Kernel evaluation and the degree/length/cross-sum calculus.

The default kernel is the pure power law J(x, y) = d_G(x, y)^(-d*alpha)
(also below the sandwich radius r_j, which is the simplest choice
satisfying the polynomial sandwich everywhere).  A tabulated per-distance
kernel and an arbitrary orbit-function kernel are supported as well.

Infinite sums are never truncated silently: every tail quantity is a
:class:`TailSum` carrying the exact part up to the evaluation horizon and
an analytic remainder bound obtained from the doubling decomposition of
spheres into balls.  For lattice power-law kernels the total kernel mass
also has a closed form in terms of the Riemann zeta function.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import zeta

from .graphs import GraphModel, Lattice, MetricHorizonError, Vertex


class KernelDomainError(Exception):
    """Invalid kernel query (diagonal pair, non-integrable tail, ...)."""


@dataclass(frozen=True)
class TailSum:
    """An infinite sum reported as exact-part-to-horizon plus remainder bound."""

    exact: float
    remainder: float

    @property
    def lower(self) -> float:
        return self.exact

    @property
    def upper(self) -> float:
        return self.exact + self.remainder


class KernelSpec:
    """Kernel parameters bound to a graph model.

    form is one of "power" (default), "table" (per-distance values read
    from a config table), or "orbit" (arbitrary callable, used in tests
    for anisotropic kernels).
    """

    def __init__(self, model: GraphModel, alpha: float, beta: float,
                 r_j: int = 1, c_j: float = 1.0, C_j: float = 1.0,
                 table: dict | None = None, orbit_fn=None):
        if alpha <= 1.0:
            raise KernelDomainError(f"non-integrable kernel: alpha must exceed 1, got {alpha}")
        if beta < 0:
            raise ValueError("beta must be nonnegative")
        self.model = model
        self.d = model.d
        self.alpha = float(alpha)
        self.beta = float(beta)
        self.r_j = int(r_j)
        self.c_j = float(c_j)
        self.C_j = float(C_j)
        self.table = dict(table) if table is not None else None
        self.orbit_fn = orbit_fn
        if orbit_fn is not None:
            self.form = "orbit"
        elif table is not None:
            self.form = "table"
            self._validate_table()
        else:
            self.form = "power"
        self._jstar_cache: dict[int, float] = {}

    # -- raw kernel ---------------------------------------------------------

    def _validate_table(self):
        for L, v in self.table.items():
            if L < 1 or v < 0:
                raise ValueError("table entries need distance >= 1 and value >= 0")
            if L >= self.r_j:
                lo = self.c_j * L ** (-self.d * self.alpha)
                hi = self.C_j * L ** (-self.d * self.alpha)
                if not (lo - 1e-15 <= v <= hi + 1e-15):
                    raise ValueError(
                        f"table value {v} at distance {L} violates the "
                        f"polynomial sandwich [{lo}, {hi}]")

    @property
    def is_distance_kernel(self) -> bool:
        return self.form in ("power", "table")

    def value_at_distance(self, L: int) -> float:
        """J at graph distance L (distance kernels only)."""
        if L < 1:
            raise KernelDomainError("kernel is defined for distinct vertices only")
        if self.form == "power":
            return float(L) ** (-self.d * self.alpha)
        if self.form == "table":
            try:
                return self.table[L]
            except KeyError:
                raise KernelDomainError(f"tabulated kernel has no entry at distance {L}") from None
        raise KernelDomainError("orbit kernels are not constant on spheres; use value(x, y)")

    def value(self, x: Vertex, y: Vertex) -> float:
        if x == y:
            raise KernelDomainError("kernel is undefined on the diagonal")
        if self.form == "orbit":
            return self.orbit_fn(self.model, x, y)
        return self.value_at_distance(self.model.distance(x, y))

    # -- edge probabilities ---------------------------------------------------

    def probability(self, x: Vertex, y: Vertex) -> float:
        return -math.expm1(-self.beta * self.value(x, y))

    def probability_at_distance(self, L: int) -> float:
        return -math.expm1(-self.beta * self.value_at_distance(L))

    def probabilities_by_distance(self, L_max: int) -> np.ndarray:
        """Array p[0..L_max] with p[0] = 0 (distance kernels only)."""
        out = np.zeros(L_max + 1)
        for L in range(1, L_max + 1):
            out[L] = self.probability_at_distance(L)
        return out

    def snapshot(self) -> dict:
        cfg = {"kernel.alpha": self.alpha, "kernel.beta": self.beta,
               "kernel.rj": self.r_j, "kernel.form": self.form}
        cfg.update(self.model.config())
        return cfg


def edge_probability(spec: KernelSpec, x: Vertex, y: Vertex) -> float:
    """P(edge open) = 1 - exp(-beta J(x, y)), evaluated via expm1."""
    return spec.probability(x, y)


def monotone_lower_bound_radius(spec: KernelSpec) -> int:
    """Smallest L >= r_j beyond which beta*J/2 <= 1 - exp(-beta*J) is guaranteed.

    The lower kernel bound needs beta*J small enough (x/2 <= 1 - e^{-x}
    holds iff x <= x* ~ 1.5936); for large beta that can fail at short
    distances even though it holds at the declared sandwich radius.
    """
    x_star = 1.5936242600400401
    L = max(1, spec.r_j)
    while spec.beta * spec.C_j * L ** (-spec.d * spec.alpha) > x_star:
        L += 1
        if L > 10 ** 6:
            raise KernelDomainError("no finite lower-bound radius (beta too large?)")
    return L


def j_star(spec: KernelSpec, r: int) -> float:
    """Rotationally symmetric majorant: max of J(o, z) over the sphere S(r)."""
    if r < 1:
        raise KernelDomainError("j_star needs r >= 1")
    if r not in spec._jstar_cache:
        o = spec.model.origin
        spec._jstar_cache[r] = max(spec.value(o, z) for z in spec.model.sphere(o, r))
    return spec._jstar_cache[r]


# -- tail machinery ---------------------------------------------------------

def doubling_remainder(spec: KernelSpec, horizon: int, length_weight: int = 0) -> float:
    """Upper bound for sum_{L > horizon} #S(L) * L^{length_weight} * C_J L^{-d alpha}.

    Groups spheres into dyadic annuli and bounds each annulus by the ball
    that contains it; the geometric series converges iff
    d*alpha - length_weight > d.
    """
    q = spec.d * spec.alpha - length_weight
    if q <= spec.d:
        return math.inf
    H = horizon + 1
    C_G = spec.model.ball_upper_constant
    ratio = 2.0 ** (spec.d - q)
    return spec.C_j * C_G * (2.0 ** spec.d) * H ** (spec.d - q) / (1.0 - ratio)


def _sphere_kernel_sums(spec: KernelSpec, L_max: int) -> np.ndarray:
    """K[L] = sum of J(o, y) over y in S(L), exact, for L = 0..L_max."""
    model = spec.model
    if spec.is_distance_kernel:
        sizes = model.sphere_sizes(L_max).astype(np.float64)
        vals = np.zeros(L_max + 1)
        for L in range(1, L_max + 1):
            vals[L] = spec.value_at_distance(L)
        return sizes * vals
    o = model.origin
    out = np.zeros(L_max + 1)
    for L in range(1, L_max + 1):
        out[L] = math.fsum(spec.value(o, y) for y in model.sphere(o, L))
    return out


def total_kernel_mass(spec: KernelSpec, horizon: int = 4096, analytic: bool = True) -> TailSum:
    """sum_{y != o} J(o, y), exact to the horizon plus a remainder bound.

    For power-law kernels on lattices the sum has a zeta closed form and
    is returned with zero remainder when ``analytic`` is set.
    """
    if analytic and spec.form == "power" and isinstance(spec.model, Lattice):
        s = spec.d * spec.alpha
        if spec.d == 1:
            val = 2.0 * zeta(s)
        elif spec.d == 2:
            val = 4.0 * zeta(s - 1)
        else:
            val = 4.0 * zeta(s - 2) + 2.0 * zeta(s)
        return TailSum(exact=float(val), remainder=0.0)
    H = min(horizon, spec.model.horizon)
    sums = _sphere_kernel_sums(spec, H)
    return TailSum(exact=float(np.sum(sums[1:])), remainder=doubling_remainder(spec, H))


@dataclass
class DegreeProfile:
    """Expected-degree table D_L = sum over S(L) of p(o, y), with tails.

    ``length_partial`` holds the partial sums of L * D_L at the dyadic
    checkpoints used for divergence detection.
    """

    spec: KernelSpec
    horizon: int
    D: np.ndarray                    # index L = 0..horizon, D[0] = 0
    length_checkpoints: np.ndarray   # radii horizon/8, /4, /2, horizon
    length_partial: np.ndarray       # partial sums at the checkpoints
    length_divergent: bool

    def tail_degree(self, r: int) -> TailSum:
        """sum_{L >= r} D_L as exact part to horizon plus remainder bound."""
        if r < 1 or r > self.horizon:
            raise ValueError("r outside profile range")
        rem = self.spec.beta * doubling_remainder(self.spec, self.horizon)
        return TailSum(exact=float(np.sum(self.D[r:])), remainder=rem)

    def expected_total_length_partial(self, r: int) -> float:
        if r > self.horizon:
            raise ValueError("r outside profile range")
        L = np.arange(r + 1, dtype=np.float64)
        return float(np.sum(L * self.D[: r + 1]))


DIVERGENCE_TOLERANCE = 0.05  # doubling ratio threshold 1.05, three doublings


def degree_profile(spec: KernelSpec, r_max: int) -> DegreeProfile:
    """Exact per-sphere expected degrees and total-length divergence audit.

    Tail quantities require an integrable kernel; the constructor already
    enforces alpha > 1.  The total-length partial sums are flagged
    DIVERGENT when the last three dyadic doublings each grow by a factor
    of at least 1 + DIVERGENCE_TOLERANCE, signalling alpha <= 1 + 1/d.
    """
    if r_max < 16:
        raise ValueError("need r_max >= 16 for the doubling audit")
    H = min(r_max, spec.model.horizon)
    model = spec.model
    if spec.is_distance_kernel:
        sizes = model.sphere_sizes(H).astype(np.float64)
        D = np.zeros(H + 1)
        for L in range(1, H + 1):
            D[L] = sizes[L] * spec.probability_at_distance(L)
    else:
        o = model.origin
        D = np.zeros(H + 1)
        for L in range(1, H + 1):
            D[L] = math.fsum(spec.probability(o, y) for y in model.sphere(o, L))

    L_arr = np.arange(H + 1, dtype=np.float64)
    cum = np.cumsum(L_arr * D)
    checkpoints = np.array([H // 8, H // 4, H // 2, H], dtype=np.int64)
    partial = cum[checkpoints]
    with np.errstate(divide="ignore", invalid="ignore"):
        ratios = partial[1:] / partial[:-1]
    divergent = bool(np.all(ratios >= 1.0 + DIVERGENCE_TOLERANCE)) if partial[0] > 0 else False
    return DegreeProfile(spec=spec, horizon=H, D=D,
                         length_checkpoints=checkpoints,
                         length_partial=partial,
                         length_divergent=divergent)


# -- cross sums -------------------------------------------------------------

def j_cross(spec: KernelSpec, A, B) -> float:
    """sum_{x in A, y in B} J(x, y) for disjoint finite vertex sets."""
    A, B = set(A), set(B)
    if A & B:
        raise ValueError("j_cross requires disjoint sets")
    return math.fsum(spec.value(x, y) for x in A for y in B)


def j_cross_ball_complement(spec: KernelSpec, A, r: int,
                            horizon: int = 4096, analytic: bool = True):
    """J(A, B(r)^c) plus the exact no-edge probability bracket.

    Returns (TailSum, (p_lo, p_hi)) where the probability that no edge
    joins A to B(r)^c is exp(-beta * J(A, B(r)^c)); with a nonzero
    remainder the probability is bracketed.
    """
    model = spec.model
    ball = set(model.ball(model.origin, r))
    A = list(A)
    if any(x not in ball for x in A):
        raise ValueError("A must lie inside B(r)")
    total = total_kernel_mass(spec, horizon=horizon, analytic=analytic)
    exact = 0.0
    for x in A:
        inside = math.fsum(spec.value(x, y) for y in ball if y != x)
        exact += total.exact - inside
    rem = len(A) * total.remainder
    cross = TailSum(exact=exact, remainder=rem)
    p_hi = math.exp(-spec.beta * cross.lower)
    p_lo = math.exp(-spec.beta * cross.upper)
    return cross, (p_lo, p_hi)
