"""Block decompositions of finite clusters and the associated combinatorics.

A *block* is a finite nearest-neighbour-connected vertex set equal to
its closure (it contains every vertex it cuts off from infinity).  A
finite cluster decomposes uniquely into pairwise 1-disconnected closed
blocks; contracting the blocks gives the block graph (and the weighted
block graph, which remembers the lengths of the open edges joining
blocks).  This module implements that machinery, the coarse-connectivity
and Peierls enumeration audits, and the forward-degree-vector / rooted
labelled tree counting used to bound connected block graphs.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from math import comb

from .graphs import Lattice, Vertex
from .isoperimetry import inner_boundary
from .window import Window


class ClosureHorizonError(Exception):
    """The closure cannot be certified inside the window minus guard."""


def one_connected_components(S, model) -> list[frozenset]:
    """Unique partition of a finite set into maximal 1-connected pieces.

    Pieces are returned in canonical order (by minimal vertex).
    """
    S = set(S)
    out = []
    while S:
        start = min(S)
        comp = {start}
        stack = [start]
        while stack:
            x = stack.pop()
            for y in model.neighbors(x):
                if y in S and y not in comp:
                    comp.add(y)
                    stack.append(y)
        S -= comp
        out.append(frozenset(comp))
    return sorted(out, key=min)


def _closure_lattice(A: set, model: Lattice) -> frozenset:
    """Exact closure on a lattice: flood the complement inside bbox(A) + 1.

    Any vertex outside the padded bounding box reaches infinity trivially,
    so the finite complement components are exactly the unreached box
    cells.
    """
    dim = model.dim
    lo = tuple(min(v[i] for v in A) - 1 for i in range(dim))
    hi = tuple(max(v[i] for v in A) + 1 for i in range(dim))

    def inside(v):
        return all(lo[i] <= v[i] <= hi[i] for i in range(dim))

    seed = lo
    reached = {seed}
    stack = [seed]
    while stack:
        x = stack.pop()
        for y in model.neighbors(x):
            if inside(y) and y not in A and y not in reached:
                reached.add(y)
                stack.append(y)
    filled = set(A)
    for v in itertools.product(*[range(lo[i], hi[i] + 1) for i in range(dim)]):
        if v not in A and v not in reached:
            filled.add(v)
    return frozenset(filled)


def closure(A, window_or_model) -> frozenset:
    """A plus every vertex from which A is a cutset to infinity.

    On lattices the computation is exact via a bounding-box flood and a
    window only enforces the guard contract; on other models the flood
    runs from the window's outer sphere, which requires A to stay out of
    the guard annulus (otherwise enclosure cannot be certified and a
    :class:`ClosureHorizonError` is raised).
    """
    A = set(A)
    if not A:
        return frozenset()
    if isinstance(window_or_model, Window):
        window = window_or_model
        model = window.model
        for v in A:
            i = window.index.get(v)
            if i is None or window.dist0[i] >= window.guard_lo:
                raise ClosureHorizonError("set touches the guard annulus or leaves the window")
    else:
        window = None
        model = window_or_model
    if isinstance(model, Lattice):
        return _closure_lattice(A, model)
    if window is None:
        raise ClosureHorizonError("non-lattice closure needs a window")
    sources = [v for i, v in enumerate(window.vertices)
               if window.dist0[i] == window.r_out]
    member = set(window.vertices)
    reached = set()
    stack = [v for v in sources if v not in A]
    reached.update(stack)
    while stack:
        x = stack.pop()
        for y in model.neighbors(x):
            if y in member and y not in A and y not in reached:
                reached.add(y)
                stack.append(y)
    filled = set(A)
    for v in window.vertices:
        if v not in A and v not in reached:
            filled.add(v)
    return frozenset(filled)


@dataclass
class BlockDecomposition:
    """Pairwise 1-disconnected closed blocks covering a finite cluster."""

    blocks: list[frozenset]
    boundaries: list[frozenset]
    model: object

    @property
    def b(self) -> int:
        return len(self.blocks)

    def boundary_sizes(self) -> list[int]:
        return [len(bd) for bd in self.boundaries]

    def vertex_to_block(self) -> dict[Vertex, int]:
        out = {}
        for i, blk in enumerate(self.blocks):
            for v in blk:
                out[v] = i
        return out

    def total_size(self) -> int:
        return sum(len(b) for b in self.blocks)


def block_decomposition(K, window_or_model, origin: Vertex | None = None) -> BlockDecomposition:
    """Unique block decomposition of a finite vertex set.

    Components are closed, nested closures are absorbed by the maximal
    one, and the result is checked to be pairwise 1-disconnected and
    closed.  The block containing ``origin`` (default: the window origin
    if it belongs to K) comes first; the rest follow in canonical order.
    """
    model = (window_or_model.model if isinstance(window_or_model, Window)
             else window_or_model)
    if origin is None and isinstance(window_or_model, Window):
        if window_or_model.origin in set(K):
            origin = window_or_model.origin
    comps = one_connected_components(K, model)
    closures = [closure(c, window_or_model) for c in comps]
    # nesting case: a closure swallowed by another is dropped (the closures
    # of 1-disconnected components are either nested or 1-disconnected)
    blocks = []
    for c in closures:
        contained = any((c < other) for other in closures)
        duplicate = any(c == other for other in blocks)
        if not contained and not duplicate:
            blocks.append(c)
    for a, bset in itertools.combinations(blocks, 2):
        dmin = min(model.distance(x, y) for x in a for y in bset)
        if dmin < 2:
            raise AssertionError("block decomposition produced 1-connected blocks")
    for blk in blocks:
        if closure(blk, window_or_model) != blk:
            raise AssertionError("block decomposition produced a non-closed block")
    if origin is not None:
        blocks.sort(key=lambda blk: (origin not in blk, min(blk)))
    else:
        blocks.sort(key=min)
    bounds = [frozenset(inner_boundary(blk, model)) for blk in blocks]
    return BlockDecomposition(blocks=blocks, boundaries=bounds, model=model)


def block_graph(config, dec: BlockDecomposition):
    """(H, H*) from the open pairs: H = contracted adjacency, H* keeps lengths."""
    window = config.window
    verts = window.vertices
    ii, jj, dist = window.pair_table
    where = dec.vertex_to_block()
    H = set()
    Hstar = set()
    for k in config.open_pairs:
        u, v = verts[ii[k]], verts[jj[k]]
        bi, bj = where.get(u), where.get(v)
        if bi is None or bj is None or bi == bj:
            continue
        if bi > bj:
            bi, bj = bj, bi
        H.add((bi, bj))
        Hstar.add((bi, bj, int(dist[k])))
    return H, Hstar


def block_graph_connected(dec: BlockDecomposition, H) -> bool:
    b = dec.b
    if b <= 1:
        return True
    adj = {i: set() for i in range(b)}
    for i, j in H:
        adj[i].add(j)
        adj[j].add(i)
    seen = {0}
    stack = [0]
    while stack:
        x = stack.pop()
        for y in adj[x]:
            if y not in seen:
                seen.add(y)
                stack.append(y)
    return len(seen) == b


def is_isolated(config, dec: BlockDecomposition, I=None) -> bool:
    """No open edge from the selected blocks' boundaries to non-block vertices.

    Checks window-internal edges; edges leaving the window are the
    sampler's one-step escape event and are accounted for there.
    """
    if I is None:
        I = range(dec.b)
    window = config.window
    verts = window.vertices
    ii, jj, _ = window.pair_table
    all_blocks = set().union(*dec.blocks) if dec.blocks else set()
    watched = set()
    for i in I:
        watched |= dec.boundaries[i]
    for k in config.open_pairs:
        u, v = verts[ii[k]], verts[jj[k]]
        if (u in watched and v not in all_blocks) or (v in watched and u not in all_blocks):
            return False
    return True


def minimal_r_connectivity(S, model) -> int:
    """Smallest R making S connected under distance-at-most-R adjacency."""
    S = sorted(set(S))
    if not S:
        raise ValueError("need a nonempty set")
    n = len(S)
    if n == 1:
        return 1
    dists = [[model.distance(S[a], S[b]) for b in range(n)] for a in range(n)]

    def connected(R):
        from .clusters import UnionFind
        uf = UnionFind(n)
        for a in range(n):
            for b in range(a + 1, n):
                if dists[a][b] <= R:
                    uf.union(a, b)
        return len({uf.find(a) for a in range(n)}) == 1

    lo, hi = 1, max(max(row) for row in dists)
    while lo < hi:
        mid = (lo + hi) // 2
        if connected(mid):
            hi = mid
        else:
            lo = mid + 1
    return lo


# -- exhaustive block enumeration (Z^2) ---------------------------------------

def block_area_cap(m: int) -> int:
    """Area bound for Z^2 sets with inner boundary m.

    L1 balls minimise the inner boundary at fixed area (vertex
    isoperimetry on Z^2); inverting the ball profile gives
    area <= (m^2 + 4m + 8)/8, kept with a safety margin that the
    enumerator verifies at runtime.
    """
    return (m * m + 4 * m + 8) // 8 + 2


def enumerate_blocks_reference(m: int, model: Lattice | None = None):
    """Slow exhaustive oracle: all blocks through the origin cell with #boundary = m.

    Pure-python Redelmeier growth over connected supersets of the origin
    with span/area pruning; used to cross-check the compiled enumerator.
    """
    if model is None:
        model = Lattice(2)
    if model.dim != 2:
        raise ValueError("block enumeration is implemented for Z^2")
    area_cap = block_area_cap(m)
    found = []

    def nbrs(c):
        x, y = c
        return ((x + 1, y), (x - 1, y), (x, y + 1), (x, y - 1))

    def visit(A):
        bnd = [c for c in A if any(nb not in A for nb in nbrs(c))]
        if len(bnd) == m and _closure_lattice(A, model) == frozenset(A):
            found.append(frozenset(A))

    def span_ok(A):
        xs = [c[0] for c in A]
        ys = [c[1] for c in A]
        return (max(xs) - min(xs) + 1) <= m and (max(ys) - min(ys) + 1) <= m

    def rec(untried, A, reach):
        untried = list(untried)
        while untried:
            c = untried.pop()
            A.add(c)
            if span_ok(A):
                visit(A)
                if len(A) < area_cap:
                    new = [nb for nb in nbrs(c) if nb not in reach]
                    reach.update(new)
                    rec(untried + new, A, reach)
                    reach.difference_update(new)
            A.remove(c)

    origin = (0, 0)
    rec([origin], set(), {origin})
    return found


def enumerate_blocks(m: int, m_cap: int = 10, collect: bool = True):
    """Count (and optionally list) blocks containing the origin with #boundary = m.

    Exhaustive and duplicate-free; the compiled census enumerates every
    hole-free connected superset of the origin whose boundary can still
    shrink to the cap.  Returns (count, blocks) with blocks=None when not
    collecting.
    """
    if m < 1:
        raise ValueError("boundary size must be >= 1")
    if m > m_cap:
        raise ValueError(f"boundary size {m} exceeds the enumeration cap {m_cap}")
    from ._blockenum import boundary_census, collect_blocks
    counts, _ = boundary_census(m)
    count = int(counts[m])
    if not collect:
        return count, None
    cells = collect_blocks(m, count)
    return count, [frozenset(map(tuple, blk)) for blk in cells]


def peierls_census(m_cap: int = 10):
    """counts[m] of origin blocks for all m <= m_cap, plus the
    number of enumerated blocks whose boundary is not 2-connected."""
    from ._blockenum import boundary_census
    counts, violations = boundary_census(m_cap)
    return counts, violations


# -- forward-degree vectors and rooted labelled trees --------------------------

def forward_degree_vectors(b: int) -> list[tuple[int, ...]]:
    """All length-b vectors with sum b-1 whose prefix sums satisfy
    f_0 + ... + f_j >= j for every j.  (The j = 0 constraint is vacuous,
    so the set contains vectors that no rooted tree realises.)"""
    if b < 1:
        raise ValueError("b >= 1")
    out = []

    def rec(prefix, total):
        j = len(prefix)
        if j == b:
            if total == b - 1:
                out.append(tuple(prefix))
            return
        for f in range(b - total):
            if total + f >= j or j == 0:
                rec(prefix + [f], total + f)

    rec([], 0)
    assert len(out) <= comb(2 * b - 2, b - 1)
    return out


def f_tree_edges(f) -> list[tuple[int, int]] | None:
    """Edges of the rooted labelled tree encoded by the forward degrees.

    Vertex j's children are the consecutive labels following those of
    vertices 0..j-1.  Returns None when the assignment is not a valid
    tree (some vertex would be its own child, i.e. the encoding is
    unrealizable).
    """
    b = len(f)
    edges = []
    nxt = 1
    for j in range(b):
        if f[j] > 0 and nxt <= j:
            return None
        for _ in range(f[j]):
            edges.append((j, nxt))
            nxt += 1
    if nxt != b:
        return None
    return edges


def realizable_f_trees(b: int) -> list[tuple[int, ...]]:
    return [f for f in forward_degree_vectors(b) if f_tree_edges(f) is not None]


def f_connected(H_edges, f) -> bool:
    """Does the labelled graph contain the f-tree as a subgraph?"""
    tree = f_tree_edges(tuple(f))
    if tree is None:
        return False
    E = {frozenset(e) for e in H_edges}
    return all(frozenset(e) in E for e in tree)


def _relabel(edges, sigma):
    """Apply a permutation of 1..b-1 (fixing 0) to an edge list."""
    return [(sigma.get(a, a), sigma.get(c, c)) for a, c in edges]


def rooted_tree_pair_count(tree_edges, b: int) -> int:
    """#{(f, sigma) : sigma fixes 0 and sigma(tree) is an f-tree}.

    Counting rooted isomorphisms: relabelling within each sibling group
    is free, so the count equals the product of child-count factorials.
    """
    count = 0
    for perm in itertools.permutations(range(1, b)):
        sigma = {i + 1: perm[i] for i in range(b - 1)}
        relabeled = _relabel(tree_edges, sigma)
        if _is_f_tree(relabeled, b):
            count += 1
    return count


def _is_f_tree(edges, b: int) -> bool:
    """A labelled tree rooted at 0 is an f-tree iff the parent map is
    nondecreasing in the child label (children blocks are consecutive)."""
    if len(edges) != b - 1:
        return False
    parent = {}
    adj = {i: [] for i in range(b)}
    for a, c in edges:
        adj[a].append(c)
        adj[c].append(a)
    seen = {0}
    stack = [0]
    while stack:
        x = stack.pop()
        for y in adj[x]:
            if y not in seen:
                parent[y] = x
                seen.add(y)
                stack.append(y)
    if len(seen) != b:
        return False
    prev = -1
    for c in range(1, b):
        p = parent.get(c)
        if p is None or p >= c:
            return False
        if p < prev:
            return False
        prev = p
    return True


def child_count_product(tree_edges, b: int) -> int:
    """Product of (number of children)! over the vertices of the rooted tree."""
    import math
    adj = {i: [] for i in range(b)}
    for a, c in tree_edges:
        adj[a].append(c)
        adj[c].append(a)
    prod = 1
    seen = {0}
    stack = [0]
    while stack:
        x = stack.pop()
        kids = [y for y in adj[x] if y not in seen]
        prod *= math.factorial(len(kids))
        for y in kids:
            seen.add(y)
            stack.append(y)
    return prod


def all_labeled_trees(b: int):
    """All labelled trees on {0..b-1} via Pruefer sequences."""
    if b == 1:
        yield []
        return
    if b == 2:
        yield [(0, 1)]
        return
    for seq in itertools.product(range(b), repeat=b - 2):
        degree = [1] * b
        for s in seq:
            degree[s] += 1
        edges = []
        seq_list = list(seq)
        leaves = sorted(i for i in range(b) if degree[i] == 1)
        import heapq
        heapq.heapify(leaves)
        deg = degree[:]
        for s in seq_list:
            leaf = heapq.heappop(leaves)
            edges.append((min(leaf, s), max(leaf, s)))
            deg[leaf] -= 1
            deg[s] -= 1
            if deg[s] == 1:
                heapq.heappush(leaves, s)
        last = [i for i in range(b) if deg[i] == 1]
        edges.append((min(last), max(last)))
        yield edges


def connected_labeled_graphs(b: int):
    """All connected labelled graphs on {0..b-1} (edge subsets)."""
    from .clusters import UnionFind
    all_edges = list(itertools.combinations(range(b), 2))
    for mask in range(1 << len(all_edges)):
        edges = [all_edges[i] for i in range(len(all_edges)) if mask >> i & 1]
        uf = UnionFind(b)
        for a, c in edges:
            uf.union(a, c)
        if len({uf.find(i) for i in range(b)}) == 1:
            yield edges
