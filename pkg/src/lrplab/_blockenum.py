"""Exhaustive enumeration of origin blocks on Z^2, compiled.

Enumerates every connected cell set containing the origin exactly once
(Redelmeier-style untried-set growth) and records the hole-free ones by
inner boundary size.  Branches are pruned when the boundary provably
cannot come back below the cap:

* cells adjacent to a *consumed* candidate (one popped earlier on the
  current search path) stay boundary in the entire subtree;
* the row/column span never shrinks and lower-bounds the boundary;
* the area cap follows from vertex isoperimetry (balls minimise the
  inner boundary), with a safety margin asserted at runtime.

Each recorded block's boundary is also checked to be 2-connected (the
coarse-connectivity property of minimal cutsets on Z^2).
"""

from __future__ import annotations

import numpy as np
from numba import njit

from .blocks import block_area_cap


@njit(cache=True)
def _census(m_cap, area_cap, collect_m, blocks_flat, blocks_len, counts, extra):
    """Core search.  collect_m < 0: count only.  extra[0] returns boundary
    2-connectivity violations, extra[1] the number of area-cap contacts."""
    G = 2 * m_cap + 3
    center = (m_cap + 1) * G + (m_cap + 1)
    NBR = np.array([1, -1, G, -G], dtype=np.int64)

    st = np.zeros(G * G, dtype=np.uint8)
    for i in range(G):
        st[i] = 4
        st[(G - 1) * G + i] = 4
        st[i * G] = 4
        st[i * G + G - 1] = 4

    A = np.empty(area_cap + 1, dtype=np.int64)
    untried = np.empty(8192, dtype=np.int64)
    consumed = np.empty(8192, dtype=np.int64)
    news = np.empty(1024, dtype=np.int64)
    D = area_cap + 2
    f_ubase = np.empty(D, dtype=np.int64)
    f_ulen = np.empty(D, dtype=np.int64)
    f_cbase = np.empty(D, dtype=np.int64)
    f_nbase = np.empty(D, dtype=np.int64)
    f_ncnt = np.empty(D, dtype=np.int64)
    f_pcell = np.full(D, -1, dtype=np.int64)

    flood = np.empty(G * G, dtype=np.int64)
    flood_stamp = np.zeros(G * G, dtype=np.int64)
    stamp = 0
    bcells = np.empty(m_cap + 1, dtype=np.int64)
    uf = np.empty(m_cap + 1, dtype=np.int64)

    untried[0] = center
    st[center] = 1
    f_ubase[0] = 0
    f_ulen[0] = 1
    f_cbase[0] = 0
    utop = 1
    ctop = 0
    ntop = 0
    area = 0
    depth = 0
    nblocks = 0

    while depth >= 0:
        if f_pcell[depth] >= 0:
            c = f_pcell[depth]
            for i in range(f_nbase[depth], f_nbase[depth] + f_ncnt[depth]):
                st[news[i]] = 0
            ntop = f_nbase[depth]
            st[c] = 3
            consumed[ctop] = c
            ctop += 1
            area -= 1
            f_pcell[depth] = -1
            continue
        if f_ulen[depth] == 0:
            for i in range(f_cbase[depth], ctop):
                st[consumed[i]] = 1
            ctop = f_cbase[depth]
            utop = f_ubase[depth]
            depth -= 1
            continue

        c = untried[f_ubase[depth] + f_ulen[depth] - 1]
        f_ulen[depth] -= 1
        st[c] = 2
        A[area] = c
        area += 1

        # visit: boundary size, permanent boundary, spans
        bnd = 0
        perm = 0
        minx = G
        maxx = -1
        miny = G
        maxy = -1
        for q in range(area):
            cell = A[q]
            x = cell // G
            y = cell % G
            if x < minx:
                minx = x
            if x > maxx:
                maxx = x
            if y < miny:
                miny = y
            if y > maxy:
                maxy = y
            is_b = False
            is_p = False
            for kn in range(4):
                s = st[cell + NBR[kn]]
                if s != 2:
                    is_b = True
                    if s >= 3:
                        is_p = True
            if is_b:
                bnd += 1
            if is_p:
                perm += 1
        span = maxx - minx + 1
        if maxy - miny + 1 > span:
            span = maxy - miny + 1

        if bnd <= m_cap:
            # hole-freeness: flood the complement of A inside the padded bbox
            stamp += 1
            x0 = minx - 1
            x1 = maxx + 1
            y0 = miny - 1
            y1 = maxy + 1
            start = x0 * G + y0
            flood[0] = start
            flood_stamp[start] = stamp
            fh = 0
            ft = 1
            reached = 1
            while fh < ft:
                cell = flood[fh]
                fh += 1
                x = cell // G
                y = cell % G
                for kn in range(4):
                    nb = cell + NBR[kn]
                    nx = nb // G
                    ny = nb % G
                    if x0 <= nx <= x1 and y0 <= ny <= y1:
                        if st[nb] != 2 and flood_stamp[nb] != stamp:
                            flood_stamp[nb] = stamp
                            flood[ft] = nb
                            ft += 1
                            reached += 1
            box = (x1 - x0 + 1) * (y1 - y0 + 1)
            if reached == box - area:
                counts[bnd] += 1
                if area >= area_cap - 1:
                    extra[1] += 1
                # boundary 2-connectivity audit
                nb_cnt = 0
                for q in range(area):
                    cell = A[q]
                    for kn in range(4):
                        if st[cell + NBR[kn]] != 2:
                            bcells[nb_cnt] = cell
                            nb_cnt += 1
                            break
                for q in range(nb_cnt):
                    uf[q] = q
                for q in range(nb_cnt):
                    xq = bcells[q] // G
                    yq = bcells[q] % G
                    for w in range(q + 1, nb_cnt):
                        xw = bcells[w] // G
                        yw = bcells[w] % G
                        dd = abs(xq - xw) + abs(yq - yw)
                        if dd <= 2:
                            ra = q
                            while uf[ra] != ra:
                                ra = uf[ra]
                            rb = w
                            while uf[rb] != rb:
                                rb = uf[rb]
                            if ra != rb:
                                uf[rb] = ra
                roots = 0
                for q in range(nb_cnt):
                    if uf[q] == q:
                        roots += 1
                if roots > 1:
                    extra[0] += 1
                if bnd == collect_m:
                    blocks_len[nblocks] = area
                    for q in range(area):
                        blocks_flat[nblocks * area_cap + q] = A[q]
                    nblocks += 1

        expand = area < area_cap and perm <= m_cap and span <= m_cap
        if expand:
            nbase = ntop
            for kn in range(4):
                nb = c + NBR[kn]
                if st[nb] == 0:
                    st[nb] = 1
                    news[ntop] = nb
                    ntop += 1
            f_nbase[depth] = nbase
            f_ncnt[depth] = ntop - nbase
            f_pcell[depth] = c
            child_base = utop
            seg = f_ulen[depth]
            for i in range(seg):
                untried[utop] = untried[f_ubase[depth] + i]
                utop += 1
            for i in range(nbase, ntop):
                untried[utop] = news[i]
                utop += 1
            depth += 1
            f_ubase[depth] = child_base
            f_ulen[depth] = seg + (ntop - nbase)
            f_cbase[depth] = ctop
            f_pcell[depth] = -1
        else:
            st[c] = 3
            consumed[ctop] = c
            ctop += 1
            area -= 1
    return nblocks


def boundary_census(m_cap: int):
    """counts[m] of origin blocks with inner boundary m, for all m <= m_cap.

    Also returns the number of enumerated blocks whose boundary fails
    2-connectivity (expected: zero).
    """
    area_cap = block_area_cap(m_cap)
    counts = np.zeros(m_cap + 1, dtype=np.int64)
    extra = np.zeros(2, dtype=np.int64)
    dummy_flat = np.empty(1, dtype=np.int64)
    dummy_len = np.empty(1, dtype=np.int64)
    _census(m_cap, area_cap, -1, dummy_flat, dummy_len, counts, extra)
    if extra[1] > 0:
        raise AssertionError("area cap reached; the isoperimetric margin is too tight")
    return counts, int(extra[0])


def collect_blocks(m: int, count: int):
    """Cell lists of all origin blocks with inner boundary exactly m."""
    area_cap = block_area_cap(m)
    counts = np.zeros(m + 1, dtype=np.int64)
    extra = np.zeros(2, dtype=np.int64)
    flat = np.empty(max(count, 1) * area_cap, dtype=np.int64)
    lens = np.empty(max(count, 1), dtype=np.int64)
    n = _census(m, area_cap, m, flat, lens, counts, extra)
    G = 2 * m + 3
    off = m + 1
    out = []
    for b in range(n):
        cells = flat[b * area_cap: b * area_cap + lens[b]]
        out.append([(int(c // G) - off, int(c % G) - off) for c in cells])
    return out
