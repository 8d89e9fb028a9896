"""Pure-Python GED kernels.

Reference twin of ``_ckernels.pyx``: same algorithms, same iteration order and
tie-breaking, so both backends return identical values and assignments.

``costs`` is always a length-5 float array ordered
``(node_ins, node_del, node_rel, edge_ins, edge_del)``; labels use ``-1`` for
"unlabeled" and a mapping entry of ``-1`` means the g1 node is deleted.
"""

from __future__ import annotations

import numpy as np

BACKEND = "python"
_BIG = float("inf")


def hungarian(cost):
    """Kuhn-Munkres with row/column potentials, O(n^3)."""
    c = np.asarray(cost, dtype=np.float64).tolist()
    n = len(c)
    u = [0.0] * (n + 1)
    v = [0.0] * (n + 1)
    p = [0] * (n + 1)
    way = [0] * (n + 1)
    for i in range(1, n + 1):
        p[0] = i
        j0 = 0
        minv = [_BIG] * (n + 1)
        used = [False] * (n + 1)
        while True:
            used[j0] = True
            i0 = p[j0]
            row = c[i0 - 1]
            ui0 = u[i0]
            delta = _BIG
            j1 = 0
            for j in range(1, n + 1):
                if not used[j]:
                    cur = row[j - 1] - ui0 - v[j]
                    if cur < minv[j]:
                        minv[j] = cur
                        way[j] = j0
                    if minv[j] < delta:
                        delta = minv[j]
                        j1 = j
            for j in range(n + 1):
                if used[j]:
                    u[p[j]] += delta
                    v[j] -= delta
                else:
                    minv[j] -= delta
            j0 = j1
            if p[j0] == 0:
                break
        while True:
            j1 = way[j0]
            p[j0] = p[j1]
            j0 = j1
            if j0 == 0:
                break
    assign = [0] * n
    for j in range(1, n + 1):
        assign[p[j] - 1] = j - 1
    total = 0.0
    for i in range(n):
        total += c[i][assign[i]]
    return np.asarray(assign, dtype=np.int64), total


def lapjv(cost):
    """Jonker-Volgenant shortest augmenting path LAP solver (dense)."""
    c = np.asarray(cost, dtype=np.float64).tolist()
    n = len(c)
    if n == 1:
        return np.zeros(1, dtype=np.int64), c[0][0]
    rowsol = [-1] * n
    colsol = [-1] * n
    v = [0.0] * n
    matches = [0] * n
    free = [0] * n

    # column reduction
    for j in range(n - 1, -1, -1):
        best = c[0][j]
        imin = 0
        for i in range(1, n):
            if c[i][j] < best:
                best = c[i][j]
                imin = i
        v[j] = best
        matches[imin] += 1
        if matches[imin] == 1:
            rowsol[imin] = j
            colsol[j] = imin
        elif v[j] < v[rowsol[imin]]:
            j1 = rowsol[imin]
            rowsol[imin] = j
            colsol[j] = imin
            colsol[j1] = -1
        else:
            colsol[j] = -1

    # reduction transfer
    numfree = 0
    for i in range(n):
        if matches[i] == 0:
            free[numfree] = i
            numfree += 1
        elif matches[i] == 1:
            j1 = rowsol[i]
            best = _BIG
            row = c[i]
            for j in range(n):
                if j != j1 and row[j] - v[j] < best:
                    best = row[j] - v[j]
            v[j1] -= best

    # augmenting row reduction, two passes
    for _ in range(2):
        k = 0
        prvnumfree = numfree
        numfree = 0
        while k < prvnumfree:
            i = free[k]
            k += 1
            row = c[i]
            umin = row[0] - v[0]
            j1 = 0
            j2 = 0
            usubmin = _BIG
            for j in range(1, n):
                h = row[j] - v[j]
                if h < usubmin:
                    if h >= umin:
                        usubmin = h
                        j2 = j
                    else:
                        usubmin = umin
                        umin = h
                        j2 = j1
                        j1 = j
            i0 = colsol[j1]
            if umin < usubmin:
                v[j1] -= usubmin - umin
            elif i0 > -1:
                j1 = j2
                i0 = colsol[j2]
            rowsol[i] = j1
            colsol[j1] = i
            if i0 > -1:
                if umin < usubmin:
                    k -= 1
                    free[k] = i0
                else:
                    free[numfree] = i0
                    numfree += 1

    # augment each remaining free row along a shortest alternating path
    d = [0.0] * n
    pred = [0] * n
    collist = [0] * n
    for f in range(numfree):
        freerow = free[f]
        row = c[freerow]
        for j in range(n - 1, -1, -1):
            d[j] = row[j] - v[j]
            pred[j] = freerow
            collist[j] = j
        low = 0
        up = 0
        last = 0
        endofpath = -1
        found = False
        best = 0.0
        while not found:
            if up == low:
                last = low - 1
                best = d[collist[up]]
                up += 1
                for k in range(up, n):
                    j = collist[k]
                    h = d[j]
                    if h <= best:
                        if h < best:
                            up = low
                            best = h
                        collist[k] = collist[up]
                        collist[up] = j
                        up += 1
                for k in range(low, up):
                    if colsol[collist[k]] < 0:
                        endofpath = collist[k]
                        found = True
                        break
            if not found:
                j1 = collist[low]
                low += 1
                i = colsol[j1]
                crow = c[i]
                h = crow[j1] - v[j1] - best
                for k in range(up, n):
                    j = collist[k]
                    v2 = crow[j] - v[j] - h
                    if v2 < d[j]:
                        pred[j] = i
                        if v2 == best:
                            if colsol[j] < 0:
                                endofpath = j
                                found = True
                                break
                            collist[k] = collist[up]
                            collist[up] = j
                            up += 1
                        d[j] = v2
        for k in range(last + 1):
            j1 = collist[k]
            v[j1] += d[j1] - best
        while True:
            i = pred[endofpath]
            colsol[endofpath] = i
            j1 = endofpath
            endofpath = rowsol[i]
            rowsol[i] = j1
            if i == freerow:
                break

    total = 0.0
    for i in range(n):
        total += c[i][rowsol[i]]
    return np.asarray(rowsol, dtype=np.int64), total


def edit_path_cost(adj1, adj2, lab1, lab2, mapping, costs):
    """True cost of the edit path induced by a node mapping g1 -> g2."""
    a1 = np.asarray(adj1).tolist()
    a2 = np.asarray(adj2).tolist()
    l1 = list(lab1)
    l2 = list(lab2)
    mp = [int(x) for x in mapping]
    node_ins, node_del, node_rel, edge_ins, edge_del = (float(x) for x in costs)
    n1, n2 = len(a1), len(a2)
    inv = [-1] * n2
    total = 0.0
    for u in range(n1):
        v = mp[u]
        if v < 0:
            total += node_del
        else:
            inv[v] = u
            if l1[u] != l2[v]:
                total += node_rel
    for v in range(n2):
        if inv[v] < 0:
            total += node_ins
    for u in range(n1):
        ru = a1[u]
        for w in range(u + 1, n1):
            if ru[w]:
                if mp[u] < 0 or mp[w] < 0 or not a2[mp[u]][mp[w]]:
                    total += edge_del
    for v in range(n2):
        rv = a2[v]
        for w in range(v + 1, n2):
            if rv[w]:
                if inv[v] < 0 or inv[w] < 0 or not a1[inv[v]][inv[w]]:
                    total += edge_ins
    return total


def beam_search(adj1, adj2, lab1, lab2, order, costs, width, max_states=2_000_000):
    """Level-wise A*-beam over partial node mappings.

    Depth ``d`` decides the image of g1 node ``order[d]`` (a g2 node or
    deletion).  States at each depth are ranked lexicographically by
    ``(f, g, parent rank, child index)`` with the deletion child indexed
    last, and the best ``width`` survive.  ``width <= 0`` keeps every state
    whose ``f`` does not exceed the greedy upper bound, which is exhaustive
    (exact) unless ``max_states`` forces truncation.

    Returns ``(value, mapping, exhaustive)``; ``mapping`` is indexed by g1 node.
    """
    a1 = np.asarray(adj1).tolist()
    a2 = np.asarray(adj2).tolist()
    l1 = list(lab1)
    l2 = list(lab2)
    order = [int(x) for x in order]
    node_ins, node_del, node_rel, edge_ins, edge_del = (float(x) for x in costs)
    n1, n2 = len(a1), len(a2)
    deg1 = [sum(r) for r in a1]
    deg2 = [sum(r) for r in a2]
    m1 = sum(deg1) // 2
    m2 = sum(deg2) // 2
    # g1 edges with both endpoints among the first d processed nodes
    e1_within = [0] * (n1 + 1)
    for d in range(n1):
        u = order[d]
        e1_within[d + 1] = e1_within[d] + sum(a1[order[j]][u] for j in range(d))

    def run(keep, bound):
        # state = (f, g, maps-by-depth tuple, used g2 count, g2 edges among used)
        level = [(0.0, 0.0, (), 0, 0)]
        exhaustive = True
        for d in range(n1):
            u = order[d]
            r1 = n1 - d - 1
            e1_rem = m1 - e1_within[d + 1]
            children = []
            for rank, (_, g, maps, nused, e2u) in enumerate(level):
                used = set(maps)
                for ci in range(n2 + 1):
                    v = ci if ci < n2 else -1
                    if v >= 0 and v in used:
                        continue
                    if v < 0:
                        inc = node_del
                    else:
                        inc = node_rel if l1[u] != l2[v] else 0.0
                    e2c = e2u
                    ru = a1[u]
                    for j in range(d):
                        vj = maps[j]
                        e1 = ru[order[j]]
                        e2 = 0
                        if v >= 0 and vj >= 0:
                            e2 = a2[vj][v]
                            e2c += e2
                        if e1 != e2:
                            inc += edge_del if e1 else edge_ins
                    gc = g + inc
                    nu = nused + (1 if v >= 0 else 0)
                    r2 = n2 - nu
                    if r1 == 0:
                        gc += r2 * node_ins + (m2 - e2c) * edge_ins
                        h = 0.0
                    else:
                        h = 0.0
                        if r1 > r2:
                            h += (r1 - r2) * node_del
                        elif r2 > r1:
                            h += (r2 - r1) * node_ins
                        e2_rem = m2 - e2c
                        if e1_rem > e2_rem:
                            h += (e1_rem - e2_rem) * edge_del
                        elif e2_rem > e1_rem:
                            h += (e2_rem - e1_rem) * edge_ins
                    f = gc + h
                    if bound is not None and f > bound + 1e-9:
                        continue
                    local = abs(deg1[u] - deg2[v]) if v >= 0 else deg1[u]
                    children.append((f, gc, local, rank, ci, maps + (v,), nu, e2c))
            children.sort(key=lambda s: (s[0], s[1], s[2], s[3], s[4]))
            limit = keep if keep > 0 else max_states
            if len(children) > limit:
                if keep <= 0:
                    exhaustive = False
                children = children[:limit]
            level = [(s[0], s[1], s[5], s[6], s[7]) for s in children]
        best = level[0]
        mapping = [-1] * n1
        for d, v in enumerate(best[2]):
            mapping[order[d]] = v
        return best[1], mapping, exhaustive

    if width > 0:
        value, mapping, _ = run(width, None)
        return value, np.asarray(mapping, dtype=np.int64), False
    ub, _, _ = run(1, None)
    value, mapping, exhaustive = run(0, ub)
    return value, np.asarray(mapping, dtype=np.int64), exhaustive
