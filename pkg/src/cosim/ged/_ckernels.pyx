# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled GED kernels; line-for-line twin of ``_pykernels``."""

import numpy as np
cimport numpy as cnp
from libc.math cimport INFINITY

cnp.import_array()

BACKEND = "cython"


def hungarian(cost):
    cdef double[:, ::1] c = np.ascontiguousarray(cost, dtype=np.float64)
    cdef Py_ssize_t n = c.shape[0]
    cdef double[::1] u = np.zeros(n + 1)
    cdef double[::1] v = np.zeros(n + 1)
    cdef double[::1] minv = np.empty(n + 1)
    cdef Py_ssize_t[::1] p = np.zeros(n + 1, dtype=np.intp)
    cdef Py_ssize_t[::1] way = np.zeros(n + 1, dtype=np.intp)
    cdef unsigned char[::1] used = np.zeros(n + 1, dtype=np.uint8)
    cdef Py_ssize_t i, j, j0, j1, i0
    cdef double delta, cur, ui0
    for i in range(1, n + 1):
        p[0] = i
        j0 = 0
        for j in range(n + 1):
            minv[j] = INFINITY
            used[j] = 0
        while True:
            used[j0] = 1
            i0 = p[j0]
            ui0 = u[i0]
            delta = INFINITY
            j1 = 0
            for j in range(1, n + 1):
                if not used[j]:
                    cur = c[i0 - 1, j - 1] - ui0 - v[j]
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
    assign = np.zeros(n, dtype=np.int64)
    cdef cnp.int64_t[::1] a = assign
    for j in range(1, n + 1):
        a[p[j] - 1] = j - 1
    cdef double total = 0.0
    for i in range(n):
        total += c[i, a[i]]
    return assign, total


def lapjv(cost):
    cdef double[:, ::1] c = np.ascontiguousarray(cost, dtype=np.float64)
    cdef Py_ssize_t n = c.shape[0]
    if n == 1:
        return np.zeros(1, dtype=np.int64), c[0, 0]
    rowsol_arr = np.full(n, -1, dtype=np.int64)
    cdef cnp.int64_t[::1] rowsol = rowsol_arr
    cdef cnp.int64_t[::1] colsol = np.full(n, -1, dtype=np.int64)
    cdef double[::1] v = np.zeros(n)
    cdef cnp.int64_t[::1] matches = np.zeros(n, dtype=np.int64)
    cdef cnp.int64_t[::1] free = np.zeros(n, dtype=np.int64)
    cdef double[::1] d = np.zeros(n)
    cdef cnp.int64_t[::1] pred = np.zeros(n, dtype=np.int64)
    cdef cnp.int64_t[::1] collist = np.zeros(n, dtype=np.int64)
    cdef Py_ssize_t i, j, j1, j2, k, imin, i0, numfree, prvnumfree, f, freerow
    cdef Py_ssize_t low, up, last, endofpath, loop
    cdef double best, umin, usubmin, h, v2
    cdef bint found

    for j in range(n - 1, -1, -1):
        best = c[0, j]
        imin = 0
        for i in range(1, n):
            if c[i, j] < best:
                best = c[i, j]
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

    numfree = 0
    for i in range(n):
        if matches[i] == 0:
            free[numfree] = i
            numfree += 1
        elif matches[i] == 1:
            j1 = rowsol[i]
            best = INFINITY
            for j in range(n):
                if j != j1 and c[i, j] - v[j] < best:
                    best = c[i, j] - v[j]
            v[j1] -= best

    for loop in range(2):
        k = 0
        prvnumfree = numfree
        numfree = 0
        while k < prvnumfree:
            i = free[k]
            k += 1
            umin = c[i, 0] - v[0]
            j1 = 0
            j2 = 0
            usubmin = INFINITY
            for j in range(1, n):
                h = c[i, j] - v[j]
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

    for f in range(numfree):
        freerow = free[f]
        for j in range(n - 1, -1, -1):
            d[j] = c[freerow, j] - v[j]
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
                h = c[i, j1] - v[j1] - best
                for k in range(up, n):
                    j = collist[k]
                    v2 = c[i, j] - v[j] - h
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

    cdef double total = 0.0
    for i in range(n):
        total += c[i, rowsol[i]]
    return rowsol_arr, total


def edit_path_cost(adj1, adj2, lab1, lab2, mapping, costs):
    cdef unsigned char[:, ::1] a1 = np.ascontiguousarray(adj1, dtype=np.uint8)
    cdef unsigned char[:, ::1] a2 = np.ascontiguousarray(adj2, dtype=np.uint8)
    cdef cnp.int64_t[::1] l1 = np.ascontiguousarray(lab1, dtype=np.int64)
    cdef cnp.int64_t[::1] l2 = np.ascontiguousarray(lab2, dtype=np.int64)
    cdef cnp.int64_t[::1] mp = np.ascontiguousarray(mapping, dtype=np.int64)
    cdef double[::1] cs = np.ascontiguousarray(costs, dtype=np.float64)
    cdef double node_ins = cs[0], node_del = cs[1], node_rel = cs[2], edge_ins = cs[3], edge_del = cs[4]
    cdef Py_ssize_t n1 = a1.shape[0], n2 = a2.shape[0]
    cdef cnp.int64_t[::1] inv = np.full(n2, -1, dtype=np.int64)
    cdef Py_ssize_t u, v, w
    cdef double total = 0.0
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
        for w in range(u + 1, n1):
            if a1[u, w]:
                if mp[u] < 0 or mp[w] < 0 or not a2[mp[u], mp[w]]:
                    total += edge_del
    for v in range(n2):
        for w in range(v + 1, n2):
            if a2[v, w]:
                if inv[v] < 0 or inv[w] < 0 or not a1[inv[v], inv[w]]:
                    total += edge_ins
    return total


def beam_search(adj1, adj2, lab1, lab2, order, costs, width, max_states=2_000_000):
    cdef unsigned char[:, ::1] a1 = np.ascontiguousarray(adj1, dtype=np.uint8)
    cdef unsigned char[:, ::1] a2 = np.ascontiguousarray(adj2, dtype=np.uint8)
    cdef cnp.int64_t[::1] l1 = np.ascontiguousarray(lab1, dtype=np.int64)
    cdef cnp.int64_t[::1] l2 = np.ascontiguousarray(lab2, dtype=np.int64)
    cdef cnp.int64_t[::1] od = np.ascontiguousarray(order, dtype=np.int64)
    cdef double[::1] cs = np.ascontiguousarray(costs, dtype=np.float64)
    cdef Py_ssize_t n1 = a1.shape[0], n2 = a2.shape[0]
    cdef Py_ssize_t m1 = 0, m2 = 0, u, w, d, j
    for u in range(n1):
        for w in range(u + 1, n1):
            m1 += a1[u, w]
    for u in range(n2):
        for w in range(u + 1, n2):
            m2 += a2[u, w]
    cdef cnp.int64_t[::1] e1_within = np.zeros(n1 + 1, dtype=np.int64)
    for d in range(n1):
        u = od[d]
        e1_within[d + 1] = e1_within[d]
        for j in range(d):
            e1_within[d + 1] += a1[od[j], u]

    if width > 0:
        value, maps, _ = _run(a1, a2, l1, l2, od, cs, e1_within, m1, m2, width, INFINITY, False, max_states)
        return value, _by_node(maps, od, n1), False
    ub, _, _ = _run(a1, a2, l1, l2, od, cs, e1_within, m1, m2, 1, INFINITY, False, max_states)
    value, maps, exhaustive = _run(a1, a2, l1, l2, od, cs, e1_within, m1, m2, 0, ub, True, max_states)
    return value, _by_node(maps, od, n1), exhaustive


cdef _by_node(maps, cnp.int64_t[::1] od, Py_ssize_t n1):
    mapping = np.full(n1, -1, dtype=np.int64)
    for d in range(n1):
        mapping[od[d]] = maps[d]
    return mapping


cdef _run(unsigned char[:, ::1] a1, unsigned char[:, ::1] a2,
          cnp.int64_t[::1] l1, cnp.int64_t[::1] l2, cnp.int64_t[::1] od,
          double[::1] cs, cnp.int64_t[::1] e1_within, Py_ssize_t m1, Py_ssize_t m2,
          Py_ssize_t keep, double bound, bint use_bound, Py_ssize_t max_states):
    cdef double node_ins = cs[0], node_del = cs[1], node_rel = cs[2], edge_ins = cs[3], edge_del = cs[4]
    cdef Py_ssize_t n1 = a1.shape[0], n2 = a2.shape[0]
    cdef Py_ssize_t width = n1 if n1 > 0 else 1
    # level state: maps-by-depth, g, used count, g2 edges among used nodes
    lv_maps_arr = np.zeros((1, width), dtype=np.int64)
    lv_g_arr = np.zeros(1)
    lv_nu_arr = np.zeros(1, dtype=np.int64)
    lv_e2_arr = np.zeros(1, dtype=np.int64)
    cdef cnp.int64_t[:, ::1] lv_maps
    cdef double[::1] lv_g
    cdef cnp.int64_t[::1] lv_nu, lv_e2
    cdef cnp.int64_t[:, ::1] ch_maps
    cdef double[::1] ch_f, ch_g
    cdef cnp.int64_t[::1] ch_rank, ch_ci, ch_nu, ch_e2, ch_loc
    cdef cnp.int64_t[::1] deg1 = np.zeros(n1, dtype=np.int64)
    cdef cnp.int64_t[::1] deg2 = np.zeros(n2, dtype=np.int64)
    cdef unsigned char[::1] used = np.zeros(n2, dtype=np.uint8)
    cdef Py_ssize_t L, C, cap, d, r, ci, v, vj, j, u, r1, r2, nu, e2c, e1_rem, e2_rem, q, limit
    cdef int e1, e2
    cdef double g, inc, gc, h, f
    cdef bint exhaustive = True
    cdef Py_ssize_t nlev = 1
    for u in range(n1):
        for j in range(n1):
            deg1[u] += a1[u, j]
    for u in range(n2):
        for j in range(n2):
            deg2[u] += a2[u, j]
    for d in range(n1):
        lv_maps = lv_maps_arr
        lv_g = lv_g_arr
        lv_nu = lv_nu_arr
        lv_e2 = lv_e2_arr
        L = nlev
        cap = L * (n2 + 1)
        ch_maps_arr = np.empty((cap, width), dtype=np.int64)
        ch_f_arr = np.empty(cap)
        ch_g_arr = np.empty(cap)
        ch_rank_arr = np.empty(cap, dtype=np.int64)
        ch_ci_arr = np.empty(cap, dtype=np.int64)
        ch_nu_arr = np.empty(cap, dtype=np.int64)
        ch_e2_arr = np.empty(cap, dtype=np.int64)
        ch_loc_arr = np.empty(cap, dtype=np.int64)
        ch_loc = ch_loc_arr
        ch_maps = ch_maps_arr
        ch_f = ch_f_arr
        ch_g = ch_g_arr
        ch_rank = ch_rank_arr
        ch_ci = ch_ci_arr
        ch_nu = ch_nu_arr
        ch_e2 = ch_e2_arr
        u = od[d]
        r1 = n1 - d - 1
        e1_rem = m1 - e1_within[d + 1]
        C = 0
        for r in range(L):
            g = lv_g[r]
            for j in range(n2):
                used[j] = 0
            for j in range(d):
                if lv_maps[r, j] >= 0:
                    used[lv_maps[r, j]] = 1
            for ci in range(n2 + 1):
                v = ci if ci < n2 else -1
                if v >= 0 and used[v]:
                    continue
                if v < 0:
                    inc = node_del
                else:
                    inc = node_rel if l1[u] != l2[v] else 0.0
                e2c = lv_e2[r]
                for j in range(d):
                    vj = lv_maps[r, j]
                    e1 = a1[u, od[j]]
                    e2 = 0
                    if v >= 0 and vj >= 0:
                        e2 = a2[vj, v]
                        e2c += e2
                    if e1 != e2:
                        inc += edge_del if e1 else edge_ins
                gc = g + inc
                nu = lv_nu[r] + (1 if v >= 0 else 0)
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
                if use_bound and f > bound + 1e-9:
                    continue
                ch_f[C] = f
                ch_g[C] = gc
                ch_rank[C] = r
                ch_ci[C] = ci
                ch_nu[C] = nu
                ch_e2[C] = e2c
                if v >= 0:
                    ch_loc[C] = deg1[u] - deg2[v] if deg1[u] >= deg2[v] else deg2[v] - deg1[u]
                else:
                    ch_loc[C] = deg1[u]
                for j in range(d):
                    ch_maps[C, j] = lv_maps[r, j]
                ch_maps[C, d] = v
                C += 1
        idx = np.lexsort((ch_ci_arr[:C], ch_rank_arr[:C], ch_loc_arr[:C], ch_g_arr[:C], ch_f_arr[:C]))
        limit = keep if keep > 0 else max_states
        if C > limit:
            if keep <= 0:
                exhaustive = False
            idx = idx[:limit]
        lv_maps_arr = ch_maps_arr[idx]
        lv_g_arr = ch_g_arr[idx]
        lv_nu_arr = ch_nu_arr[idx]
        lv_e2_arr = ch_e2_arr[idx]
        nlev = idx.shape[0]
    return float(lv_g_arr[0]), lv_maps_arr[0].tolist(), exhaustive
