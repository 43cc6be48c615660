"""Loop kernels compiled with numba.

All functions work on the flat CSR/CSC arrays of :class:`hfrobust.graph.Topology`
plus the three mutable state vectors (``alive``, ``scale``, ``degr``).  Node
indices are positions in ascending-id order, so "ascending index" and
"ascending id" tie-breaks coincide.
"""

import numpy as np
from numba import njit

from ._constants import (BETWEENNESS, DAMPING, EIGENVECTOR, IN_DEGREE, MAX_PASSES, MAX_POWER_ITER,
                         OUT_DEGREE, PAGERANK, POWER_TOL, QUANT, TOL, WOD)


@njit(cache=True, nogil=True)
def _in_weight(i, in_ptr, in_idx, in_w, alive, scale):
    total = 0.0
    for k in range(in_ptr[i], in_ptr[i + 1]):
        p = in_idx[k]
        if alive[p]:
            total += in_w[k] * scale[p]
    return total


@njit(cache=True, nogil=True)
def _live_out_sum(i, out_ptr, out_idx, out_w, alive):
    total = 0.0
    for k in range(out_ptr[i], out_ptr[i + 1]):
        if alive[out_idx[k]]:
            total += out_w[k]
    return total


@njit(cache=True, nogil=True)
def descendants(src, out_ptr, out_idx, alive):
    """BFS from ``src``; returns (order, reaches_src).  Each level is sorted."""
    n = alive.shape[0]
    seen = np.zeros(n, np.bool_)
    order = np.empty(n, np.int64)
    cur = np.empty(n, np.int64)
    seen[src] = True
    cur[0] = src
    ncur = 1
    tail = 0
    loops = False
    while ncur > 0:
        start = tail
        for a in range(ncur):
            u = cur[a]
            for k in range(out_ptr[u], out_ptr[u + 1]):
                v = out_idx[k]
                if not alive[v]:
                    continue
                if v == src:
                    loops = True
                elif not seen[v]:
                    seen[v] = True
                    order[tail] = v
                    tail += 1
        if tail > start:
            order[start:tail] = np.sort(order[start:tail])
        ncur = tail - start
        cur[:ncur] = order[start:tail]
    return order[:tail].copy(), loops


@njit(cache=True, nogil=True)
def cascade(att, remove_attacked, out_ptr, out_idx, out_w, in_ptr, in_idx, in_w,
            in0, out0, qof, alive, scale, degr, removed_out):
    """Degrade/remove the descendants of ``att`` until nothing changes.

    Writes removed indices (BFS order, ``att`` excluded) to ``removed_out`` and
    returns their count.
    """
    order, loops = descendants(att, out_ptr, out_idx, alive)
    if remove_attacked:
        alive[att] = False
    nproc = order.shape[0]
    if loops and alive[att]:
        proc = np.empty(nproc + 1, np.int64)
        proc[:nproc] = order
        proc[nproc] = att
        nproc += 1
    else:
        proc = order
    was_alive = np.empty(nproc, np.bool_)
    for j in range(nproc):
        was_alive[j] = alive[proc[j]]

    passes = 0
    while True:
        changed = False
        for j in range(nproc):
            d = proc[j]
            if not alive[d]:
                continue
            inw = _in_weight(d, in_ptr, in_idx, in_w, alive, scale)
            ratio = inw / in0[d] if in0[d] > 0.0 else 1.0
            h = 1.0 - degr[d]
            if h < 0.0:
                h = 0.0
            new = ratio * h
            if abs(new - scale[d]) > TOL:
                changed = True
            scale[d] = new
            dead = in0[d] > 0.0 and inw <= 0.0
            if not dead and out0[d] > 0.0:
                outw = new * _live_out_sum(d, out_ptr, out_idx, out_w, alive)
                dead = outw < qof[d] * out0[d]
            if dead:
                alive[d] = False
                changed = True
        passes += 1
        if not changed or passes >= MAX_PASSES:
            break

    k = 0
    for j in range(nproc):
        d = proc[j]
        if d != att and was_alive[j] and not alive[d]:
            removed_out[k] = d
            k += 1
    return k


@njit(cache=True, nogil=True)
def _find(parent, x):
    while parent[x] != x:
        parent[x] = parent[parent[x]]
        x = parent[x]
    return x


@njit(cache=True, nogil=True)
def component_sizes(out_ptr, out_idx, alive):
    """Sizes of weakly connected components among alive nodes (edge direction ignored)."""
    n = alive.shape[0]
    parent = np.arange(n)
    for u in range(n):
        if not alive[u]:
            continue
        for k in range(out_ptr[u], out_ptr[u + 1]):
            v = out_idx[k]
            if alive[v]:
                ru = _find(parent, u)
                rv = _find(parent, v)
                if ru != rv:
                    if ru < rv:
                        parent[rv] = ru
                    else:
                        parent[ru] = rv
    counts = np.zeros(n, np.int64)
    for u in range(n):
        if alive[u]:
            counts[_find(parent, u)] += 1
    m = 0
    for u in range(n):
        if counts[u] > 0:
            m += 1
    sizes = np.empty(m, np.int64)
    m = 0
    for u in range(n):
        if counts[u] > 0:
            sizes[m] = counts[u]
            m += 1
    return sizes


@njit(cache=True, nogil=True)
def snapshot(out_ptr, out_idx, out_w, total_out0, alive, scale, out):
    """Fill ``out`` with (lcc, ncc, fr, sr)."""
    n = alive.shape[0]
    sizes = component_sizes(out_ptr, out_idx, alive)
    lcc = 0
    pairs = 0
    nalive = 0
    for s in sizes:
        if s > lcc:
            lcc = s
        pairs += s * (s - 1)
        nalive += s
    if n >= 2:
        fr = pairs / (n * (n - 1))
    else:
        fr = 1.0 if nalive == n and n > 0 else 0.0
    if total_out0 > 0.0:
        q = 0.0
        for i in range(n):
            if alive[i]:
                q += scale[i] * _live_out_sum(i, out_ptr, out_idx, out_w, alive)
        sr = q / total_out0
    else:
        sr = 1.0 if nalive > 0 else 0.0
    out[0] = lcc
    out[1] = sizes.shape[0]
    out[2] = fr
    out[3] = sr


@njit(cache=True, nogil=True)
def _betweenness(out_ptr, out_idx, in_ptr, in_idx, alive):
    n = alive.shape[0]
    bc = np.zeros(n)
    sigma = np.empty(n)
    delta = np.empty(n)
    dist = np.empty(n, np.int64)
    queue = np.empty(n, np.int64)
    for s in range(n):
        if not alive[s]:
            continue
        sigma[:] = 0.0
        delta[:] = 0.0
        dist[:] = -1
        sigma[s] = 1.0
        dist[s] = 0
        queue[0] = s
        qh = 0
        qt = 1
        while qh < qt:
            v = queue[qh]
            qh += 1
            for k in range(out_ptr[v], out_ptr[v + 1]):
                w = out_idx[k]
                if not alive[w]:
                    continue
                if dist[w] < 0:
                    dist[w] = dist[v] + 1
                    queue[qt] = w
                    qt += 1
                if dist[w] == dist[v] + 1:
                    sigma[w] += sigma[v]
        # queue holds nodes in non-decreasing distance; walk it backwards
        for q in range(qt - 1, 0, -1):
            w = queue[q]
            coef = (1.0 + delta[w]) / sigma[w]
            for k in range(in_ptr[w], in_ptr[w + 1]):
                v = in_idx[k]
                if alive[v] and dist[v] >= 0 and dist[v] == dist[w] - 1:
                    delta[v] += sigma[v] * coef
            bc[w] += delta[w]
    return bc


@njit(cache=True, nogil=True)
def _eigenvector(out_ptr, out_idx, out_w, alive, scale):
    n = alive.shape[0]
    m = 0
    for i in range(n):
        if alive[i]:
            m += 1
    x = np.zeros(n)
    if m == 0:
        return x, True
    for i in range(n):
        if alive[i]:
            x[i] = 1.0 / m
    for _ in range(MAX_POWER_ITER):
        xlast = x.copy()
        for u in range(n):
            if not alive[u]:
                continue
            for k in range(out_ptr[u], out_ptr[u + 1]):
                v = out_idx[k]
                if alive[v]:
                    x[v] += xlast[u] * out_w[k] * scale[u]
        norm = np.sqrt(np.sum(x * x))
        if norm == 0.0:
            norm = 1.0
        x /= norm
        if np.sum(np.abs(x - xlast)) < POWER_TOL:
            return x, True
    return x, False


@njit(cache=True, nogil=True)
def _pagerank(out_ptr, out_idx, out_w, alive, scale):
    n = alive.shape[0]
    m = 0
    for i in range(n):
        if alive[i]:
            m += 1
    x = np.zeros(n)
    if m == 0:
        return x, True
    wout = np.zeros(n)
    for u in range(n):
        if alive[u]:
            wout[u] = scale[u] * _live_out_sum(u, out_ptr, out_idx, out_w, alive)
            x[u] = 1.0 / m
    for _ in range(MAX_POWER_ITER):
        xlast = x
        x = np.zeros(n)
        dangling = 0.0
        for u in range(n):
            if not alive[u]:
                continue
            if wout[u] <= 0.0:
                dangling += xlast[u]
                continue
            for k in range(out_ptr[u], out_ptr[u + 1]):
                v = out_idx[k]
                if alive[v]:
                    x[v] += DAMPING * xlast[u] * out_w[k] * scale[u] / wout[u]
        base = (DAMPING * dangling + (1.0 - DAMPING)) / m
        for i in range(n):
            if alive[i]:
                x[i] += base
        if np.sum(np.abs(x - xlast)) < POWER_TOL:
            return x, True
    return x, False


@njit(cache=True, nogil=True)
def centrality(code, out_ptr, out_idx, out_w, in_ptr, in_idx, alive, scale):
    """Scores for basis ``code`` on the residual graph; dead nodes score 0."""
    n = alive.shape[0]
    if code == BETWEENNESS:
        return _betweenness(out_ptr, out_idx, in_ptr, in_idx, alive), True
    if code == EIGENVECTOR:
        return _eigenvector(out_ptr, out_idx, out_w, alive, scale)
    if code == PAGERANK:
        return _pagerank(out_ptr, out_idx, out_w, alive, scale)
    scores = np.zeros(n)
    for u in range(n):
        if not alive[u]:
            continue
        if code == WOD:
            scores[u] = scale[u] * _live_out_sum(u, out_ptr, out_idx, out_w, alive)
            continue
        if code != IN_DEGREE:
            for k in range(out_ptr[u], out_ptr[u + 1]):
                if alive[out_idx[k]]:
                    scores[u] += 1.0
        if code != OUT_DEGREE:
            for k in range(in_ptr[u], in_ptr[u + 1]):
                if alive[in_idx[k]]:
                    scores[u] += 1.0
    return scores, True


@njit(cache=True, nogil=True)
def best_alive(scores, alive):
    """Index of the highest score among alive nodes, lowest index on ties."""
    best = -1
    bq = 0.0
    for i in range(alive.shape[0]):
        if not alive[i]:
            continue
        q = np.rint(scores[i] * QUANT)
        if best < 0 or q > bq:
            best = i
            bq = q
    return best


@njit(cache=True, nogil=True)
def run(out_ptr, out_idx, out_w, in_ptr, in_idx, in_w, in0, out0, qof, accept, total_out0,
        alive, scale, degr, hits,
        partial, fixed_step, step, steps,
        select_mode, ranking, basis, uniforms,
        stop_at, max_stages,
        metrics, attacked, removed_stage, removal_order):
    """Staged attack loop.  Returns (stages, removals, status); status 1 = centrality failed."""
    n = alive.shape[0]
    nalive = 0
    for i in range(n):
        if alive[i]:
            nalive += 1
    buf = np.empty(n, np.int64)
    snapshot(out_ptr, out_idx, out_w, total_out0, alive, scale, metrics[0])
    stage = 0
    nrem = 0
    rp = 0
    while nalive > stop_at and stage < max_stages:
        if select_mode == 0:
            pick = int(uniforms[stage] * nalive)
            if pick >= nalive:
                pick = nalive - 1
            v = -1
            for i in range(n):
                if alive[i]:
                    if pick == 0:
                        v = i
                        break
                    pick -= 1
        elif select_mode == 1:
            while not alive[ranking[rp]]:
                rp += 1
            v = ranking[rp]
        else:
            scores, ok = centrality(basis, out_ptr, out_idx, out_w, in_ptr, in_idx, alive, scale)
            if not ok:
                return stage, nrem, 1
            v = best_alive(scores, alive)
        attacked[stage] = v
        stage += 1

        if partial:
            hits[v] += 1
            if fixed_step:
                degr[v] = hits[v] * step
            else:
                degr[v] += steps[stage - 1]
            h = 1.0 - degr[v]
            if h < 0.0:
                h = 0.0
            inw = _in_weight(v, in_ptr, in_idx, in_w, alive, scale)
            ratio = inw / in0[v] if in0[v] > 0.0 else 1.0
            scale[v] = ratio * h
            outw = scale[v] * _live_out_sum(v, out_ptr, out_idx, out_w, alive)
            kill = h <= 0.0 or (out0[v] > 0.0 and outw < accept[v] * out0[v])
        else:
            kill = True
        if kill:
            removed_stage[v] = stage
            removal_order[nrem] = v
            nrem += 1
            nalive -= 1
        k = cascade(v, kill, out_ptr, out_idx, out_w, in_ptr, in_idx, in_w,
                    in0, out0, qof, alive, scale, degr, buf)
        if not kill and not alive[v]:
            removed_stage[v] = stage
            removal_order[nrem] = v
            nrem += 1
            nalive -= 1
        for j in range(k):
            removed_stage[buf[j]] = stage
            removal_order[nrem] = buf[j]
            nrem += 1
        nalive -= k
        snapshot(out_ptr, out_idx, out_w, total_out0, alive, scale, metrics[stage])
    return stage, nrem, 0


@njit(cache=True, nogil=True)
def run_many(out_ptr, out_idx, out_w, in_ptr, in_idx, in_w, in0, out0, qof, accept, total_out0,
             partial, fixed_step, step, steps2d,
             select_mode, ranking, basis, uniforms2d,
             stop_at, max_stages, metrics3d, lengths, status):
    """Run one independent attack per row of ``uniforms2d`` from the intact state."""
    n = in0.shape[0]
    trials = uniforms2d.shape[0]
    attacked = np.empty(max_stages, np.int64)
    removed_stage = np.empty(n, np.int64)
    removal_order = np.empty(n, np.int64)
    for t in range(trials):
        alive = np.ones(n, np.bool_)
        scale = np.ones(n)
        degr = np.zeros(n)
        hits = np.zeros(n, np.int64)
        removed_stage[:] = -1
        stages, _, st = run(out_ptr, out_idx, out_w, in_ptr, in_idx, in_w, in0, out0, qof, accept,
                            total_out0, alive, scale, degr, hits,
                            partial, fixed_step, step, steps2d[t],
                            select_mode, ranking, basis, uniforms2d[t],
                            stop_at, max_stages,
                            metrics3d[t], attacked, removed_stage, removal_order)
        lengths[t] = stages
        status[t] = st
