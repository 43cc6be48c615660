"""Pure-numpy fallback kernels.

These mirror the numba kernels but are written array-at-a-time: dense adjacency
masks instead of CSR walks, simultaneous (Jacobi) cascade sweeps instead of
in-place ones, label propagation instead of union-find.  Both converge to the
same cascade fixed point, so the two backends double as cross-checks.
"""

import numpy as np

from ._constants import (BETWEENNESS, DAMPING, DEGREE, EIGENVECTOR, IN_DEGREE, MAX_PASSES,
                            MAX_POWER_ITER, OUT_DEGREE, PAGERANK, POWER_TOL, QUANT, TOL, WOD)


def _live_out_sums(topo, alive):
    # rows of w0t are children; summing over axis 0 walks them in ascending order
    return (topo.w0t * alive[:, None]).sum(axis=0)


def _in_weights(topo, alive, scale):
    eff = np.where(alive, scale, 0.0)
    return (topo.w0 * eff[:, None]).sum(axis=0)


def descendants(topo, alive, src):
    seen = np.zeros(topo.n, dtype=bool)
    seen[src] = True
    frontier = np.array([src])
    levels = []
    loops = False
    while frontier.size:
        reach = topo.adj[frontier].any(axis=0) & alive
        loops = loops or bool(reach[src])
        fresh = np.flatnonzero(reach & ~seen)
        seen[fresh] = True
        if fresh.size:
            levels.append(fresh)
        frontier = fresh
    order = np.concatenate(levels) if levels else np.empty(0, dtype=np.int64)
    return order.astype(np.int64), loops


def cascade(topo, qof, alive, scale, degr, att, remove_attacked):
    order, loops = descendants(topo, alive, att)
    if remove_attacked:
        alive[att] = False
    proc = order
    if loops and alive[att]:
        proc = np.append(order, att)
    mask = np.zeros(topo.n, dtype=bool)
    mask[proc] = True
    was = alive.copy()
    hit = np.clip(1.0 - degr, 0.0, None)
    has_in = topo.in0 > 0.0
    safe_in0 = np.where(has_in, topo.in0, 1.0)
    for _ in range(MAX_PASSES):
        upd = mask & alive
        if not upd.any():
            break
        inw = _in_weights(topo, alive, scale)
        new = np.where(has_in, inw / safe_in0, 1.0) * hit
        outw = new * _live_out_sums(topo, alive)
        dead = upd & ((has_in & (inw <= 0.0)) | ((topo.out0 > 0.0) & (outw < qof * topo.out0)))
        change = float(np.abs(new[upd] - scale[upd]).max())
        scale[upd] = new[upd]
        alive[dead] = False
        if not dead.any() and change <= TOL:
            break
    keep = was[proc] & ~alive[proc] & (proc != att)
    return proc[keep]


def component_sizes(topo, alive):
    n = topo.n
    und = (topo.adj | topo.adj.T) & alive[:, None] & alive[None, :]
    if n == 0:
        return np.empty(0, dtype=np.int64)
    labels = np.where(alive, np.arange(n), n)
    while True:
        nbr = np.where(und, labels[None, :], n).min(axis=1)
        new = np.where(alive, np.minimum(labels, nbr), n)
        if np.array_equal(new, labels):
            break
        labels = new
    counts = np.bincount(labels[alive], minlength=n)
    return counts[counts > 0].astype(np.int64)


def snapshot(topo, alive, scale):
    n = topo.n
    sizes = component_sizes(topo, alive)
    lcc = int(sizes.max()) if sizes.size else 0
    pairs = int((sizes * (sizes - 1)).sum())
    nalive = int(sizes.sum())
    if n >= 2:
        fr = pairs / (n * (n - 1))
    else:
        fr = 1.0 if nalive == n and n > 0 else 0.0
    if topo.total_out0 > 0.0:
        q = np.where(alive, scale * _live_out_sums(topo, alive), 0.0)
        sr = float(q.sum()) / topo.total_out0
    else:
        sr = 1.0 if nalive > 0 else 0.0
    return lcc, int(sizes.size), fr, sr


def _betweenness(topo, alive):
    n = topo.n
    adj = topo.adj & alive[:, None] & alive[None, :]
    bc = np.zeros(n)
    for s in np.flatnonzero(alive):
        dist = np.full(n, -1)
        sigma = np.zeros(n)
        dist[s] = 0
        sigma[s] = 1.0
        levels = [np.array([s])]
        while True:
            prev = levels[-1]
            nxt = np.flatnonzero(adj[prev].any(axis=0) & (dist < 0))
            if not nxt.size:
                break
            dist[nxt] = len(levels)
            sigma[nxt] = sigma[prev] @ adj[np.ix_(prev, nxt)]
            levels.append(nxt)
        delta = np.zeros(n)
        for d in range(len(levels) - 1, 0, -1):
            cur, prev = levels[d], levels[d - 1]
            coef = (1.0 + delta[cur]) / sigma[cur]
            delta[prev] += sigma[prev] * (adj[np.ix_(prev, cur)] @ coef)
        delta[s] = 0.0
        bc += delta
    return bc


def _weighted_adj(topo, alive, scale):
    live = alive[:, None] & alive[None, :]
    return np.where(live, topo.w0 * scale[:, None], 0.0)


def _eigenvector(topo, alive, scale):
    m = int(alive.sum())
    x = np.zeros(topo.n)
    if m == 0:
        return x, True
    a = _weighted_adj(topo, alive, scale)
    x[alive] = 1.0 / m
    for _ in range(MAX_POWER_ITER):
        xlast = x
        x = xlast + a.T @ xlast
        norm = np.sqrt(np.sum(x * x)) or 1.0
        x = x / norm
        if np.abs(x - xlast).sum() < POWER_TOL:
            return x, True
    return x, False


def _pagerank(topo, alive, scale):
    m = int(alive.sum())
    x = np.zeros(topo.n)
    if m == 0:
        return x, True
    a = _weighted_adj(topo, alive, scale)
    wout = a.sum(axis=1)
    dangling = alive & (wout <= 0.0)
    p = np.divide(a, wout[:, None], out=np.zeros_like(a), where=wout[:, None] > 0.0)
    x[alive] = 1.0 / m
    for _ in range(MAX_POWER_ITER):
        xlast = x
        base = (DAMPING * xlast[dangling].sum() + (1.0 - DAMPING)) / m
        x = DAMPING * (xlast @ p) + np.where(alive, base, 0.0)
        if np.abs(x - xlast).sum() < POWER_TOL:
            return x, True
    return x, False


def centrality(topo, code, alive, scale):
    if code == BETWEENNESS:
        return _betweenness(topo, alive), True
    if code == EIGENVECTOR:
        return _eigenvector(topo, alive, scale)
    if code == PAGERANK:
        return _pagerank(topo, alive, scale)
    if code == WOD:
        return np.where(alive, scale * _live_out_sums(topo, alive), 0.0), True
    live = topo.adj & alive[:, None] & alive[None, :]
    outd = live.sum(axis=1).astype(float)
    ind = live.sum(axis=0).astype(float)
    scores = {DEGREE: outd + ind, IN_DEGREE: ind, OUT_DEGREE: outd}[code]
    return np.where(alive, scores, 0.0), True


def best_alive(scores, alive):
    idx = np.flatnonzero(alive)
    q = np.rint(scores[idx] * QUANT)
    return int(idx[np.argmax(q)])


def run(topo, p, alive, scale, degr, hits, steps, uniforms, max_stages,
        metrics, attacked, removed_stage, removal_order):
    nalive = int(alive.sum())
    metrics[0] = snapshot(topo, alive, scale)
    stage = nrem = rp = 0
    while nalive > p.stop_at and stage < max_stages:
        if p.select_mode == 0:
            idx = np.flatnonzero(alive)
            v = int(idx[min(int(uniforms[stage] * nalive), nalive - 1)])
        elif p.select_mode == 1:
            while not alive[p.ranking[rp]]:
                rp += 1
            v = int(p.ranking[rp])
        else:
            scores, ok = centrality(topo, p.basis, alive, scale)
            if not ok:
                return stage, nrem, 1
            v = best_alive(scores, alive)
        attacked[stage] = v
        stage += 1

        if p.partial:
            hits[v] += 1
            degr[v] = hits[v] * p.step if p.fixed_step else degr[v] + steps[stage - 1]
            h = max(0.0, 1.0 - degr[v])
            inw = _in_weights(topo, alive, scale)[v]
            ratio = inw / topo.in0[v] if topo.in0[v] > 0.0 else 1.0
            scale[v] = ratio * h
            outw = scale[v] * _live_out_sums(topo, alive)[v]
            kill = h <= 0.0 or (topo.out0[v] > 0.0 and outw < p.accept[v] * topo.out0[v])
        else:
            kill = True
        if kill:
            removed_stage[v] = stage
            removal_order[nrem] = v
            nrem += 1
            nalive -= 1
        removed = cascade(topo, p.qof, alive, scale, degr, v, kill)
        if not kill and not alive[v]:
            removed_stage[v] = stage
            removal_order[nrem] = v
            nrem += 1
            nalive -= 1
        for d in removed:
            removed_stage[d] = stage
            removal_order[nrem] = d
            nrem += 1
        nalive -= removed.size
        metrics[stage] = snapshot(topo, alive, scale)
    return stage, nrem, 0


def run_many(topo, p, steps2d, uniforms2d, max_stages, metrics3d, lengths, status):
    n = topo.n
    attacked = np.empty(max_stages, dtype=np.int64)
    removal_order = np.empty(n, dtype=np.int64)
    for t in range(uniforms2d.shape[0]):
        removed_stage = np.full(n, -1, dtype=np.int64)
        stages, _, st = run(topo, p, np.ones(n, dtype=bool), np.ones(n), np.zeros(n),
                            np.zeros(n, dtype=np.int64), steps2d[t], uniforms2d[t], max_stages,
                            metrics3d[t], attacked, removed_stage, removal_order)
        lengths[t] = stages
        status[t] = st
