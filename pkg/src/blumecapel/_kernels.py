"""Compiled inner loops: union-find, RC enumeration, MCMC sweeps, grid searches."""

import math

import numpy as np
from numba import njit

LOG2 = math.log(2.0)


@njit(cache=True, nogil=True)
def uf_find(parent, x):
    while parent[x] != x:
        parent[x] = parent[parent[x]]
        x = parent[x]
    return x


@njit(cache=True, nogil=True)
def uf_union(parent, size, a, b):
    ra = uf_find(parent, a)
    rb = uf_find(parent, b)
    if ra == rb:
        return False
    if size[ra] < size[rb]:
        ra, rb = rb, ra
    parent[rb] = ra
    size[ra] += size[rb]
    return True


# ---------------------------------------------------------------------------
# exact enumeration of dilute RC configurations
# ---------------------------------------------------------------------------

@njit(cache=True, nogil=True)
def _feasible(psi, n, open_b, eu, ev, forced, buf):
    m = 0
    for e in range(eu.shape[0]):
        if forced[e]:
            continue
        u = eu[e]
        v = ev[e]
        ou = (psi >> u) & 1
        if v < n:
            ov = (psi >> v) & 1
        else:
            ov = open_b[v - n]
        if ou == 1 and ov == 1:
            buf[m] = e
            m += 1
    return m


@njit(cache=True, nogil=True)
def _forced_lr(psi, n, open_b, eu, ev, forced, lr):
    """r-factors of forced-closed edges whose endpoints are open (conditioning)."""
    t = 0.0
    for e in range(eu.shape[0]):
        if not forced[e]:
            continue
        u = eu[e]
        v = ev[e]
        ov = ((psi >> v) & 1) if v < n else open_b[v - n]
        if ((psi >> u) & 1) == 1 and ov == 1:
            t += lr[e]
    return t


@njit(cache=True, nogil=True)
def rc_count(psi_lo, psi_hi, n, open_b, eu, ev, forced, a_one):
    """Number of (ψ, ω) configurations for each ψ in [psi_lo, psi_hi)."""
    out = np.zeros(psi_hi - psi_lo, dtype=np.int64)
    buf = np.empty(eu.shape[0], dtype=np.int64)
    full = (1 << n) - 1
    for psi in range(psi_lo, psi_hi):
        if a_one and psi != full:
            continue
        m = _feasible(psi, n, open_b, eu, ev, forced, buf)
        out[psi - psi_lo] = 1 << m
    return out


@njit(cache=True, nogil=True)
def _setup_parent(base, psi, n, nb, open_b, cls_b):
    nn = base.shape[0]
    for i in range(nn):
        base[i] = i
    for b in range(nb):
        if open_b[b] and cls_b[b] >= 0:
            base[n + b] = n + nb + cls_b[b]
    return base


@njit(cache=True, nogil=True)
def _config_stats(psi, mask, m, feas, n, nb, open_b, eu, ev, base, parent, size, lo, lr, la):
    nn = base.shape[0]
    for i in range(nn):
        parent[i] = base[i]
        size[i] = 1
    logw = 0.0
    om = 0
    for j in range(m):
        e = feas[j]
        logw += lr[e]
        if (mask >> j) & 1:
            om |= 1 << e
            logw += lo[e]
            uf_union(parent, size, eu[e], ev[e])
    cnt = 0
    for x in range(n):
        if (psi >> x) & 1:
            cnt += 1
    logw += la * cnt
    return logw, om


@njit(cache=True, nogil=True)
def _count_clusters(psi, n, nb, open_b, parent, seen):
    k = 0
    for i in range(seen.shape[0]):
        seen[i] = 0
    for x in range(n + nb):
        if x < n:
            op = (psi >> x) & 1
        else:
            op = open_b[x - n]
        if op:
            r = uf_find(parent, x)
            if seen[r] == 0:
                seen[r] = 1
                k += 1
    return k


@njit(cache=True, nogil=True)
def rc_dump(psi_lo, psi_hi, total, n, nb, open_b, cls_b, ncls, eu, ev, forced, lo, lr, la, a_one):
    """Enumerate all configurations with ψ in [psi_lo, psi_hi).

    Returns ψ masks, ω masks, log-weights, cluster counts and a component
    label for every real node (interior then boundary; -1 if closed).
    """
    nn = n + nb + ncls
    psis = np.empty(total, dtype=np.int64)
    oms = np.empty(total, dtype=np.int64)
    logws = np.empty(total, dtype=np.float64)
    ks = np.empty(total, dtype=np.int64)
    labels = np.empty((total, n + nb), dtype=np.int32)
    feas = np.empty(eu.shape[0], dtype=np.int64)
    base = np.empty(nn, dtype=np.int64)
    parent = np.empty(nn, dtype=np.int64)
    size = np.empty(nn, dtype=np.int64)
    seen = np.empty(nn, dtype=np.int64)
    first = np.empty(nn, dtype=np.int64)
    full = (1 << n) - 1
    t = 0
    for psi in range(psi_lo, psi_hi):
        if a_one and psi != full:
            continue
        m = _feasible(psi, n, open_b, eu, ev, forced, feas)
        _setup_parent(base, psi, n, nb, open_b, cls_b)
        flr = _forced_lr(psi, n, open_b, eu, ev, forced, lr)
        for mask in range(1 << m):
            logw, om = _config_stats(psi, mask, m, feas, n, nb, open_b, eu, ev, base, parent,
                                     size, lo, lr, la)
            logw += flr
            k = _count_clusters(psi, n, nb, open_b, parent, seen)
            for i in range(nn):
                first[i] = -1
            for x in range(n + nb):
                if x < n:
                    op = (psi >> x) & 1
                else:
                    op = open_b[x - n]
                if op:
                    r = uf_find(parent, x)
                    if first[r] < 0:
                        first[r] = x
                    labels[t, x] = first[r]
                else:
                    labels[t, x] = -1
            psis[t] = psi
            oms[t] = om
            logws[t] = logw + k * LOG2
            ks[t] = k
            t += 1
    return psis, oms, logws, ks, labels


@njit(cache=True, nogil=True)
def rc_moments(psi_lo, psi_hi, n, nb, open_b, cls_b, ncls, eu, ev, forced, lo, lr, la, a_one,
               shift, src_masks, tgt_masks):
    """Streaming sums for connection events S_j <-> T_j.

    Returns Z, Σw·1_j, Σw·η_d and Σw·1_j·η_d where d runs over interior
    vertices then edge variables. Weights are exp(logw - shift).
    """
    ne = eu.shape[0]
    nd = n + ne
    nev = src_masks.shape[0]
    nn = n + nb + ncls
    Z = 0.0
    acc_ev = np.zeros(nev)
    acc_eta = np.zeros(nd)
    acc_ev_eta = np.zeros((nev, nd))
    feas = np.empty(ne, dtype=np.int64)
    base = np.empty(nn, dtype=np.int64)
    parent = np.empty(nn, dtype=np.int64)
    size = np.empty(nn, dtype=np.int64)
    seen = np.empty(nn, dtype=np.int64)
    roots = np.empty(n + nb, dtype=np.int64)
    hit = np.empty(nev, dtype=np.uint8)
    full = (1 << n) - 1
    for psi in range(psi_lo, psi_hi):
        if a_one and psi != full:
            continue
        m = _feasible(psi, n, open_b, eu, ev, forced, feas)
        _setup_parent(base, psi, n, nb, open_b, cls_b)
        flr = _forced_lr(psi, n, open_b, eu, ev, forced, lr)
        for mask in range(1 << m):
            logw, om = _config_stats(psi, mask, m, feas, n, nb, open_b, eu, ev, base, parent,
                                     size, lo, lr, la)
            logw += flr
            k = _count_clusters(psi, n, nb, open_b, parent, seen)
            w = math.exp(logw + k * LOG2 - shift)
            Z += w
            for x in range(n + nb):
                if x < n:
                    op = (psi >> x) & 1
                else:
                    op = open_b[x - n]
                roots[x] = uf_find(parent, x) if op else -1
            for j in range(nev):
                hit[j] = 0
                for s in range(n + nb):
                    if (src_masks[j] >> s) & 1 and roots[s] >= 0:
                        for t2 in range(n + nb):
                            if (tgt_masks[j] >> t2) & 1 and roots[t2] == roots[s]:
                                hit[j] = 1
                                break
                    if hit[j]:
                        break
                if hit[j]:
                    acc_ev[j] += w
            for x in range(n):
                if (psi >> x) & 1:
                    acc_eta[x] += w
                    for j in range(nev):
                        if hit[j]:
                            acc_ev_eta[j, x] += w
            for e in range(ne):
                if (om >> e) & 1:
                    acc_eta[n + e] += w
                    for j in range(nev):
                        if hit[j]:
                            acc_ev_eta[j, n + e] += w
    return Z, acc_ev, acc_eta, acc_ev_eta


@njit(cache=True, nogil=True)
def rc_marginal(psi_lo, psi_hi, n, nb, open_b, cls_b, ncls, eu, ev, forced, lo, lr, la, a_one,
                shift, keep_edges):
    """Weights summed onto the key ψ | (ω restricted to edges < keep_edges) << n."""
    ne = eu.shape[0]
    nn = n + nb + ncls
    out = np.zeros(1 << (n + keep_edges))
    feas = np.empty(ne, dtype=np.int64)
    base = np.empty(nn, dtype=np.int64)
    parent = np.empty(nn, dtype=np.int64)
    size = np.empty(nn, dtype=np.int64)
    seen = np.empty(nn, dtype=np.int64)
    kmask = (1 << keep_edges) - 1
    full = (1 << n) - 1
    for psi in range(psi_lo, psi_hi):
        if a_one and psi != full:
            continue
        m = _feasible(psi, n, open_b, eu, ev, forced, feas)
        _setup_parent(base, psi, n, nb, open_b, cls_b)
        flr = _forced_lr(psi, n, open_b, eu, ev, forced, lr)
        for mask in range(1 << m):
            logw, om = _config_stats(psi, mask, m, feas, n, nb, open_b, eu, ev, base, parent,
                                     size, lo, lr, la)
            logw += flr
            k = _count_clusters(psi, n, nb, open_b, parent, seen)
            key = psi | ((om & kmask) << n)
            out[key] += math.exp(logw + k * LOG2 - shift)
    return out


# ---------------------------------------------------------------------------
# spin dynamics
# ---------------------------------------------------------------------------

@njit(cache=True, nogil=True)
def heatbath_sweep(spins, ptr, idx, bfield, beta, delta, ising, rng):
    """One lexicographic heat-bath pass over all sites."""
    n = spins.shape[0]
    for x in range(n):
        h = bfield[x]
        for j in range(ptr[x], ptr[x + 1]):
            h += beta * spins[idx[j]]
        u = rng.random()
        if ising:
            # P(+1) = 1 / (1 + e^{-2h})
            if h >= 0:
                pp = 1.0 / (1.0 + math.exp(-2.0 * h))
            else:
                t = math.exp(2.0 * h)
                pp = t / (1.0 + t)
            spins[x] = 1 if u < pp else -1
        else:
            ah = abs(h)
            top = delta + ah
            if top < 0.0:
                top = 0.0
            wp = math.exp(delta + h - top)
            wm = math.exp(delta - h - top)
            w0 = math.exp(-top)
            s = wp + wm + w0
            u *= s
            if u < wp:
                spins[x] = 1
            elif u < wp + wm:
                spins[x] = -1
            else:
                spins[x] = 0


@njit(cache=True, nogil=True)
def es_sweep(spins, eu, ev, pe, bx, beta_eta, bp, rng, parent, size, om_int, om_bnd, sign_buf):
    """Edwards-Sokal move: bonds given spins, then resign free clusters.

    Node n is the plus boundary class, node n + 1 the minus class.
    """
    n = spins.shape[0]
    for i in range(n + 2):
        parent[i] = i
        size[i] = 1
    for e in range(eu.shape[0]):
        u = eu[e]
        v = ev[e]
        om_int[e] = 0
        if spins[u] != 0 and spins[u] == spins[v]:
            if rng.random() < pe[e]:
                om_int[e] = 1
                uf_union(parent, size, u, v)
    for j in range(bx.shape[0]):
        x = bx[j]
        om_bnd[j] = 0
        eta = beta_eta[j]
        if eta != 0 and spins[x] == eta:
            if rng.random() < bp[j]:
                om_bnd[j] = 1
                uf_union(parent, size, x, n if eta > 0 else n + 1)
    rp = uf_find(parent, n)
    rm = uf_find(parent, n + 1)
    for i in range(n + 2):
        sign_buf[i] = 0
    sign_buf[rp] = 1
    sign_buf[rm] = -1
    for x in range(n):
        if spins[x] == 0:
            continue
        r = uf_find(parent, x)
        if sign_buf[r] == 0:
            sign_buf[r] = 1 if rng.random() < 0.5 else -1
        spins[x] = sign_buf[r]


@njit(cache=True, nogil=True)
def hybrid_run(spins, ptr, idx, bfield, beta, delta, ising, eu, ev, pe, bx, beta_eta, bp, rng,
               parent, size, om_int, om_bnd, sign_buf, n_steps):
    for _ in range(n_steps):
        heatbath_sweep(spins, ptr, idx, bfield, beta, delta, ising, rng)
        es_sweep(spins, eu, ev, pe, bx, beta_eta, bp, rng, parent, size, om_int, om_bnd, sign_buf)


@njit(cache=True, nogil=True)
def finalize_roots(parent, roots):
    for i in range(parent.shape[0]):
        roots[i] = uf_find(parent, i)


# ---------------------------------------------------------------------------
# single-coordinate heat-bath for the (generalized) dilute RC measure
# ---------------------------------------------------------------------------

@njit(cache=True, nogil=True)
def _connected(a, b, ptr, adj, adj_e, omega, psi_all, markA, markB, qA, qB, stamp):
    """Bidirectional search between nodes a and b through open edges.

    adj_e < 0 denotes an always-open wiring link.
    """
    if a == b:
        return True
    markA[a] = stamp
    markB[b] = stamp
    ha = 0
    ta = 1
    hb = 0
    tb = 1
    qA[0] = a
    qB[0] = b
    while ha < ta and hb < tb:
        if ta - ha <= tb - hb:
            x = qA[ha]
            ha += 1
            for j in range(ptr[x], ptr[x + 1]):
                e = adj_e[j]
                if e >= 0 and omega[e] == 0:
                    continue
                y = adj[j]
                if psi_all[y] == 0:
                    continue
                if markB[y] == stamp:
                    return True
                if markA[y] != stamp:
                    markA[y] = stamp
                    qA[ta] = y
                    ta += 1
        else:
            x = qB[hb]
            hb += 1
            for j in range(ptr[x], ptr[x + 1]):
                e = adj_e[j]
                if e >= 0 and omega[e] == 0:
                    continue
                y = adj[j]
                if psi_all[y] == 0:
                    continue
                if markA[y] == stamp:
                    return True
                if markB[y] != stamp:
                    markB[y] = stamp
                    qB[tb] = y
                    tb += 1
    return False


@njit(cache=True, nogil=True)
def rc_glauber(psi_all, omega, n, eu, ev, lo, lr, forced, la, vptr, vinc, ptr, adj, adj_e,
               markA, markB, qA, qB, stamp0, rng, n_sweeps, update_vertices):
    """Heat-bath on every vertex then every edge, n_sweeps times.

    psi_all covers interior, boundary and class nodes (the latter always 1).
    """
    stamp = stamp0
    ne = eu.shape[0]
    for _ in range(n_sweeps):
        if update_vertices:
            for x in range(n):
                busy = False
                lw = la + LOG2
                for j in range(vptr[x], vptr[x + 1]):
                    e = vinc[j]
                    if omega[e]:
                        busy = True
                        break
                    y = eu[e] if ev[e] == x else ev[e]
                    if psi_all[y]:
                        lw += lr[e]
                u = rng.random()
                if busy:
                    continue
                if lw >= 0:
                    p1 = 1.0 / (1.0 + math.exp(-lw))
                else:
                    t = math.exp(lw)
                    p1 = t / (1.0 + t)
                psi_all[x] = 1 if u < p1 else 0
        for e in range(ne):
            u = rng.random()
            if forced[e] or psi_all[eu[e]] == 0 or psi_all[ev[e]] == 0:
                continue
            omega[e] = 0
            stamp += 1
            if _connected(eu[e], ev[e], ptr, adj, adj_e, omega, psi_all, markA, markB, qA, qB,
                          stamp):
                lw = lo[e]
            else:
                lw = lo[e] - LOG2
            if lw >= 0:
                p1 = 1.0 / (1.0 + math.exp(-lw))
            else:
                t = math.exp(lw)
                p1 = t / (1.0 + t)
            omega[e] = 1 if u < p1 else 0
    return stamp


# ---------------------------------------------------------------------------
# grid searches for crossings and circuits
# ---------------------------------------------------------------------------

@njit(cache=True, nogil=True)
def grid_reach(omega, hidx, vidx, x0, x1, y0, y1, src, tgt, mark, queue):
    """Open-edge search inside the grid window [x0,x1]x[y0,y1] from src to tgt.

    hidx[x, y] is the edge variable of {(x,y),(x+1,y)} (or -1) and vidx[x, y]
    that of {(x,y),(x,y+1)}; an edge variable of -2 counts as always open.
    """
    W = hidx.shape[0]
    H = hidx.shape[1]
    for x in range(x0, x1 + 1):
        for y in range(y0, y1 + 1):
            mark[x, y] = 0
    head = 0
    tail = 0
    for x in range(x0, x1 + 1):
        for y in range(y0, y1 + 1):
            if src[x, y]:
                if tgt[x, y]:
                    return True
                mark[x, y] = 1
                queue[tail, 0] = x
                queue[tail, 1] = y
                tail += 1
    while head < tail:
        x = queue[head, 0]
        y = queue[head, 1]
        head += 1
        for k in range(4):
            if k == 0:
                if x >= x1:
                    continue
                e = hidx[x, y]
                nx, ny = x + 1, y
            elif k == 1:
                if x <= x0:
                    continue
                e = hidx[x - 1, y]
                nx, ny = x - 1, y
            elif k == 2:
                if y >= y1:
                    continue
                e = vidx[x, y]
                nx, ny = x, y + 1
            else:
                if y <= y0:
                    continue
                e = vidx[x, y - 1]
                nx, ny = x, y - 1
            if e == -1 or (e >= 0 and omega[e] == 0):
                continue
            if mark[nx, ny]:
                continue
            if tgt[nx, ny]:
                return True
            mark[nx, ny] = 1
            queue[tail, 0] = nx
            queue[tail, 1] = ny
            tail += 1
    return False


@njit(cache=True, nogil=True)
def site_reach(ok, x0, x1, y0, y1, src, tgt, star, mark, queue):
    """Site percolation search on cells with ok[x, y] inside the window."""
    for x in range(x0, x1 + 1):
        for y in range(y0, y1 + 1):
            mark[x, y] = 0
    head = 0
    tail = 0
    for x in range(x0, x1 + 1):
        for y in range(y0, y1 + 1):
            if src[x, y] and ok[x, y]:
                if tgt[x, y]:
                    return True
                mark[x, y] = 1
                queue[tail, 0] = x
                queue[tail, 1] = y
                tail += 1
    while head < tail:
        x = queue[head, 0]
        y = queue[head, 1]
        head += 1
        for dx in range(-1, 2):
            for dy in range(-1, 2):
                if dx == 0 and dy == 0:
                    continue
                if not star and dx != 0 and dy != 0:
                    continue
                nx = x + dx
                ny = y + dy
                if nx < x0 or nx > x1 or ny < y0 or ny > y1:
                    continue
                if mark[nx, ny] or not ok[nx, ny]:
                    continue
                if tgt[nx, ny]:
                    return True
                mark[nx, ny] = 1
                queue[tail, 0] = nx
                queue[tail, 1] = ny
                tail += 1
    return False


# ---------------------------------------------------------------------------
# recording drivers
# ---------------------------------------------------------------------------

@njit(cache=True, nogil=True)
def hybrid_record(spins, ptr, idx, bfield, beta, delta, ising, eu, ev, pe, bx, beta_eta, bp, rng,
                  parent, size, om_int, om_bnd, sign_buf, n_steps, skip, out_spins, out_om,
                  out_roots, rec_om, rec_roots):
    """n_steps hybrid steps; after each, run ``skip`` extra steps unrecorded, then record.

    Bonds and cluster roots are those of the last Edwards-Sokal move, which
    together with the recorded spins form a sample of the coupling.
    """
    n = spins.shape[0]
    ne = eu.shape[0]
    for t in range(n_steps):
        for _ in range(skip + 1):
            heatbath_sweep(spins, ptr, idx, bfield, beta, delta, ising, rng)
            es_sweep(spins, eu, ev, pe, bx, beta_eta, bp, rng, parent, size, om_int, om_bnd,
                     sign_buf)
        for i in range(n):
            out_spins[t, i] = spins[i]
        if rec_om:
            for e in range(ne):
                out_om[t, e] = om_int[e]
            for j in range(bx.shape[0]):
                out_om[t, ne + j] = om_bnd[j]
        if rec_roots:
            for i in range(n + 2):
                out_roots[t, i] = uf_find(parent, i)


@njit(cache=True, nogil=True)
def rc_roots(psi_all, omega, eu, ev, link_u, link_v, parent, size, out):
    """Cluster root of every node given open edges and always-open links."""
    nn = psi_all.shape[0]
    for i in range(nn):
        parent[i] = i
        size[i] = 1
    for e in range(eu.shape[0]):
        if omega[e]:
            uf_union(parent, size, eu[e], ev[e])
    for j in range(link_u.shape[0]):
        uf_union(parent, size, link_u[j], link_v[j])
    for i in range(nn):
        out[i] = uf_find(parent, i)


@njit(cache=True, nogil=True)
def rc_glauber_record(psi_all, omega, n, eu, ev, lo, lr, forced, la, vptr, vinc, ptr, adj, adj_e,
                      markA, markB, qA, qB, stamp, rng, n_steps, skip, update_vertices,
                      link_u, link_v, parent, size, out_psi, out_om, out_roots, rec_roots):
    for t in range(n_steps):
        stamp = rc_glauber(psi_all, omega, n, eu, ev, lo, lr, forced, la, vptr, vinc, ptr, adj,
                           adj_e, markA, markB, qA, qB, stamp, rng, skip + 1, update_vertices)
        for i in range(n):
            out_psi[t, i] = psi_all[i]
        for e in range(eu.shape[0]):
            out_om[t, e] = omega[e]
        if rec_roots:
            rc_roots(psi_all, omega, eu, ev, link_u, link_v, parent, size, out_roots[t])
    return stamp
