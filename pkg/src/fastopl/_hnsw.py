"""Numba kernels for the inner-product HNSW graph.

Layer 0 neighbors live in ``nbr0[P, cap0]`` with counts ``cnt0``.  A node at
level ``l > 0`` owns rows ``upper_off[node] .. upper_off[node] + l - 1`` of
``nbr_up[*, M]`` (row ``upper_off[node] + layer - 1`` holds layer ``layer``).
Similarity is the raw inner product; larger is better, ties go to the lower id.
"""
from __future__ import annotations

import heapq

import numpy as np
from numba import njit


@njit(cache=True)
def _dot(vecs, i, q):
    s = 0.0
    for k in range(q.shape[0]):
        s += vecs[i, k] * q[k]
    return s


@njit(cache=True)
def _row(node, layer, upper_off):
    return upper_off[node] + layer - 1


@njit(cache=True)
def _neighbors(node, layer, nbr0, cnt0, nbr_up, cnt_up, upper_off):
    if layer == 0:
        return nbr0[node, : cnt0[node]]
    r = _row(node, layer, upper_off)
    return nbr_up[r, : cnt_up[r]]


@njit(cache=True)
def _greedy(vecs, q, ep, layer, nbr0, cnt0, nbr_up, cnt_up, upper_off):
    best = ep
    best_s = _dot(vecs, ep, q)
    changed = True
    while changed:
        changed = False
        for n in _neighbors(best, layer, nbr0, cnt0, nbr_up, cnt_up, upper_off):
            s = _dot(vecs, n, q)
            if s > best_s or (s == best_s and n < best):
                best_s = s
                best = n
                changed = True
    return best


@njit(cache=True)
def _search_layer(vecs, q, ep, ef, layer, nbr0, cnt0, nbr_up, cnt_up, upper_off, visited, tag):
    """Beam search; returns (ids, scores) sorted best first."""
    visited[ep] = tag
    s0 = _dot(vecs, ep, q)
    cand = [(-s0, ep)]
    # min-heap on (score, -id): the root is the worst kept result
    res = [(s0, -ep)]
    while len(cand) > 0:
        negs, c = heapq.heappop(cand)
        if len(res) >= ef and -negs < res[0][0]:
            break
        for n in _neighbors(c, layer, nbr0, cnt0, nbr_up, cnt_up, upper_off):
            if visited[n] == tag:
                continue
            visited[n] = tag
            s = _dot(vecs, n, q)
            if len(res) < ef or (s, -n) > res[0]:
                heapq.heappush(cand, (-s, n))
                heapq.heappush(res, (s, -n))
                if len(res) > ef:
                    heapq.heappop(res)
    m = len(res)
    ids = np.empty(m, dtype=np.int64)
    scores = np.empty(m, dtype=np.float64)
    for j in range(m - 1, -1, -1):
        s, nid = heapq.heappop(res)
        ids[j] = -nid
        scores[j] = s
    return ids, scores


@njit(cache=True)
def _select(vecs, ids, scores, m):
    """Diversity heuristic: keep a candidate only if it is more similar to the
    base point than to every neighbor already kept.  ``ids`` is sorted best first."""
    out = np.empty(m, dtype=np.int64)
    k = 0
    for j in range(ids.shape[0]):
        if k >= m:
            break
        e = ids[j]
        good = True
        for r in range(k):
            if _dot(vecs, e, vecs[out[r]]) > scores[j]:
                good = False
                break
        if good:
            out[k] = e
            k += 1
    # top up with the best skipped candidates so sparse regions keep M links
    if k < m:
        for j in range(ids.shape[0]):
            if k >= m:
                break
            e = ids[j]
            seen = False
            for r in range(k):
                if out[r] == e:
                    seen = True
                    break
            if not seen:
                out[k] = e
                k += 1
    return out[:k]


@njit(cache=True)
def _link(vecs, src, dst, layer, mmax, nbr0, cnt0, nbr_up, cnt_up, upper_off):
    if layer == 0:
        table, counts, r = nbr0, cnt0, src
    else:
        table, counts, r = nbr_up, cnt_up, _row(src, layer, upper_off)
    c = counts[r]
    for j in range(c):
        if table[r, j] == dst:
            return
    if c < mmax:
        table[r, c] = dst
        counts[r] = c + 1
        return
    # full: re-select among existing links plus the new one
    pool = np.empty(c + 1, dtype=np.int64)
    ps = np.empty(c + 1, dtype=np.float64)
    for j in range(c):
        pool[j] = table[r, j]
    pool[c] = dst
    base = vecs[src]
    for j in range(c + 1):
        ps[j] = _dot(vecs, pool[j], base)
    order = np.argsort(-ps, kind="mergesort")
    kept = _select(vecs, pool[order], ps[order], mmax)
    for j in range(kept.shape[0]):
        table[r, j] = kept[j]
    counts[r] = kept.shape[0]


@njit(cache=True)
def build_graph(vecs, levels, upper_off, m, ef_construction, cap0):
    n = vecs.shape[0]
    m0 = 2 * m
    nbr0 = np.full((n, cap0), -1, dtype=np.int64)
    cnt0 = np.zeros(n, dtype=np.int64)
    n_up = 0
    for i in range(n):
        n_up += levels[i]
    nbr_up = np.full((max(n_up, 1), m), -1, dtype=np.int64)
    cnt_up = np.zeros(max(n_up, 1), dtype=np.int64)
    visited = np.zeros(n, dtype=np.int64)
    tag = 0
    entry = 0
    max_level = levels[0]
    for i in range(1, n):
        q = vecs[i]
        li = levels[i]
        ep = entry
        for layer in range(max_level, li, -1):
            ep = _greedy(vecs, q, ep, layer, nbr0, cnt0, nbr_up, cnt_up, upper_off)
        for layer in range(min(li, max_level), -1, -1):
            tag += 1
            ids, scores = _search_layer(
                vecs, q, ep, ef_construction, layer, nbr0, cnt0, nbr_up, cnt_up, upper_off, visited, tag
            )
            chosen = _select(vecs, ids, scores, m)
            mmax = m0 if layer == 0 else m
            for j in range(chosen.shape[0]):
                _link(vecs, i, chosen[j], layer, mmax, nbr0, cnt0, nbr_up, cnt_up, upper_off)
                _link(vecs, chosen[j], i, layer, mmax, nbr0, cnt0, nbr_up, cnt_up, upper_off)
            ep = ids[0]
        if li > max_level:
            max_level = li
            entry = i
    return nbr0, cnt0, nbr_up, cnt_up, entry, max_level


@njit(cache=True)
def _reach(start, nbr0, cnt0, seen):
    stack = [start]
    seen[start] = True
    while len(stack) > 0:
        c = stack.pop()
        for j in range(cnt0[c]):
            n = nbr0[c, j]
            if not seen[n]:
                seen[n] = True
                stack.append(n)


@njit(cache=True)
def repair_connectivity(vecs, entry, ef, nbr0, cnt0, nbr_up, cnt_up, upper_off):
    """Give every node unreachable from the entry point at layer 0 an in-link
    from a reachable node with a spare slot.  Returns the number of repairs."""
    n = vecs.shape[0]
    cap0 = nbr0.shape[1]
    seen = np.zeros(n, dtype=np.bool_)
    _reach(entry, nbr0, cnt0, seen)
    visited = np.zeros(n, dtype=np.int64)
    tag = 0
    fixed = 0
    for u in range(n):
        if seen[u]:
            continue
        tag += 1
        ids, _ = _search_layer(vecs, vecs[u], entry, ef, 0, nbr0, cnt0, nbr_up, cnt_up, upper_off, visited, tag)
        host = -1
        for j in range(ids.shape[0]):
            w = ids[j]
            if seen[w] and cnt0[w] < cap0:
                host = w
                break
        if host < 0:
            # fall back to a linear scan for any reachable node with room
            for w in range(n):
                if seen[w] and cnt0[w] < cap0:
                    host = w
                    break
        if host < 0:
            return -1
        nbr0[host, cnt0[host]] = u
        cnt0[host] += 1
        _reach(u, nbr0, cnt0, seen)
        fixed += 1
    return fixed


@njit(cache=True)
def query(vecs, q, k, ef, entry, max_level, nbr0, cnt0, nbr_up, cnt_up, upper_off, visited, tag):
    ep = entry
    for layer in range(max_level, 0, -1):
        ep = _greedy(vecs, q, ep, layer, nbr0, cnt0, nbr_up, cnt_up, upper_off)
    ids, scores = _search_layer(vecs, q, ep, max(ef, k), 0, nbr0, cnt0, nbr_up, cnt_up, upper_off, visited, tag)
    k = min(k, ids.shape[0])
    return ids[:k], scores[:k]


@njit(cache=True)
def query_batch(vecs, qs, k, ef, entry, max_level, nbr0, cnt0, nbr_up, cnt_up, upper_off, visited, tag0):
    b = qs.shape[0]
    out_ids = np.full((b, k), -1, dtype=np.int64)
    out_scores = np.full((b, k), -np.inf)
    for i in range(b):
        ids, scores = query(vecs, qs[i], k, ef, entry, max_level, nbr0, cnt0, nbr_up, cnt_up, upper_off, visited, tag0 + i)
        out_ids[i, : ids.shape[0]] = ids
        out_scores[i, : ids.shape[0]] = scores
    return out_ids, out_scores
