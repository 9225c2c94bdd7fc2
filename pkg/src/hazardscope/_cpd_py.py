"""Pure numpy fallback for the compiled change-point dynamic programs.

Mirrors ``_cpd_core.pyx`` exactly (same cost expression, same traversal and
tie handling) so both backends return identical breakpoints.
"""
import numpy as np


def segment_costs(S, D, a, b):
    """Scatter cost of [a, b) for scalar ``a`` and scalar or array ``b`` (or vice versa)."""
    return (D[b] - D[a]) - (S[b, b] - S[a, b] - S[b, a] + S[a, a]) / (b - a)


def fixed_k(S, D, k, min_size, tol):
    n = len(D) - 1
    B = np.full((k + 2, n + 1), np.inf)
    B[0, n] = 0.0
    for j in range(1, k + 2):
        starts = [0] if j == k + 1 else [0] + list(range(min_size, n - j * min_size + 1))
        for s in starts:
            if s > n - j * min_size:
                continue
            ts = np.arange(s + min_size, n + 1)
            prev = B[j - 1, ts]
            ok = np.isfinite(prev)
            if ok.any():
                B[j, s] = np.min(segment_costs(S, D, s, ts[ok]) + prev[ok])
    out = []
    s = 0
    for j in range(k + 1, 1, -1):
        ts = np.arange(s + min_size, n + 1)
        prev = B[j - 1, ts]
        ok = np.isfinite(prev)
        ts = ts[ok]
        vals = segment_costs(S, D, s, ts) + prev[ok]
        hit = np.flatnonzero(vals <= B[j, s] + tol)
        s = int(ts[hit[0]])
        out.append(s)
    return out, B[k + 1, 0]


def penalized(S, D, beta, min_size, tol):
    n = len(D) - 1
    G = np.full(n + 1, np.inf)
    G[n] = 0.0
    kill = np.full(n + 1, -1, dtype=np.intp)
    cand = np.array([n], dtype=np.intp)
    for s in range(n - min_size, -1, -1):
        if not (s == 0 or s >= min_size):
            continue
        usable = (cand - s >= min_size) & (s > kill[cand])
        tu = cand[usable]
        cost = segment_costs(S, D, s, tu)
        base = cost + G[tu]
        # same summation order as the compiled path: (cost + beta) + G
        best = np.min(cost + beta + G[tu]) if len(tu) else np.inf
        G[s] = best
        dominated = base > best + tol
        upd = tu[dominated & (s - min_size > kill[tu])]
        kill[upd] = s - min_size
        cand = cand[s - 1 > kill[cand]]
        if 0 < s <= n - min_size:
            cand = np.append(cand, s)
    out = []
    s = 0
    while n - s >= min_size:
        ts = np.arange(s + min_size, n + 1)
        ts = ts[np.isfinite(G[ts])]
        vals = segment_costs(S, D, s, ts) + beta + G[ts]
        t = int(ts[np.flatnonzero(vals <= G[s] + tol)[0]])
        if t == n:
            break
        out.append(t)
        s = t
    return out, G[0]
