"""Pure numpy versions of the hot loops (fallback when the extension is absent)."""

import numpy as np


def ball_sup(avg, indptr, indices, n_points):
    """out[s, x] = max over balls b containing x of avg[s, b]."""
    avg = np.ascontiguousarray(avg, dtype=np.float64)
    S, nb = avg.shape
    counts = np.diff(indptr)
    ball_of = np.repeat(np.arange(nb), counts)
    out = np.full((S, n_points), -np.inf)
    for s in range(S):
        np.maximum.at(out[s], indices, avg[s, ball_of])
    return out


def peetre_max(G, dist, ts, lam):
    """out[k, s, x] = max_y G[k, s, y] / (1 + dist[x, y]/ts[k])**lam."""
    G = np.ascontiguousarray(G, dtype=np.float64)
    T, S, N = G.shape
    out = np.empty_like(G)
    for k in range(T):
        decay = (1.0 + dist / ts[k]) ** (-lam)
        for s in range(S):
            out[k, s] = (decay * G[k, s][None, :]).max(axis=1)
    return out
