"""Pure numpy kernels; same contracts and tie rules as the compiled ones."""
import numpy as np


def _sqd_matrix(a, b):
    dx = a[:, None, 0] - b[None, :, 0]
    dy = a[:, None, 1] - b[None, :, 1]
    dz = a[:, None, 2] - b[None, :, 2]
    return dx * dx + dy * dy + dz * dz


def _lex_first(points, cand):
    """Index in ``cand`` of the lexicographically smallest (x, y, z, index)."""
    if len(cand) == 1:
        return cand[0]
    sub = points[cand]
    order = np.lexsort((cand, sub[:, 2], sub[:, 1], sub[:, 0]))
    return cand[order[0]]


def fps(points, m, centroid):
    n = points.shape[0]
    d0 = points - centroid
    d0 = d0[:, 0] * d0[:, 0] + d0[:, 1] * d0[:, 1] + d0[:, 2] * d0[:, 2]
    out = np.empty(m, dtype=np.int64)
    out[0] = _lex_first(points, np.flatnonzero(d0 == d0.max()))
    mind = np.full(n, np.inf)
    mind[out[0]] = -1.0
    for t in range(1, m):
        diff = points - points[out[t - 1]]
        d = diff[:, 0] * diff[:, 0] + diff[:, 1] * diff[:, 1] + diff[:, 2] * diff[:, 2]
        np.minimum(mind, d, out=mind, where=mind >= 0.0)
        best = mind.max()
        out[t] = _lex_first(points, np.flatnonzero(mind == best))
        mind[out[t]] = -1.0
    return out


def knn(query, source, k, exclude):
    nq = query.shape[0]
    d = _sqd_matrix(query, source)
    rows = np.arange(nq)
    valid = exclude >= 0
    d[rows[valid], exclude[valid]] = np.inf
    # kth smallest value per row; every candidate at or below it is a contender
    kth = np.partition(d, k - 1, axis=1)[:, k - 1]
    idx = np.empty((nq, k), dtype=np.int64)
    dist = np.empty((nq, k))
    for q in range(nq):
        cand = np.flatnonzero(d[q] <= kth[q])
        sub = source[cand]
        order = np.lexsort((cand, sub[:, 2], sub[:, 1], sub[:, 0], d[q, cand]))[:k]
        cand = cand[order]
        idx[q] = cand
        dist[q] = d[q, cand]
    return idx, dist


def nearest(a, b):
    d = _sqd_matrix(a, b)
    idx = np.argmin(d, axis=1)
    return idx.astype(np.int64), d[np.arange(len(a)), idx]


def hungarian(cost):
    n = cost.shape[0]
    u = np.zeros(n + 1)
    v = np.zeros(n + 1)
    p = np.zeros(n + 1, dtype=np.int64)
    way = np.zeros(n + 1, dtype=np.int64)
    padded = np.zeros((n + 1, n + 1))
    padded[1:, 1:] = cost
    for i in range(1, n + 1):
        p[0] = i
        j0 = 0
        minv = np.full(n + 1, np.inf)
        used = np.zeros(n + 1, dtype=bool)
        while True:
            used[j0] = True
            i0 = p[j0]
            free = ~used
            free[0] = False
            cur = padded[i0] - u[i0] - v
            upd = free & (cur < minv)
            minv[upd] = cur[upd]
            way[upd] = j0
            masked = np.where(free, minv, np.inf)
            j1 = int(np.argmin(masked))
            delta = masked[j1]
            u[p[used]] += delta
            v[used] -= delta
            minv[~used] -= delta
            j0 = j1
            if p[j0] == 0:
                break
        while True:
            j1 = way[j0]
            p[j0] = p[j1]
            j0 = j1
            if j0 == 0:
                break
    out = np.empty(n, dtype=np.int64)
    out[p[1:] - 1] = np.arange(n)
    return out


def auction(cost, eps_start, eps_end):
    n = cost.shape[0]
    if n == 1:
        return np.zeros(1, dtype=np.int64)
    price = np.zeros(n)
    eps = eps_start
    while True:
        owner = np.full(n, -1, dtype=np.int64)
        assign = np.full(n, -1, dtype=np.int64)
        stack = list(range(n - 1, -1, -1))
        while stack:
            i = stack.pop()
            val = -cost[i] - price
            j1 = int(np.argmax(val))
            v1 = val[j1]
            val[j1] = -np.inf
            v2 = val.max()
            price[j1] += v1 - v2 + eps
            prev = owner[j1]
            owner[j1] = i
            assign[i] = j1
            if prev >= 0:
                assign[prev] = -1
                stack.append(prev)
        if eps <= eps_end:
            break
        eps = max(eps * 0.5, eps_end)
    return assign
