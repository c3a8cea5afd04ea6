"""Pure-Python/numpy shortest-augmenting-path assignment (fallback kernel)."""

import numpy as np


def solve_assignment(cost):
    """Minimum-cost assignment of every row of ``cost`` to a distinct column.

    Requires ``rows <= cols``.  Returns ``(col_of_row, u, v)`` where ``u`` and
    ``v`` are optimal dual potentials with ``u[i] + v[j] <= cost[i, j]`` and
    equality on assigned pairs.  Columns never reached by the search keep
    ``v[j] == 0``.
    """
    a = np.ascontiguousarray(cost, dtype=np.float64)
    n, m = a.shape
    if n > m:
        raise ValueError("solve_assignment needs rows <= cols")
    u = np.zeros(n + 1)
    v = np.zeros(m + 1)
    p = np.zeros(m + 1, dtype=np.int64)  # p[j]: row (1-based) holding column j
    way = np.zeros(m + 1, dtype=np.int64)
    # padded with a zero row/col so indices stay 1-based like the classic form
    ap = np.zeros((n + 1, m + 1))
    ap[1:, 1:] = a
    for i in range(1, n + 1):
        p[0] = i
        j0 = 0
        minv = np.full(m + 1, np.inf)
        used = np.zeros(m + 1, dtype=bool)
        while True:
            used[j0] = True
            i0 = p[j0]
            free = ~used
            free[0] = False
            cur = ap[i0] - u[i0] - v
            better = free & (cur < minv)
            minv[better] = cur[better]
            way[better] = j0
            cand = np.where(free, minv, np.inf)
            j1 = int(np.argmin(cand))
            delta = cand[j1]
            u[p[used]] += delta
            v[used] -= delta
            minv[free] -= delta
            j0 = j1
            if p[j0] == 0:
                break
        while j0:
            j1 = way[j0]
            p[j0] = p[j1]
            j0 = j1
    col_of_row = np.full(n, -1, dtype=np.int64)
    for j in range(1, m + 1):
        if p[j]:
            col_of_row[p[j] - 1] = j - 1
    return col_of_row, u[1:].copy(), v[1:].copy()
