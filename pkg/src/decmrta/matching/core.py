from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Optional

import numpy as np

from ..incentive import WeightedBigraph

TOL = 1e-9
_POOL = -1


class MatchingTooLarge(ValueError):
    """The brute-force oracle refuses graphs beyond its size guard."""


@dataclass(frozen=True)
class Matching:
    pairs: tuple[tuple[int, int], ...]
    total_weight: float

    @property
    def assignment(self) -> dict[int, int]:
        return dict(self.pairs)

    def __len__(self) -> int:
        return len(self.pairs)


def _row_order(g: WeightedBigraph) -> list[int]:
    return sorted(range(len(g.robots)), key=lambda i: (g.label(g.robots[i]), g.robots[i]))


def _build(g: WeightedBigraph, rows: list[int], choice: list[int]) -> Matching:
    pairs = []
    total = 0.0
    for k, j in zip(rows, choice):
        if j >= 0:
            pairs.append((g.robots[k], g.tasks[j]))
            total += float(g.weights[k, j])
    return Matching(tuple(pairs), total)


def max_weight_matching(g: WeightedBigraph, kernel: Optional[Callable] = None) -> Matching:
    """Maximum-weight matching of ``g``; vertices may stay unmatched.

    Among optimal matchings the one whose per-robot assignment vector (robots
    in label order, unmatched counting as +inf) is lexicographically smallest
    is returned.
    """
    if kernel is None:
        from . import solve_assignment as kernel

    rows = _row_order(g)
    nr, nt = len(rows), len(g.tasks)
    W = g.weights[rows] if nr else np.zeros((0, nt))
    if nr == 0 or nt == 0 or not np.any(W > 0):
        return Matching((), 0.0)

    # one private zero-weight "stay unmatched" column per robot; non-edges
    # cost more than staying unmatched so the kernel never selects them
    cost = np.zeros((nr, nt + nr))
    cost[:, :nt] = np.where(W > 0, -W, 1.0)
    col_of_row, u, v = kernel(cost)
    A = [int(c) for c in col_of_row]

    slack = cost - u[:, None] - v[None, :]
    tight = np.abs(slack) <= TOL
    tight[:, :nt] &= W > 0
    robot_cols = [np.flatnonzero(tight[i]).tolist() for i in range(nr)]
    # a column may be left to the implicit task-side dummies iff its potential is zero
    pool_cols = np.flatnonzero(np.abs(v) <= TOL).tolist()

    holder = [_POOL] * (nt + nr)
    for i, c in enumerate(A):
        holder[c] = i
    locked = [False] * nr

    def try_take(r: int, c: int) -> bool:
        start = holder[c]
        if start != _POOL and locked[start]:
            return False
        c0 = A[r]
        parent: dict[int, tuple[int, int]] = {}
        seen = {start}
        queue = deque([start])
        end = None
        while queue and end is None:
            x = queue.popleft()
            for col in robot_cols[x] if x != _POOL else pool_cols:
                if col == c:
                    continue
                h = holder[col]
                if col == c0:
                    end = x
                    break
                if h == x or (h != _POOL and locked[h]) or h == r or h in seen:
                    continue
                seen.add(h)
                parent[h] = (x, col)
                queue.append(h)
        if end is None:
            return False
        moves = [(end, c0)]
        y = end
        while y != start:
            x, col = parent[y]
            moves.append((x, col))
            y = x
        for who, col in moves:
            holder[col] = who
            if who != _POOL:
                A[who] = col
        holder[c] = r
        A[r] = c
        return True

    for r in range(nr):
        current = A[r]
        for c in robot_cols[r]:
            if c >= nt or (current < nt and c >= current):
                break
            if try_take(r, c):
                break
        locked[r] = True

    return _build(g, rows, [c if c < nt else -1 for c in A])


def brute_force_matching(g: WeightedBigraph, max_states: int = 1 << 20) -> Matching:
    """Exhaustive optimum over all matchings via memoized enumeration.

    Robots are enumerated in label order and each either takes a still-free
    task or stays unmatched; the recursion is memoized on (robot, used-task
    mask), so every matching is covered.  The tie rule matches
    :func:`max_weight_matching`.
    """
    rows = _row_order(g)
    nr, nt = len(rows), len(g.tasks)
    if nr * (1 << nt) > max_states:
        raise MatchingTooLarge(f"{nr} robots x {nt} tasks exceeds the oracle guard")
    W = [[float(g.weights[k, j]) for j in range(nt)] for k in rows]

    @lru_cache(maxsize=None)
    def best(i: int, mask: int) -> float:
        if i == nr:
            return 0.0
        value = best(i + 1, mask)
        for j in range(nt):
            if W[i][j] > 0 and not mask >> j & 1:
                value = max(value, W[i][j] + best(i + 1, mask | 1 << j))
        return value

    target = best(0, 0) - TOL
    choice = []
    acc, mask = 0.0, 0
    for i in range(nr):
        for j in range(nt):
            if W[i][j] > 0 and not mask >> j & 1:
                if acc + W[i][j] + best(i + 1, mask | 1 << j) >= target:
                    choice.append(j)
                    acc += W[i][j]
                    mask |= 1 << j
                    break
        else:
            choice.append(-1)
    return _build(g, rows, choice)
