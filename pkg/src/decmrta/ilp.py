"""Centralized multi-tour allocation model: route plans, constraint checks, exact search.

Node numbering follows the usual two-depot convention: node 0 is the depot
a tour leaves from, nodes 1..n are tasks (in task-id order) and node n+1 is
the depot a tour returns to.  A :class:`RoutePlan` stores ordered tours of
task ids; the binary arc/visit variables are derived from it on demand.
"""

from __future__ import annotations

import itertools
import json
import math
import time
from collections import Counter
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Iterable, Optional, Sequence

import numpy as np

from .domain import Scenario

EPS = 1e-9


class PlanError(ValueError):
    pass


class SearchTooLarge(ValueError):
    pass


@dataclass(frozen=True)
class RoutePlan:
    """Per-robot list of tours, each an ordered tuple of task ids."""

    routes: tuple[tuple[tuple[int, ...], ...], ...]

    @classmethod
    def empty(cls, m: int) -> "RoutePlan":
        return cls(tuple(() for _ in range(m)))

    @classmethod
    def from_lists(cls, routes: Iterable[Iterable[Iterable[int]]]) -> "RoutePlan":
        return cls(tuple(tuple(tuple(int(i) for i in tour) for tour in robot) for robot in routes))

    def tours(self):
        """Yield ``(robot, tour_index, tour)`` with 1-based robot and tour indices."""
        for r, robot in enumerate(self.routes, start=1):
            for s, tour in enumerate(robot, start=1):
                yield r, s, tour

    def served(self) -> set[int]:
        return {i for _, _, tour in self.tours() for i in tour}

    def served_count(self) -> int:
        return len(self.served())

    def encoding(self) -> tuple:
        return self.routes

    def dumps(self) -> str:
        doc = {"robots": [[list(t) for t in robot] for robot in self.routes]}
        return json.dumps(doc) + "\n"


def load_plan(text: str) -> RoutePlan:
    try:
        doc = json.loads(text)
        robots = doc["robots"]
        if not isinstance(robots, list):
            raise TypeError("robots must be a list")
        return RoutePlan.from_lists(robots)
    except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
        raise PlanError(f"cannot parse route plan: {exc}") from None


@dataclass(frozen=True)
class IlpInstance:
    m: int
    h: int
    capacity: int
    max_range: float
    task_ids: tuple[int, ...]
    d: np.ndarray  # (n+2, n+2) distances over nodes 0..n+1
    t: np.ndarray  # (n+2, n+2) travel (+ service) times
    deadline: np.ndarray  # (n+2,), +inf at depot copies
    turnaround: float = 0.0

    @property
    def n(self) -> int:
        return len(self.task_ids)

    @property
    def ret(self) -> int:
        return self.n + 1

    def node(self, task_id: int) -> int:
        return self._node_of[task_id]

    @property
    def _node_of(self) -> dict[int, int]:
        return {tid: k + 1 for k, tid in enumerate(self.task_ids)}


def build_instance(s: Scenario, turnaround: float = 0.0, max_tours: Optional[int] = None) -> IlpInstance:
    """Distance and time matrices over both depot copies and all tasks.

    Arrival times are ignored: the centralized model plans over a static
    task set.
    """
    tasks = sorted(s.tasks, key=lambda t: t.id)
    pts = [s.depot] + [t.location for t in tasks] + [s.depot]
    xy = np.array([[p.x, p.y] for p in pts], dtype=float)
    dx = xy[:, None, 0] - xy[None, :, 0]
    dy = xy[:, None, 1] - xy[None, :, 1]
    d = np.sqrt(dx * dx + dy * dy)
    t = d / s.robot_speed
    t[:, 1 : len(tasks) + 1] += s.service_time
    deadline = np.full(len(pts), np.inf)
    deadline[1 : len(tasks) + 1] = [x.deadline for x in tasks]
    return IlpInstance(
        m=s.num_robots,
        h=max_tours if max_tours is not None else s.max_tours,
        capacity=s.payload_capacity,
        max_range=s.max_range,
        task_ids=tuple(x.id for x in tasks),
        d=d,
        t=t,
        deadline=deadline,
        turnaround=turnaround,
    )


def objective_value(plan: RoutePlan) -> float:
    return float(objective_fraction(plan))


def objective_fraction(plan: RoutePlan) -> Fraction:
    return sum((Fraction(len(set(tour)), s) for _, s, tour in plan.tours()), Fraction(0))


@dataclass(frozen=True)
class Violation:
    family: str
    indices: dict[str, int]
    values: tuple[float, ...] = ()

    def __str__(self) -> str:
        idx = ", ".join(f"{k}={v}" for k, v in self.indices.items())
        vals = f" values={self.values}" if self.values else ""
        return f"{self.family}: {idx}{vals}"


@dataclass
class ConstraintReport:
    violations: list[Violation] = field(default_factory=list)

    @property
    def feasible(self) -> bool:
        return not self.violations

    def families(self) -> Counter:
        return Counter(v.family for v in self.violations)

    def __str__(self) -> str:
        if self.feasible:
            return "feasible: no violations"
        return "\n".join(str(v) for v in self.violations)


def _arcs(inst: IlpInstance, tour: Sequence[int]) -> list[tuple[int, int]]:
    nodes = [0] + [inst.node(i) for i in tour] + [inst.ret]
    return list(zip(nodes[:-1], nodes[1:]))


def check_constraints(plan: RoutePlan, inst: IlpInstance) -> ConstraintReport:
    """Every violated constraint family of the centralized model.

    Families: ``visit`` (arcs leave exactly the served tasks), ``flow``,
    ``departure``, ``subtour``, ``unique`` (one robot per task),
    ``arc-reuse``, ``payload``, ``range`` and ``deadline``; ``fixed`` flags
    variables pinned to zero and ``structure`` flags malformed plans.  Deadlines are checked on the
    chronological schedule: tours of a robot run back to back from time 0.
    """
    rep = ConstraintReport()
    add = rep.violations.append
    if len(plan.routes) != inst.m:
        add(Violation("structure", {"robots": len(plan.routes)}, (len(plan.routes), inst.m)))
        return rep
    known = set(inst.task_ids)
    for r, s, tour in plan.tours():
        if s > inst.h:
            add(Violation("structure", {"r": r, "s": s}, (s, inst.h)))
        for i in tour:
            if i not in known:
                add(Violation("structure", {"r": r, "s": s, "i": i}))
    if rep.violations:
        return rep

    visits: Counter = Counter()
    arc_use: Counter = Counter()
    for r, robot in enumerate(plan.routes, start=1):
        clock = 0.0
        for s, tour in enumerate(robot, start=1):
            arcs = _arcs(inst, tour)
            x = Counter(arcs)
            y = set(inst.node(i) for i in tour)
            for (i, j), k in x.items():
                if i == j or j == 0 or (i == inst.ret):
                    add(Violation("fixed", {"r": r, "s": s, "i": i, "j": j}, (k,)))
            for i in range(1, inst.n + 1):
                out = sum(k for (a, b), k in x.items() if a == i and b != 0)
                inflow = sum(k for (a, b), k in x.items() if b == i and a != inst.ret)
                yi = 1 if i in y else 0
                if out != yi:
                    add(Violation("visit", {"r": r, "s": s, "i": i}, (out, yi)))
                if inflow != out:
                    add(Violation("flow", {"r": r, "s": s, "k": i}, (inflow, out)))
            starts = sum(k for (a, _), k in x.items() if a == 0)
            if starts != 1:
                add(Violation("departure", {"r": r, "s": s}, (starts,)))
            if sum(x.values()) > len(y) + 1:
                add(Violation("subtour", {"r": r, "s": s}, (sum(x.values()), len(y) + 1)))
            if len(y) > inst.capacity:
                add(Violation("payload", {"r": r, "s": s}, (len(y), inst.capacity)))
            dist = sum(inst.d[a, b] for a, b in arcs)
            if dist > inst.max_range + EPS:
                add(Violation("range", {"r": r, "s": s}, (float(dist), inst.max_range)))
            for a, b in arcs:
                clock += inst.t[a, b]
                if b != inst.ret and clock > inst.deadline[b] + EPS:
                    add(Violation("deadline", {"r": r, "s": s, "i": b}, (float(clock), float(inst.deadline[b]))))
                if 1 <= a <= inst.n and 1 <= b <= inst.n:
                    arc_use[a, b] += 1
            clock += inst.turnaround
            for i in y:
                visits[i] += 1
    for i, k in sorted(visits.items()):
        if k > 1:
            add(Violation("unique", {"i": i}, (k,)))
    for (i, j), k in sorted(arc_use.items()):
        if k > 1:
            add(Violation("arc-reuse", {"i": i, "j": j}, (k,)))
    return rep


def check_literal_deadline(plan: RoutePlan, inst: IlpInstance) -> ConstraintReport:
    """Diagnostics: the deadline-linking inequality read literally.

    It demands that the time spent in tours ``1..s'`` be at least the
    deadline of every task in tour ``s'+1``.  This contradicts on-time
    delivery and is not part of feasibility; it is exposed only to inspect
    plans against the written form.
    """
    rep = ConstraintReport()
    for r, robot in enumerate(plan.routes, start=1):
        elapsed = 0.0
        for s, tour in enumerate(robot, start=1):
            if s >= 2:
                for i in tour:
                    node = inst.node(i)
                    if elapsed < inst.deadline[node] - EPS:
                        rep.violations.append(
                            Violation("deadline-literal", {"r": r, "s": s, "i": node}, (elapsed, float(inst.deadline[node])))
                        )
            elapsed += sum(inst.t[a, b] for a, b in _arcs(inst, tour))
    return rep


@dataclass(frozen=True)
class SolveResult:
    plan: RoutePlan
    objective: float
    optimal: bool
    elapsed: float = 0.0
    nodes: int = 0


def solve_exact(
    inst: IlpInstance, timeout: float = 60.0, max_tasks: int = 12, bound: str = "count"
) -> SolveResult:
    """Depth-first branch and bound over route extensions.

    Robots are routed one after another.  At each node the current robot
    either appends a task to its open tour, closes the tour and starts the
    next one, or stops.  Robots are interchangeable, so the first task of
    each robot's route must exceed the previous robot's first task.

    ``bound="count"`` prunes with the current objective plus the number of
    tasks still servable.  ``bound="slots"`` instead credits those tasks with
    the best tour coefficients still open, which is tighter and much faster
    on instances where most tasks fit in early tours.

    Among plans with the optimal objective, one serving the most tasks is
    returned.
    """
    if bound not in ("count", "slots"):
        raise ValueError(f"unknown bound {bound!r}")
    n, m, h, Q = inst.n, inst.m, inst.h, inst.capacity
    if n > max_tasks:
        raise SearchTooLarge(f"{n} tasks exceeds the exact-search guard of {max_tasks}")
    started = time.perf_counter()
    d, tt, dl, R, ret = inst.d.tolist(), inst.t.tolist(), inst.deadline.tolist(), inst.max_range, inst.ret

    servable = [
        k
        for k in range(1, n + 1)
        if d[0][k] + d[k][ret] <= R + EPS and tt[0][k] <= dl[k] + EPS
    ]
    # a task that nobody can reach from a fresh start is dropped up front
    coeffs = [1.0 / s for s in range(1, h + 1)]

    best_obj, best_served = 0.0, 0
    total = len(servable)
    best_routes: list = [[] for _ in range(m)]
    nodes = 0
    timed_out = False

    def slot_bound(k_robot: int, s: int, count: int, remaining: int) -> float:
        fresh = m - k_robot - 1
        total = 0.0
        for s2 in range(1, h + 1):
            if remaining <= 0:
                break
            own = Q - count if s2 == s else (Q if s2 > s else 0)
            take = min(remaining, own + Q * fresh)
            total += take * coeffs[s2 - 1]
            remaining -= take
        return total

    routes: list[list[list[int]]] = [[] for _ in range(m)]
    served = [False] * (n + 1)
    first_task = [0] * m

    def dfs(k: int, s: int, pos: int, clock: float, dist: float, count: int, obj: float, open_remaining: int) -> None:
        nonlocal best_obj, best_served, best_routes, nodes, timed_out
        nodes += 1
        if timed_out:
            return
        if nodes % 2048 == 0 and time.perf_counter() - started > timeout:
            timed_out = True
            return
        done = total - open_remaining
        if obj > best_obj + 1e-12 or (obj > best_obj - 1e-12 and done > best_served):
            best_obj, best_served = obj, done
            best_routes = [[list(tour) for tour in robot] for robot in routes]
        remaining = open_remaining
        if k == m - 1:
            # last robot: only tasks it can still reach in time count
            remaining = sum(
                1 for j in servable if not served[j] and clock + tt[pos][j] <= dl[j] + EPS
            )
        optimistic = slot_bound(k, s, count, remaining) if bound == "slots" else remaining
        # ties on the objective are broken toward serving more tasks
        if obj + optimistic < best_obj - 1e-12:
            return
        if obj + optimistic <= best_obj + 1e-12 and done + remaining <= best_served:
            return

        tour = routes[k][-1]
        # 1) extend the open tour
        if count < Q:
            for j in servable:
                if served[j]:
                    continue
                if count == 0 and s == 1 and k > 0 and j < first_task[k - 1]:
                    continue
                arrive = clock + tt[pos][j]
                if arrive > dl[j] + EPS:
                    continue
                nd = dist + d[pos][j]
                if nd + d[j][ret] > R + EPS:
                    continue
                served[j] = True
                tour.append(j)
                if count == 0 and s == 1:
                    first_task[k] = j
                dfs(k, s, j, arrive, nd, count + 1, obj + coeffs[s - 1], open_remaining - 1)
                tour.pop()
                served[j] = False
                if timed_out:
                    return
        # 2) close the tour and open the next one
        if count > 0 and s < h:
            routes[k].append([])
            dfs(k, s + 1, 0, clock + tt[pos][ret] + inst.turnaround, 0.0, 0, obj, open_remaining)
            routes[k].pop()
            if timed_out:
                return
        # 3) hand over to the next robot; an idle robot leaves the rest idle too
        if k + 1 < m and not (s == 1 and count == 0):
            routes[k + 1].append([])
            dfs(k + 1, 1, 0, 0.0, 0.0, 0, obj, open_remaining)
            routes[k + 1].pop()

    if m > 0 and servable:
        routes[0].append([])
        dfs(0, 1, 0, 0.0, 0.0, 0, 0.0, len(servable))

    ids = inst.task_ids
    plan = RoutePlan.from_lists(
        [[ids[j - 1] for j in tour] for tour in robot if tour] for robot in best_routes
    )
    return SolveResult(
        plan=plan,
        objective=objective_value(plan),
        optimal=not timed_out,
        elapsed=time.perf_counter() - started,
        nodes=nodes,
    )


def count_plans(n: int, buckets: int, capacity: Optional[int] = None) -> int:
    """Number of ways to place ordered, capacity-limited tours of distinct tasks into ``buckets`` slots."""
    cap = n if capacity is None else min(capacity, n)
    # ways[k]: ordered arrangements of k labelled tasks across the buckets seen so far
    ways = [1] + [0] * n
    for _ in range(buckets):
        nxt = [0] * (n + 1)
        for k in range(n + 1):
            if ways[k]:
                for a in range(0, min(cap, n - k) + 1):
                    # choose which a of the remaining tasks go here, in order
                    nxt[k + a] += ways[k] * math.perm(n - k, a)
        ways = nxt
    return sum(ways)


def _schedule_ok(inst: IlpInstance, robot: Sequence[Sequence[int]]) -> bool:
    clock = 0.0
    for tour in robot:
        nodes = [0] + list(tour) + [inst.ret]
        dist = 0.0
        for a, b in zip(nodes[:-1], nodes[1:]):
            clock += inst.t[a, b]
            dist += inst.d[a, b]
            if b != inst.ret and clock > inst.deadline[b] + EPS:
                return False
        if dist > inst.max_range + EPS:
            return False
        clock += inst.turnaround
    return True


def enumerate_oracle(inst: IlpInstance, limit: int = 10**6) -> tuple[RoutePlan, float]:
    """Exhaustive search over every route plan.

    Ties on the objective go to the plan serving more tasks, then to the
    smallest encoding.
    """
    n, m, h, Q = inst.n, inst.m, inst.h, inst.capacity
    total = count_plans(n, m * h, Q)
    if total > limit:
        raise SearchTooLarge(f"{total} candidate plans exceeds the oracle guard of {limit}")
    nodes = list(range(1, n + 1))
    best_key = None
    best_routes = None

    def rec(b: int, remaining: tuple[int, ...], acc: list):
        nonlocal best_key, best_routes
        if b == m * h:
            routes = [acc[r * h : (r + 1) * h] for r in range(m)]
            if not all(_schedule_ok(inst, robot) for robot in routes):
                return
            obj = sum(Fraction(len(tour), s % h + 1) for s, tour in enumerate(acc))
            enc = tuple(tuple(tuple(inst.task_ids[j - 1] for j in tour) for tour in robot) for robot in routes)
            key = (-obj, -sum(len(t) for t in acc), enc)
            if best_key is None or key < best_key:
                best_key, best_routes = key, enc
            return
        for size in range(0, min(Q, len(remaining)) + 1):
            for seq in itertools.permutations(remaining, size):
                rest = tuple(x for x in remaining if x not in seq)
                acc.append(seq)
                rec(b + 1, rest, acc)
                acc.pop()

    rec(0, tuple(nodes), [])
    return compact(RoutePlan(best_routes)), float(-best_key[0])


def compact(plan: RoutePlan) -> RoutePlan:
    """Drop trailing empty tours so equivalent plans compare equal."""
    out = []
    for robot in plan.routes:
        tours = list(robot)
        while tours and not tours[-1]:
            tours.pop()
        out.append(tuple(tours))
    return RoutePlan(tuple(out))


def plan_to_document(plan: RoutePlan) -> dict[str, Any]:
    return {"robots": [[list(t) for t in robot] for robot in plan.routes]}
