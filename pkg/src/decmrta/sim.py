"""Discrete-event mission simulator with stale peer state.

Robots fly straight legs at constant speed.  A robot decides its next action
``decision_lead`` minutes before finishing a task leg (using its projected
state at that moment), on arrival at the depot after reloading, after a
wasted trip, and, when idle at the depot, whenever a new task appears.  What
a robot knows about its peers and the task board lags the truth by
``latency`` minutes; its own state is always current.
"""

from __future__ import annotations

import bisect
import heapq
import time
from dataclasses import dataclass, field, replace
from typing import Callable, Iterable, Optional, Sequence

import numpy as np

from .allocator import Action, GoToTask, KnownWorld, ReturnToDepot, decide_dec_mrta, decide_random_feasible
from .domain import DEPOT, RobotState, Scenario, Task, TaskState, TaskStatus, distance, shuffled_labels

POLICIES = ("dec-mrta", "rnd-feas")

# same-time ordering: legs finish, then tasks appear, then decisions, then expiries
_LEG_END, _ARRIVAL, _DECIDE, _EXPIRE = 0, 1, 2, 3

METRICS_HEADER = (
    "completion_rate",
    "tasks_completed",
    "tasks_expired",
    "unattempted",
    "wasted_trips",
    "decisions",
    "cumulative_compute_s",
    "mean_robot_compute_s",
    "total_distance",
)


@dataclass(frozen=True)
class SimConfig:
    policy: str = "dec-mrta"
    decision_lead: float = 1.0
    latency: float = 0.0
    seed: int = 0
    horizon: Optional[float] = None
    shuffle_labels: bool = True

    def __post_init__(self) -> None:
        if self.policy not in POLICIES:
            raise ValueError(f"unknown policy {self.policy!r}; choose from {POLICIES}")
        if self.decision_lead < 0 or self.latency < 0:
            raise ValueError("decision_lead and latency must be non-negative")


@dataclass(frozen=True)
class LogEvent:
    time: float
    robot: int
    kind: str
    task: int = 0
    compute_ms: float = 0.0
    distance: float = 0.0

    def line(self, timing: bool = True) -> str:
        base = f"{self.time:.6f}\t{self.robot}\t{self.kind}\t{self.task}\t{self.distance:.6f}"
        return f"{base}\t{self.compute_ms:.3f}" if timing else base


@dataclass
class MissionLog:
    events: list[LogEvent] = field(default_factory=list)

    def append(self, ev: LogEvent) -> None:
        self.events.append(ev)

    def __iter__(self):
        return iter(self.events)

    def __len__(self) -> int:
        return len(self.events)

    def dumps(self, timing: bool = True) -> str:
        """One event per line: time, robot, kind, task, distance[, compute_ms].

        ``timing=False`` drops the wall-clock column, leaving a byte-stable
        record of the mission.
        """
        header = "time\trobot\tkind\ttask\tdistance" + ("\tcompute_ms" if timing else "")
        return "\n".join([header] + [e.line(timing) for e in self.events]) + "\n"

    def of_kind(self, kind: str) -> list[LogEvent]:
        return [e for e in self.events if e.kind == kind]


@dataclass(frozen=True)
class Metrics:
    completion_rate: float
    tasks_completed: int
    tasks_expired: int
    unattempted: int
    wasted_trips: int
    decisions: int
    cumulative_compute: float
    mean_robot_compute: float
    distance_flown: tuple[float, ...]

    def row(self) -> dict[str, float]:
        return {
            "completion_rate": self.completion_rate,
            "tasks_completed": self.tasks_completed,
            "tasks_expired": self.tasks_expired,
            "unattempted": self.unattempted,
            "wasted_trips": self.wasted_trips,
            "decisions": self.decisions,
            "cumulative_compute_s": self.cumulative_compute,
            "mean_robot_compute_s": self.mean_robot_compute,
            "total_distance": sum(self.distance_flown),
        }


def resolve_conflict_at_task(task: Task, robot: int, now: float) -> tuple[str, Task]:
    """Outcome of ``robot`` reaching ``task``: ``"completed"`` or ``"wasted"``.

    Arriving at a task that is already done (or past its deadline) is a
    wasted trip; otherwise the arriving robot completes it, whoever held it.
    """
    if task.status in (TaskStatus.COMPLETED, TaskStatus.EXPIRED) or now > task.deadline:
        return "wasted", task
    if task.status is TaskStatus.ACTIVE:
        task = task.transition(TaskState(TaskStatus.COMMITTED, robot, now))
    return "completed", task.transition(TaskState(TaskStatus.COMPLETED, robot, now))


@dataclass
class _Robot:
    id: int
    label: int
    location: object  # Point where the current leg ends (or current spot when idle)
    range_left: float  # remaining range once the current leg ends
    payload: int
    free_at: float = 0.0
    target: Optional[int] = None  # task id, DEPOT, or None when idle
    pending: Optional[Action] = None
    idle: bool = False
    tour_served: int = 0
    tour_distance: float = 0.0
    flown: float = 0.0
    projected: Optional[RobotState] = None


class _History:
    """Time-stamped state changes, queryable as of an earlier instant."""

    def __init__(self, initial):
        self.times: list[float] = [-np.inf]
        self.values: list = [initial]
        self.sources: list[Optional[int]] = [None]

    def push(self, t: float, value, source: Optional[int] = None) -> None:
        self.times.append(t)
        self.values.append(value)
        self.sources.append(source)

    def index_at(self, t: float) -> int:
        return bisect.bisect_right(self.times, t) - 1

    def seen_by(self, viewer: int, cutoff: float) -> int:
        """Index of the latest entry visible to ``viewer`` at ``cutoff``; own changes are always visible."""
        k = self.index_at(cutoff)
        for j in range(len(self.times) - 1, k, -1):
            if self.sources[j] == viewer:
                return j
        return k


class Simulation:
    def __init__(self, scenario: Scenario, config: SimConfig):
        self.s = scenario
        self.c = config
        self.now = 0.0
        self.depot = scenario.depot
        self.rng = np.random.default_rng(config.seed)
        labels = scenario.labels
        if labels is None and config.shuffle_labels:
            labels = shuffled_labels(scenario.num_robots, config.seed)
        self.labels = labels or tuple(range(1, scenario.num_robots + 1))
        self.horizon = (
            config.horizon
            if config.horizon is not None
            else max((t.deadline for t in scenario.tasks), default=0.0)
        )
        self.tasks: dict[int, Task] = {t.id: t for t in scenario.tasks}
        self.task_hist: dict[int, _History] = {}
        for t in scenario.tasks:
            h = _History(t)
            self.task_hist[t.id] = h
            if t.arrival_time <= 0:
                # static tasks are known before the mission starts
                self.tasks[t.id] = t.transition(TaskState(TaskStatus.ACTIVE, time=0.0))
                h.values[0] = self.tasks[t.id]
        self.robots: dict[int, _Robot] = {}
        self.published: dict[int, _History] = {}
        for i, label in enumerate(self.labels, start=1):
            r = _Robot(i, label, scenario.depot, scenario.max_range, scenario.payload_capacity)
            self.robots[i] = r
            r.projected = self._project(r)
            self.published[i] = _History(r.projected)
        self.log = MissionLog()
        self.queue: list = []
        self._seq = 0
        self.compute = 0.0
        self.decisions = 0
        self.wasted = 0
        self.now = 0.0

    # -- event plumbing -------------------------------------------------
    def _push(self, t: float, prio: int, kind: str, key: int) -> None:
        self._seq += 1
        heapq.heappush(self.queue, (t, prio, self._seq, kind, key))

    def _set_task(self, task: Task, source: Optional[int]) -> None:
        self.tasks[task.id] = task
        self.task_hist[task.id].push(self.now, task, source)

    # -- projections ----------------------------------------------------
    def _project(self, r: _Robot, after: Optional[Action] = None) -> RobotState:
        """State robot ``r`` will be in once free (optionally after ``after``)."""
        loc, t, rng, payload = r.location, max(r.free_at, self.now), r.range_left, r.payload
        if r.target == DEPOT:
            rng, payload = self.s.max_range, self.s.payload_capacity
        elif r.target is not None and not r.idle:
            payload -= 1
        if isinstance(after, GoToTask):
            task = self.tasks[after.task_id]
            d = distance(loc, task.location)
            t += d / self.s.robot_speed + self.s.service_time
            loc, rng, payload = task.location, rng - d, payload - 1
        if isinstance(after, ReturnToDepot) or payload <= 0:
            d = distance(loc, self.depot)
            t += d / self.s.robot_speed
            loc, rng, payload = self.depot, self.s.max_range, self.s.payload_capacity
        return RobotState(
            id=r.id,
            label=r.label,
            location=loc,
            remaining_range=rng,
            payload=payload,
            speed=self.s.robot_speed,
            busy_until=t,
            commitment=after.task_id if isinstance(after, GoToTask) else (DEPOT if after else r.target),
        )

    def _self_state(self, r: _Robot) -> RobotState:
        payload = r.payload - (1 if r.target not in (None, DEPOT) and not r.idle else 0)
        rng, loc = r.range_left, r.location
        if r.target == DEPOT:
            rng, payload = self.s.max_range, self.s.payload_capacity
        return RobotState(
            id=r.id,
            label=r.label,
            location=loc,
            remaining_range=rng,
            payload=payload,
            speed=self.s.robot_speed,
            busy_until=max(r.free_at, self.now),
            commitment=r.target,
        )

    def _publish(self, r: _Robot, after: Optional[Action] = None) -> None:
        r.projected = self._project(r, after)
        self.published[r.id].push(self.now, r.projected, r.id)

    # -- views ----------------------------------------------------------
    def stale_view(self, robot: int, now: float, latency: float) -> KnownWorld:
        cutoff = now - latency
        me = self.robots[robot]
        mine = {me.target}
        if isinstance(me.pending, GoToTask):
            mine.add(me.pending.task_id)
        tasks = {}
        for tid, hist in self.task_hist.items():
            task = hist.values[hist.seen_by(robot, cutoff)]
            if task.status is TaskStatus.PENDING:
                continue
            if tid in mine and task.status is TaskStatus.ACTIVE:
                task = replace(task, state=TaskState(TaskStatus.COMMITTED, robot, now))
            tasks[tid] = task
        robots = {}
        for rid, hist in self.published.items():
            if rid == robot:
                robots[rid] = self._self_state(self.robots[rid])
            else:
                robots[rid] = hist.values[hist.index_at(cutoff)]
        return KnownWorld(now=now, tasks=tasks, robots=robots, service_time=self.s.service_time)

    # -- mission --------------------------------------------------------
    def run(self) -> tuple[MissionLog, "Metrics"]:
        for t in self.s.tasks:
            if t.arrival_time > 0:
                self._push(t.arrival_time, _ARRIVAL, "arrival", t.id)
            self._push(t.deadline, _EXPIRE, "expire", t.id)
        for r in sorted(self.robots.values(), key=lambda x: x.label):
            self._push(0.0, _DECIDE, "decide", r.id)

        while self.queue:
            t, _, _, kind, key = heapq.heappop(self.queue)
            if t > self.horizon:
                break
            self.now = t
            getattr(self, f"_on_{kind}")(key)
        return self.log, self.metrics()

    def _on_arrival(self, tid: int) -> None:
        task = self.tasks[tid].transition(TaskState(TaskStatus.ACTIVE, time=self.now))
        self._set_task(task, None)
        self.log.append(LogEvent(self.now, 0, "arrival", tid))
        for r in sorted(self.robots.values(), key=lambda x: x.label):
            if r.idle:
                self._push(self.now + self.c.latency, _DECIDE, "wake", r.id)

    def _on_expire(self, tid: int) -> None:
        task = self.tasks[tid]
        if task.status in (TaskStatus.ACTIVE, TaskStatus.COMMITTED):
            self._set_task(task.transition(TaskState(TaskStatus.EXPIRED, time=self.now)), None)
            self.log.append(LogEvent(self.now, 0, "expire", tid))

    def _on_wake(self, rid: int) -> None:
        if self.robots[rid].idle:
            self._on_decide(rid)

    def _on_decide(self, rid: int) -> None:
        r = self.robots[rid]
        world = self.stale_view(rid, self.now, self.c.latency)
        p, depot = self.s.incentive, self.depot
        start = time.perf_counter()
        if self.c.policy == "dec-mrta":
            action = decide_dec_mrta(rid, world, p, depot)
        else:
            action = decide_random_feasible(rid, world, p, depot, self.rng)
        spent = time.perf_counter() - start
        self.compute += spent
        self.decisions += 1
        chosen = action.task_id if isinstance(action, GoToTask) else 0
        self.log.append(LogEvent(self.now, rid, "decide", chosen, compute_ms=spent * 1e3))

        if isinstance(action, GoToTask):
            task = self.tasks[action.task_id]
            # under a stale view the task may already be held or done; the truth keeps the first holder
            if task.status is TaskStatus.ACTIVE:
                self._set_task(task.transition(TaskState(TaskStatus.COMMITTED, rid, self.now)), rid)
        at_rest = r.idle or r.target is None or self.now >= r.free_at
        if isinstance(action, ReturnToDepot) and at_rest and r.location == depot:
            r.idle, r.target, r.pending = True, None, None
            r.range_left, r.payload = self.s.max_range, self.s.payload_capacity
            self._publish(r)
            self.log.append(LogEvent(self.now, rid, "idle"))
            return
        r.idle = False
        r.pending = action
        self._publish(r, action)
        if at_rest:
            self._start_pending(r)

    def _start_pending(self, r: _Robot) -> None:
        action, r.pending = r.pending, None
        if isinstance(action, GoToTask):
            task = self.tasks[action.task_id]
            dest, target = task.location, task.id
        else:
            dest, target = self.depot, DEPOT
        d = distance(r.location, dest)
        r.range_left -= d
        r.flown += d
        r.tour_distance += d
        r.location, r.target = dest, target
        extra = self.s.service_time if target != DEPOT else 0.0
        r.free_at = self.now + d / self.s.robot_speed + extra
        self.log.append(LogEvent(self.now, r.id, "depart", target, distance=d))
        self._push(r.free_at, _LEG_END, "leg_end", r.id)
        if target != DEPOT:
            lead_at = max(self.now, r.free_at - self.c.decision_lead)
            if lead_at < r.free_at:
                self._push(lead_at, _DECIDE, "lead_decide", r.id)

    def _on_lead_decide(self, rid: int) -> None:
        r = self.robots[rid]
        if r.pending is None and r.target not in (None, DEPOT) and self.now < r.free_at:
            self._on_decide(rid)

    def _on_leg_end(self, rid: int) -> None:
        r = self.robots[rid]
        if r.target == DEPOT:
            r.range_left, r.payload = self.s.max_range, self.s.payload_capacity
            r.tour_served, r.tour_distance = 0, 0.0
            r.target, r.pending = None, None
            self.log.append(LogEvent(self.now, rid, "reload"))
            self._on_decide(rid)
            return
        tid = r.target
        outcome, task = resolve_conflict_at_task(self.tasks[tid], rid, self.now)
        r.target = None
        if outcome == "wasted":
            self.wasted += 1
            self.log.append(LogEvent(self.now, rid, "wasted", tid))
            if isinstance(r.pending, GoToTask):
                self._publish(r, r.pending)
                self._start_pending(r)
            else:
                r.pending = None
                self._on_decide(rid)
            return
        self._set_task(task, rid)
        r.payload -= 1
        r.tour_served += 1
        self.log.append(LogEvent(self.now, rid, "complete", tid))
        if r.pending is not None:
            self._start_pending(r)
        else:
            self._on_decide(rid)

    # -- results --------------------------------------------------------
    def metrics(self) -> Metrics:
        n = len(self.tasks)
        done = sum(1 for t in self.tasks.values() if t.status is TaskStatus.COMPLETED)
        expired = sum(
            1
            for t in self.tasks.values()
            if t.status is not TaskStatus.COMPLETED and t.deadline <= max(self.horizon, self.now)
        )
        flown = tuple(self.robots[i].flown for i in sorted(self.robots))
        m = len(self.robots)
        return Metrics(
            completion_rate=done / n if n else 1.0,
            tasks_completed=done,
            tasks_expired=expired,
            unattempted=n - done - expired,
            wasted_trips=self.wasted,
            decisions=self.decisions,
            cumulative_compute=self.compute,
            mean_robot_compute=self.compute / m,
            distance_flown=flown,
        )


def run_mission(scenario: Scenario, config: SimConfig = SimConfig()) -> tuple[MissionLog, Metrics]:
    return Simulation(scenario, config).run()


def check_mission(scenario: Scenario, log: MissionLog) -> list[str]:
    """Deadline, range, payload and uniqueness checks over a mission log."""
    problems = []
    tasks = {t.id: t for t in scenario.tasks}
    last = -np.inf
    completed: dict[int, float] = {}
    tour_served: dict[int, int] = {}
    tour_dist: dict[int, float] = {}
    pos: dict[int, object] = {}
    for e in log:
        if e.time < last:
            problems.append(f"time goes backwards at {e}")
        last = e.time
        if e.kind == "complete":
            if e.task in completed:
                problems.append(f"task {e.task} completed twice")
            completed[e.task] = e.time
            if e.time > tasks[e.task].deadline + 1e-9:
                problems.append(f"task {e.task} completed at {e.time} after deadline {tasks[e.task].deadline}")
            tour_served[e.robot] = tour_served.get(e.robot, 0) + 1
            if tour_served[e.robot] > scenario.payload_capacity:
                problems.append(f"robot {e.robot} served more than Q={scenario.payload_capacity} in one tour")
        elif e.kind == "depart":
            tour_dist[e.robot] = tour_dist.get(e.robot, 0.0) + e.distance
            if tour_dist[e.robot] > scenario.max_range + 1e-9:
                problems.append(f"robot {e.robot} exceeded range: {tour_dist[e.robot]:.3f}")
            if e.task != DEPOT:
                left = scenario.max_range - tour_dist[e.robot]
                home = distance(tasks[e.task].location, scenario.depot)
                if left < home - 1e-9:
                    problems.append(f"robot {e.robot} would strand after task {e.task}")
        elif e.kind in ("reload", "idle"):
            tour_served[e.robot] = 0
            tour_dist[e.robot] = 0.0
    return problems


def _rows(scenario: Scenario, config: SimConfig, m: int, seeds: Iterable[int]) -> list[dict]:
    rows = []
    base = scenario.with_robots(m)
    for seed in seeds:
        cfg = replace(config, seed=seed)
        _, met = run_mission(base, cfg)
        row = {
            "scenario": scenario.digest(),
            "m": m,
            "L": cfg.latency,
            "policy": cfg.policy,
            "seed": seed,
        }
        row.update(met.row())
        rows.append(row)
    return rows


def sweep_swarm_size(
    scenario: Scenario, sizes: Sequence[int], config: SimConfig = SimConfig(), seeds: Iterable[int] = (0,)
) -> list[dict]:
    seeds = list(seeds)
    return [row for m in sizes for row in _rows(scenario, config, m, seeds)]


def sweep_latency(
    scenario: Scenario,
    sizes: Sequence[int],
    latencies: Sequence[float],
    config: SimConfig = SimConfig(),
    seeds: Iterable[int] = (0,),
) -> list[dict]:
    seeds = list(seeds)
    return [
        row
        for m in sizes
        for lat in latencies
        for row in _rows(scenario, replace(config, latency=lat), m, seeds)
    ]
