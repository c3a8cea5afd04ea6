"""Robot incentive model, feasibility filtering, and bigraph construction."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Optional, Sequence

import numpy as np

from .domain import IncentiveParams, Point, RobotState, Task, distance, travel_time


@dataclass(frozen=True)
class FeasibleTask:
    task_id: int
    completion_time: float
    post_range: float
    weight: float


@dataclass(frozen=True)
class WeightedBigraph:
    """Robots x tasks with positive incentive weights.

    ``weights[i, j]`` is the weight of edge (robots[i], tasks[j]); a zero
    entry means "no edge".  Tasks are kept sorted by id.
    """

    robots: tuple[int, ...]
    tasks: tuple[int, ...]
    weights: np.ndarray
    labels: Mapping[int, int] = field(default_factory=dict)

    def __post_init__(self) -> None:
        w = np.asarray(self.weights, dtype=float).reshape(len(self.robots), len(self.tasks))
        if np.any(w < 0) or not np.all(np.isfinite(w)):
            raise ValueError("edge weights must be finite and non-negative")
        object.__setattr__(self, "weights", w)
        if list(self.tasks) != sorted(set(self.tasks)):
            raise ValueError("task vertices must be distinct and sorted by id")
        if len(set(self.robots)) != len(self.robots):
            raise ValueError("robot vertices must be distinct")

    @classmethod
    def from_edges(
        cls,
        edges: Iterable[tuple[int, int, float]],
        robots: Optional[Sequence[int]] = None,
        labels: Optional[Mapping[int, int]] = None,
    ) -> "WeightedBigraph":
        edges = list(edges)
        robot_ids = list(robots) if robots is not None else sorted({r for r, _, _ in edges})
        task_ids = sorted({t for _, t, _ in edges})
        rpos = {r: i for i, r in enumerate(robot_ids)}
        tpos = {t: j for j, t in enumerate(task_ids)}
        w = np.zeros((len(robot_ids), len(task_ids)))
        for r, t, wt in edges:
            if wt > 0:
                w[rpos[r], tpos[t]] = wt
        return cls(tuple(robot_ids), tuple(task_ids), w, dict(labels or {}))

    def label(self, robot: int) -> int:
        return self.labels.get(robot, robot)

    @property
    def edges(self) -> list[tuple[int, int, float]]:
        rows, cols = np.nonzero(self.weights > 0)
        return [
            (self.robots[i], self.tasks[j], float(self.weights[i, j])) for i, j in zip(rows, cols)
        ]

    def weight(self, robot: int, task: int) -> float:
        try:
            return float(self.weights[self.robots.index(robot), self.tasks.index(task)])
        except ValueError:
            return 0.0


def post_task_range(robot: RobotState, task: Task, depot: Point) -> float:
    return robot.remaining_range - (distance(robot.location, task.location) + distance(task.location, depot))


def completion_time(robot: RobotState, task: Task, now: float, service_time: float = 0.0) -> float:
    return now + travel_time(distance(robot.location, task.location), robot.speed) + service_time


def incentive(post_range: float, t: float, deadline: float, p: IncentiveParams) -> float:
    if t > deadline:
        return 0.0
    return max(0.0, post_range - p.epsilon) * math.exp(-t / p.alpha)


def edge_weight(
    robot: RobotState,
    task: Task,
    now: float,
    p: IncentiveParams,
    depot: Point,
    service_time: float = 0.0,
) -> float:
    t = completion_time(robot, task, now, service_time)
    return incentive(post_task_range(robot, task, depot), t, task.deadline, p)


def get_feasible_tasks(
    tasks: Iterable[Task],
    robot: RobotState,
    now: float,
    p: IncentiveParams,
    depot: Point,
    service_time: float = 0.0,
) -> list[FeasibleTask]:
    """Tasks robot can finish before the deadline while keeping the range margin.

    Entries whose weight is exactly zero (post-task range equal to the margin)
    are dropped so they never enter the matching.
    """
    out = []
    for task in tasks:
        t = completion_time(robot, task, now, service_time)
        rng = post_task_range(robot, task, depot)
        if t <= task.deadline and rng >= p.epsilon:
            w = incentive(rng, t, task.deadline, p)
            if w > 0:
                out.append(FeasibleTask(task.id, t, rng, w))
    return out


def construct_bigraph(
    per_robot: Mapping[int, Sequence[FeasibleTask]],
    labels: Optional[Mapping[int, int]] = None,
) -> WeightedBigraph:
    edges = [(r, f.task_id, f.weight) for r, feas in per_robot.items() for f in feas]
    return WeightedBigraph.from_edges(edges, robots=list(per_robot), labels=labels)


class TaskArrays:
    """Column view of a task list for the vectorized feasibility path."""

    def __init__(self, tasks: Sequence[Task], depot: Point):
        self.ids = np.array([t.id for t in tasks], dtype=np.int64)
        self.xy = np.array([[t.location.x, t.location.y] for t in tasks], dtype=float).reshape(-1, 2)
        self.deadline = np.array([t.deadline for t in tasks], dtype=float)
        dx, dy = self.xy[:, 0] - depot.x, self.xy[:, 1] - depot.y
        self.to_depot = np.sqrt(dx * dx + dy * dy)

    def __len__(self) -> int:
        return len(self.ids)


def weight_matrix(
    robots: Sequence[RobotState],
    start_times: Sequence[float],
    arrays: TaskArrays,
    p: IncentiveParams,
    service_time: float = 0.0,
) -> np.ndarray:
    """Incentive weights for every (robot, task) pair, zero where infeasible.

    Vectorized equivalent of calling :func:`get_feasible_tasks` per robot with
    ``now = start_times[i]``.
    """
    m, n = len(robots), len(arrays)
    if m == 0 or n == 0:
        return np.zeros((m, n))
    loc = np.array([[r.location.x, r.location.y] for r in robots], dtype=float)
    rng = np.array([r.remaining_range for r in robots], dtype=float)
    speed = np.array([r.speed for r in robots], dtype=float)
    now = np.asarray(start_times, dtype=float)
    dx = loc[:, 0:1] - arrays.xy[None, :, 0]
    dy = loc[:, 1:2] - arrays.xy[None, :, 1]
    d = np.sqrt(dx * dx + dy * dy)
    t = now[:, None] + d / speed[:, None] + service_time
    post = rng[:, None] - (d + arrays.to_depot[None, :])
    ok = (t <= arrays.deadline[None, :]) & (post >= p.epsilon)
    w = np.maximum(0.0, post - p.epsilon) * np.exp(-t / p.alpha)
    return np.where(ok, w, 0.0)
