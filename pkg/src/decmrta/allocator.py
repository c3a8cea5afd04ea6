"""Per-robot decision policies: Dec-MRTA matching and the random feasible baseline."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Union

import numpy as np

from .domain import IncentiveParams, Point, RobotState, Task, TaskStatus
from .incentive import TaskArrays, WeightedBigraph, weight_matrix
from .matching import max_weight_matching


class UnknownRobot(KeyError):
    pass


@dataclass(frozen=True)
class GoToTask:
    task_id: int


@dataclass(frozen=True)
class ReturnToDepot:
    pass


Action = Union[GoToTask, ReturnToDepot]


@dataclass(frozen=True)
class KnownWorld:
    """What one robot believes at a decision epoch.

    Robot entries describe each robot at the moment it will next be free:
    ``location`` is where it will be, ``busy_until`` when, and
    ``remaining_range``/``payload`` what it will have left.
    """

    now: float
    tasks: Mapping[int, Task]
    robots: Mapping[int, RobotState]
    service_time: float = 0.0
    _arrays: dict = field(default_factory=dict, compare=False, repr=False)

    def active_tasks(self) -> list[Task]:
        return sorted(
            (t for t in self.tasks.values() if t.status is TaskStatus.ACTIVE), key=lambda t: t.id
        )

    def start_time(self, robot: RobotState) -> float:
        return max(self.now, robot.busy_until)


def _self(r: int, world: KnownWorld) -> RobotState:
    try:
        return world.robots[r]
    except KeyError:
        raise UnknownRobot(f"robot {r} is not part of the known world") from None


def _weights(world: KnownWorld, robots: list[RobotState], active: list[Task], p, depot) -> np.ndarray:
    arrays = TaskArrays(active, depot)
    w = weight_matrix(robots, [world.start_time(x) for x in robots], arrays, p, world.service_time)
    empty = np.array([x.payload <= 0 for x in robots])
    if empty.any():
        w[empty] = 0.0
    return w


def decide_dec_mrta(r: int, world: KnownWorld, p: IncentiveParams, depot: Point) -> Action:
    me = _self(r, world)
    if me.payload <= 0:
        return ReturnToDepot()
    active = world.active_tasks()
    if not active:
        return ReturnToDepot()
    own = _weights(world, [me], active, p, depot)[0]
    if not np.any(own > 0):
        return ReturnToDepot()
    robots = [world.robots[k] for k in sorted(world.robots)]
    w = _weights(world, robots, active, p, depot)
    cols = np.flatnonzero(np.any(w > 0, axis=0))
    g = WeightedBigraph(
        robots=tuple(x.id for x in robots),
        tasks=tuple(active[j].id for j in cols),
        weights=w[:, cols],
        labels={x.id: x.label for x in robots},
    )
    task = max_weight_matching(g).assignment.get(r)
    return GoToTask(task) if task is not None else ReturnToDepot()


def feasible_task_ids(r: int, world: KnownWorld, p: IncentiveParams, depot: Point) -> list[int]:
    me = _self(r, world)
    if me.payload <= 0:
        return []
    active = world.active_tasks()
    if not active:
        return []
    own = _weights(world, [me], active, p, depot)[0]
    return [active[j].id for j in np.flatnonzero(own > 0)]


def decide_random_feasible(
    r: int,
    world: KnownWorld,
    p: IncentiveParams,
    depot: Point,
    rng: np.random.Generator,
) -> Action:
    options = feasible_task_ids(r, world, p, depot)
    if not options:
        return ReturnToDepot()
    if len(options) == 1:
        return GoToTask(options[0])
    return GoToTask(options[int(rng.integers(len(options)))])
