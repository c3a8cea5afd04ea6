"""Domain types, geometry helpers, and scenario loading/generation.

Units are kilometres for length and minutes for time throughout the package.
"""

from __future__ import annotations

import enum
import hashlib
import json
import math
from dataclasses import dataclass, field, replace
from typing import Any, Iterable, Optional, Sequence

import numpy as np

DEPOT = 0


class ScenarioError(ValueError):
    """Raised when a scenario document or generator spec is invalid."""


class InvalidParameter(ValueError):
    pass


@dataclass(frozen=True)
class Point:
    x: float
    y: float

    def __post_init__(self) -> None:
        if not (math.isfinite(self.x) and math.isfinite(self.y)):
            raise InvalidParameter(f"non-finite coordinates ({self.x}, {self.y})")

    def as_list(self) -> list[float]:
        return [self.x, self.y]


def distance(a: Point, b: Point) -> float:
    # written out (not hypot) so scalar and vectorized paths round identically
    dx, dy = a.x - b.x, a.y - b.y
    return math.sqrt(dx * dx + dy * dy)


def travel_time(d: float, speed: float) -> float:
    if not speed > 0:
        raise InvalidParameter(f"speed must be positive, got {speed}")
    return d / speed


class TaskStatus(enum.Enum):
    PENDING = "pending"
    ACTIVE = "active"
    COMMITTED = "committed"
    COMPLETED = "completed"
    EXPIRED = "expired"


_ALLOWED = {
    TaskStatus.PENDING: {TaskStatus.ACTIVE},
    TaskStatus.ACTIVE: {TaskStatus.COMMITTED, TaskStatus.EXPIRED},
    TaskStatus.COMMITTED: {TaskStatus.COMPLETED, TaskStatus.EXPIRED},
    TaskStatus.COMPLETED: set(),
    TaskStatus.EXPIRED: set(),
}


@dataclass(frozen=True)
class TaskState:
    status: TaskStatus = TaskStatus.PENDING
    robot: Optional[int] = None
    time: Optional[float] = None


@dataclass(frozen=True)
class Task:
    id: int
    location: Point
    deadline: float
    arrival_time: float = 0.0
    state: TaskState = field(default_factory=TaskState)

    def __post_init__(self) -> None:
        if self.id < 1:
            raise ScenarioError(f"task id must be >= 1, got {self.id}")
        if not self.deadline > self.arrival_time:
            raise ScenarioError(
                f"task {self.id}: deadline {self.deadline} must exceed arrival {self.arrival_time}"
            )
        st = self.state
        if st.status is TaskStatus.COMMITTED and st.robot is None:
            raise ScenarioError(f"task {self.id}: committed state needs a robot")
        if st.status is TaskStatus.COMPLETED and (st.time is None or st.time > self.deadline):
            raise ScenarioError(f"task {self.id}: completion time must be <= deadline")

    @property
    def status(self) -> TaskStatus:
        return self.state.status

    def transition(self, new: TaskState) -> "Task":
        """Return a copy in state ``new``; illegal lifecycle moves raise."""
        if new.status not in _ALLOWED[self.state.status]:
            raise ScenarioError(
                f"task {self.id}: illegal transition {self.state.status.value} -> {new.status.value}"
            )
        return replace(self, state=new)


@dataclass(frozen=True)
class RobotState:
    id: int
    label: int
    location: Point
    remaining_range: float
    payload: int
    speed: float
    busy_until: float = 0.0
    commitment: Optional[int] = None  # task id, DEPOT, or None when idle


@dataclass(frozen=True)
class IncentiveParams:
    alpha: float = 10.0
    epsilon: float = 0.0

    def __post_init__(self) -> None:
        if not self.alpha > 0:
            raise ScenarioError(f"incentive.alpha must be positive, got {self.alpha}")
        if not self.epsilon >= 0:
            raise ScenarioError(f"incentive.epsilon must be non-negative, got {self.epsilon}")


@dataclass(frozen=True)
class Scenario:
    depot: Point
    tasks: tuple[Task, ...]
    num_robots: int
    robot_speed: float
    max_range: float
    payload_capacity: int
    incentive: IncentiveParams
    max_tours: int = 1
    service_time: float = 0.0
    labels: Optional[tuple[int, ...]] = None

    def __post_init__(self) -> None:
        if self.num_robots < 1:
            raise ScenarioError("robots must be >= 1")
        if self.payload_capacity < 1:
            raise ScenarioError("payload_capacity must be >= 1")
        if not self.max_range > 0:
            raise ScenarioError("max_range must be positive")
        if self.max_tours < 1:
            raise ScenarioError("max_tours must be >= 1")
        if not self.robot_speed > 0:
            raise ScenarioError("speed must be positive")
        if self.service_time < 0:
            raise ScenarioError("service_time must be non-negative")
        ids = [t.id for t in self.tasks]
        if len(set(ids)) != len(ids):
            raise ScenarioError("tasks: duplicate task id")
        if self.labels is not None and sorted(self.labels) != list(range(1, self.num_robots + 1)):
            raise ScenarioError(f"labels: {list(self.labels)} is not a permutation of 1..{self.num_robots}")

    @property
    def n(self) -> int:
        return len(self.tasks)

    @property
    def unreachable(self) -> frozenset[int]:
        """Ids of tasks that no robot can visit and return from on a full tank."""
        return frozenset(
            t.id for t in self.tasks if 2 * distance(self.depot, t.location) > self.max_range
        )

    def task(self, task_id: int) -> Task:
        for t in self.tasks:
            if t.id == task_id:
                return t
        raise KeyError(task_id)

    def robot_labels(self) -> tuple[int, ...]:
        return self.labels if self.labels is not None else tuple(range(1, self.num_robots + 1))

    def initial_robots(self) -> list[RobotState]:
        return [
            RobotState(
                id=i + 1,
                label=label,
                location=self.depot,
                remaining_range=self.max_range,
                payload=self.payload_capacity,
                speed=self.robot_speed,
            )
            for i, label in enumerate(self.robot_labels())
        ]

    def with_robots(self, m: int, labels: Optional[Sequence[int]] = None) -> "Scenario":
        return replace(self, num_robots=m, labels=tuple(labels) if labels is not None else None)

    def to_document(self) -> dict[str, Any]:
        doc: dict[str, Any] = {
            "depot": self.depot.as_list(),
            "speed": self.robot_speed,
            "max_range": self.max_range,
            "payload_capacity": self.payload_capacity,
            "max_tours": self.max_tours,
            "incentive": {"alpha": self.incentive.alpha, "epsilon": self.incentive.epsilon},
            "robots": self.num_robots,
            "tasks": [
                {"id": t.id, "loc": t.location.as_list(), "deadline": t.deadline, "arrival": t.arrival_time}
                for t in self.tasks
            ],
        }
        if self.service_time:
            doc["service_time"] = self.service_time
        if self.labels is not None:
            doc["labels"] = list(self.labels)
        return doc

    def dumps(self) -> str:
        return json.dumps(self.to_document(), sort_keys=True, indent=1) + "\n"

    def digest(self) -> str:
        """Short stable hash of the canonical serialization."""
        canon = json.dumps(self.to_document(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canon.encode()).hexdigest()[:12]


def _num(doc: dict, key: str, kind=float, where: str = "") -> Any:
    name = f"{where}{key}"
    if key not in doc:
        raise ScenarioError(f"missing field '{name}'")
    value = doc[key]
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ScenarioError(f"field '{name}' must be a number, got {value!r}")
    if kind is int:
        if float(value) != int(value):
            raise ScenarioError(f"field '{name}' must be an integer, got {value!r}")
        return int(value)
    value = float(value)
    if not math.isfinite(value):
        raise ScenarioError(f"field '{name}' must be finite")
    return value


def _point(value: Any, name: str) -> Point:
    if not isinstance(value, (list, tuple)) or len(value) != 2:
        raise ScenarioError(f"field '{name}' must be an [x, y] pair")
    try:
        return Point(float(value[0]), float(value[1]))
    except (TypeError, ValueError, InvalidParameter) as exc:
        raise ScenarioError(f"field '{name}': {exc}") from None


def scenario_from_document(doc: dict[str, Any]) -> Scenario:
    if not isinstance(doc, dict):
        raise ScenarioError("scenario document must be an object")
    depot = _point(doc.get("depot"), "depot")
    max_range = _num(doc, "max_range")
    inc = doc.get("incentive", {})
    if not isinstance(inc, dict):
        raise ScenarioError("field 'incentive' must be an object")
    alpha = _num(inc, "alpha", where="incentive.") if "alpha" in inc else 10.0
    epsilon = _num(inc, "epsilon", where="incentive.") if "epsilon" in inc else 0.05 * max_range
    try:
        incentive = IncentiveParams(alpha, epsilon)
    except ScenarioError as exc:
        raise ScenarioError(str(exc)) from None

    raw_tasks = doc.get("tasks", [])
    if not isinstance(raw_tasks, list):
        raise ScenarioError("field 'tasks' must be a list")
    tasks = []
    for k, rt in enumerate(raw_tasks):
        where = f"tasks[{k}]."
        if not isinstance(rt, dict):
            raise ScenarioError(f"tasks[{k}] must be an object")
        tasks.append(
            Task(
                id=_num(rt, "id", int, where),
                location=_point(rt.get("loc"), f"{where}loc"),
                deadline=_num(rt, "deadline", where=where),
                arrival_time=_num(rt, "arrival", where=where) if "arrival" in rt else 0.0,
            )
        )
    labels = doc.get("labels")
    if labels is not None:
        if not isinstance(labels, list) or not all(isinstance(v, int) for v in labels):
            raise ScenarioError("field 'labels' must be a list of integers")
        labels = tuple(labels)
    m = _num(doc, "robots", int)
    if labels is not None and len(labels) != m:
        raise ScenarioError(f"labels: expected {m} entries, got {len(labels)}")
    return Scenario(
        depot=depot,
        tasks=tuple(tasks),
        num_robots=m,
        robot_speed=_num(doc, "speed"),
        max_range=max_range,
        payload_capacity=_num(doc, "payload_capacity", int),
        incentive=incentive,
        max_tours=_num(doc, "max_tours", int) if "max_tours" in doc else 1,
        service_time=_num(doc, "service_time") if "service_time" in doc else 0.0,
        labels=labels,
    )


def load_scenario(text: str) -> Scenario:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ScenarioError(f"not valid JSON: {exc}") from None
    return scenario_from_document(doc)


@dataclass(frozen=True)
class GeneratorSpec:
    """Parameters of the uniform scenario generator.

    Tasks are placed uniformly in a square of side ``area`` centred on the
    depot.  Deadlines are drawn uniformly from ``deadline_range`` measured
    from each task's arrival.  A ``dynamic_fraction`` of the tasks arrive
    uniformly over ``arrival_window``; the rest are present at time 0.
    """

    n: int = 50
    m: int = 5
    area: float = 20.0
    deadline_range: tuple[float, float] = (30.0, 120.0)
    dynamic_fraction: float = 0.0
    arrival_window: tuple[float, float] = (0.0, 60.0)
    speed: float = 1.0
    max_range: float = 40.0
    payload_capacity: int = 3
    max_tours: int = 2
    alpha: float = 10.0
    epsilon: Optional[float] = None
    service_time: float = 0.0
    ensure_feasible: bool = True


def generate_scenario(spec: GeneratorSpec, seed: int) -> Scenario:
    """Draw a scenario; a pure function of ``(spec, seed)``."""
    lo, hi = spec.deadline_range
    if spec.n < 0 or spec.m < 1:
        raise ScenarioError("generator needs n >= 0 and m >= 1")
    if not (0 < lo <= hi):
        raise ScenarioError(f"deadline_range must satisfy 0 < lo <= hi, got {spec.deadline_range}")
    if hi <= spec.service_time:
        raise ScenarioError(
            f"deadline upper bound {hi} cannot cover the minimal service time {spec.service_time}"
        )
    if not 0.0 <= spec.dynamic_fraction <= 1.0:
        raise ScenarioError("dynamic_fraction must lie in [0, 1]")
    epsilon = 0.05 * spec.max_range if spec.epsilon is None else spec.epsilon
    rng = np.random.default_rng(seed)
    half = spec.area / 2.0
    # a task is usable when a full-range robot can reach it, keep the margin, and return
    reach = (spec.max_range - epsilon) / 2.0
    n_dynamic = int(round(spec.dynamic_fraction * spec.n))
    dynamic = set(rng.choice(spec.n, size=n_dynamic, replace=False).tolist()) if n_dynamic else set()
    a_lo, a_hi = spec.arrival_window

    tasks = []
    for k in range(spec.n):
        arrival = float(rng.uniform(a_lo, a_hi)) if k in dynamic else 0.0
        for _ in range(10_000):
            x, y = rng.uniform(-half, half, size=2)
            d = math.sqrt(x * x + y * y)
            need = d / spec.speed + spec.service_time
            if not spec.ensure_feasible or (d <= reach and need <= hi):
                break
        else:
            raise ScenarioError(
                "could not place a feasible task; enlarge max_range/deadlines or shrink area"
            )
        floor = max(lo, need) if spec.ensure_feasible else lo
        deadline = arrival + float(rng.uniform(floor, hi))
        tasks.append(
            Task(
                id=k + 1,
                location=Point(float(x), float(y)),
                deadline=deadline,
                arrival_time=arrival,
            )
        )
    return Scenario(
        depot=Point(0.0, 0.0),
        tasks=tuple(tasks),
        num_robots=spec.m,
        robot_speed=spec.speed,
        max_range=spec.max_range,
        payload_capacity=spec.payload_capacity,
        incentive=IncentiveParams(spec.alpha, epsilon),
        max_tours=spec.max_tours,
        service_time=spec.service_time,
    )


def shuffled_labels(m: int, seed: int) -> tuple[int, ...]:
    """Random label permutation of 1..m, as robots are labelled at mission start."""
    rng = np.random.default_rng(seed)
    return tuple(int(v) + 1 for v in rng.permutation(m))


def task_index(tasks: Iterable[Task]) -> dict[int, Task]:
    return {t.id: t for t in tasks}
