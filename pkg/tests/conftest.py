import pytest

from decmrta.domain import IncentiveParams, Point, RobotState, Scenario, Task


def make_task(i, x, y, deadline=100.0, arrival=0.0):
    return Task(i, Point(x, y), deadline=deadline, arrival_time=arrival)


def make_robot(i, x=0.0, y=0.0, rng=20.0, payload=3, label=None, busy_until=0.0):
    return RobotState(
        id=i,
        label=label if label is not None else i,
        location=Point(x, y),
        remaining_range=rng,
        payload=payload,
        speed=1.0,
        busy_until=busy_until,
    )


# Documented scenario file example; also used by the CLI tests.
DOC_EXAMPLE = {
    "depot": [0, 0],
    "speed": 1.0,
    "max_range": 20,
    "payload_capacity": 3,
    "max_tours": 2,
    "incentive": {"alpha": 10, "epsilon": 0.5},
    "robots": 1,
    "tasks": [
        {"id": 1, "loc": [3, 4], "deadline": 30, "arrival": 0},
        {"id": 2, "loc": [6, 8], "deadline": 60, "arrival": 0},
    ],
}


@pytest.fixture
def doc_example():
    import copy

    return copy.deepcopy(DOC_EXAMPLE)


def latency_fixture() -> Scenario:
    """Two robots, one static task and one that appears at t=4.

    Robot 1 serves task 1 and is heading home when task 2 appears.  Robot 2
    waits at the depot, wakes at 4 + L and commits to task 2.  With L=1 robot
    1 reloads at 2*sqrt(8) ~ 5.657 without seeing that commitment, wins the
    tie for task 2 on label, flies out and arrives 0.657 min after robot 2
    completed it.
    """
    return Scenario(
        depot=Point(0, 0),
        tasks=(
            Task(1, Point(2, 2), deadline=15.0),
            Task(2, Point(4, 0), deadline=33.0, arrival_time=4.0),
        ),
        num_robots=2,
        robot_speed=1.0,
        max_range=40.0,
        payload_capacity=3,
        incentive=IncentiveParams(alpha=10.0, epsilon=1.0),
        labels=(1, 2),
    )


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import REPORT
    except ImportError:
        return
    if REPORT:
        terminalreporter.section("acceptance criteria")
        for line in REPORT:
            terminalreporter.write_line(line)
