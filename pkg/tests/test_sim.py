import math
import statistics
from dataclasses import replace

import pytest

from decmrta.domain import (
    GeneratorSpec,
    IncentiveParams,
    Point,
    Scenario,
    Task,
    TaskState,
    TaskStatus,
    generate_scenario,
)
from decmrta.sim import (
    LogEvent,
    MissionLog,
    SimConfig,
    Simulation,
    check_mission,
    resolve_conflict_at_task,
    run_mission,
    sweep_latency,
    sweep_swarm_size,
)

from conftest import latency_fixture


def one_task_scenario(**kw):
    t = Task(1, Point(3, 4), deadline=30.0)
    return Scenario(Point(0, 0), (t,), 1, 1.0, 20.0, 3, IncentiveParams(10, 0.5), **kw)


def test_empty_mission_is_vacuous_success():
    s = Scenario(Point(0, 0), (), 3, 1.0, 20.0, 3, IncentiveParams())
    log, met = run_mission(s)
    assert met.completion_rate == 1.0 and met.tasks_completed == 0
    assert check_mission(s, log) == []


def test_single_task_timeline():
    s = one_task_scenario()
    log, met = run_mission(s)
    (done,) = log.of_kind("complete")
    assert done.time == pytest.approx(5.0) and done.task == 1
    assert met.completion_rate == 1.0
    assert met.distance_flown == pytest.approx((10.0,))
    assert [e.kind for e in log] == ["decide", "depart", "decide", "complete", "depart", "reload", "decide", "idle"]


def test_lead_decision_happens_before_leg_end():
    log, _ = run_mission(one_task_scenario(), SimConfig(decision_lead=1.0))
    decisions = [e.time for e in log.of_kind("decide")]
    assert decisions[:2] == pytest.approx([0.0, 4.0])


def test_service_time_extends_the_leg():
    log, _ = run_mission(one_task_scenario(service_time=2.0))
    assert log.of_kind("complete")[0].time == pytest.approx(7.0)


@pytest.mark.parametrize("policy", ["dec-mrta", "rnd-feas"])
def test_reruns_are_byte_identical(policy):
    s = generate_scenario(GeneratorSpec(n=60, m=5, dynamic_fraction=0.4), 3)
    cfg = SimConfig(policy=policy, latency=1.0, seed=9)
    a, _ = run_mission(s, cfg)
    b, _ = run_mission(s, cfg)
    assert a.dumps(timing=False) == b.dumps(timing=False)


def test_seed_changes_random_policy():
    s = generate_scenario(GeneratorSpec(n=60, m=5), 3)
    a, _ = run_mission(s, SimConfig(policy="rnd-feas", seed=1))
    b, _ = run_mission(s, SimConfig(policy="rnd-feas", seed=2))
    assert a.dumps(timing=False) != b.dumps(timing=False)


def test_compute_accounting():
    s = generate_scenario(GeneratorSpec(n=30, m=3), 1)
    log, met = run_mission(s)
    decides = log.of_kind("decide")
    assert met.decisions == len(decides)
    assert met.cumulative_compute == pytest.approx(sum(e.compute_ms for e in decides) / 1e3, rel=1e-6, abs=1e-6)
    assert met.mean_robot_compute == pytest.approx(met.cumulative_compute / 3)


def test_log_format():
    log, _ = run_mission(one_task_scenario())
    lines = log.dumps().splitlines()
    assert lines[0] == "time\trobot\tkind\ttask\tdistance\tcompute_ms"
    assert all(len(line.split("\t")) == 6 for line in lines)
    assert all(len(line.split("\t")) == 5 for line in log.dumps(timing=False).splitlines())


def _sim_with_commit(latency_now=10.0):
    s = Scenario(
        Point(0, 0), (Task(1, Point(5, 0), 50.0), Task(2, Point(0, 5), 50.0)), 2, 1.0, 40.0, 3, IncentiveParams()
    )
    sim = Simulation(s, SimConfig(shuffle_labels=False))
    sim.now = latency_now
    sim._set_task(sim.tasks[1].transition(TaskState(TaskStatus.COMMITTED, 2, latency_now)), 2)
    return sim


def test_stale_view_zero_latency_is_truth():
    sim = _sim_with_commit()
    view = sim.stale_view(1, 10.0, 0.0)
    assert view.tasks == sim.tasks
    assert view.robots[2] == sim.robots[2].projected


def test_stale_view_hides_recent_commitment():
    sim = _sim_with_commit()
    assert sim.stale_view(1, 10.5, 1.0).tasks[1].status is TaskStatus.ACTIVE
    assert sim.stale_view(1, 11.1, 1.0).tasks[1].status is TaskStatus.COMMITTED


def test_own_changes_are_always_visible():
    sim = _sim_with_commit()
    assert sim.stale_view(2, 10.5, 1.0).tasks[1].status is TaskStatus.COMMITTED


def test_static_tasks_visible_from_start():
    sim = _sim_with_commit()
    view = sim.stale_view(1, 0.0, 5.0)
    assert {t.status for t in view.tasks.values()} == {TaskStatus.ACTIVE}


def test_future_tasks_hidden_until_arrival_plus_latency():
    s = latency_fixture()
    sim = Simulation(s, SimConfig())
    sim.now = 4.0
    sim._on_arrival(2)
    assert 2 not in sim.stale_view(1, 4.5, 1.0).tasks
    assert 2 in sim.stale_view(1, 5.0, 1.0).tasks
    assert 2 in sim.stale_view(1, 4.0, 0.0).tasks


def _active(task):
    return task.transition(TaskState(TaskStatus.ACTIVE, time=0.0))


def test_conflict_sole_robot_completes():
    outcome, task = resolve_conflict_at_task(_active(Task(1, Point(1, 0), 10.0)), 1, 2.0)
    assert outcome == "completed" and task.status is TaskStatus.COMPLETED and task.state.robot == 1


def test_conflict_holder_other_robot_still_completes():
    t = _active(Task(1, Point(1, 0), 10.0)).transition(TaskState(TaskStatus.COMMITTED, 2, 0.0))
    outcome, task = resolve_conflict_at_task(t, 1, 2.0)
    assert outcome == "completed" and task.state.robot == 1


def test_conflict_second_arrival_is_wasted():
    t = _active(Task(1, Point(1, 0), 10.0))
    _, done = resolve_conflict_at_task(t, 1, 2.0)
    outcome, after = resolve_conflict_at_task(done, 2, 3.0)
    assert outcome == "wasted" and after is done


def test_conflict_late_arrival_is_wasted():
    outcome, _ = resolve_conflict_at_task(_active(Task(1, Point(1, 0), 10.0)), 1, 10.5)
    assert outcome == "wasted"


def test_latency_fixture_timeline():
    s = latency_fixture()
    log, met = run_mission(s, SimConfig(latency=1.0, shuffle_labels=False))
    assert met.wasted_trips == 1 and met.tasks_completed == 2
    (wasted,) = log.of_kind("wasted")
    completions = {e.task: e for e in log.of_kind("complete")}
    assert completions[2].robot == 2 and completions[2].time == pytest.approx(9.0)
    assert wasted.robot == 1 and wasted.task == 2
    assert wasted.time == pytest.approx(2 * math.sqrt(8) + 4.0)
    assert check_mission(s, log) == []


def test_latency_fixture_is_clean_without_latency():
    s = latency_fixture()
    log, met = run_mission(s, SimConfig(latency=0.0, shuffle_labels=False))
    assert met.wasted_trips == 0 and met.tasks_completed == 2
    assert check_mission(s, log) == []


def test_metrics_partition_tasks():
    s = generate_scenario(GeneratorSpec(n=80, m=3, dynamic_fraction=0.5), 2)
    _, met = run_mission(s, SimConfig(latency=1.0))
    assert met.tasks_completed + met.tasks_expired + met.unattempted == s.n
    assert 0.0 <= met.completion_rate <= 1.0


def test_horizon_cuts_mission():
    s = generate_scenario(GeneratorSpec(n=40, m=2), 2)
    log, met = run_mission(s, SimConfig(horizon=10.0))
    assert max(e.time for e in log) <= 10.0
    assert met.unattempted > 0


def test_dynamic_tasks_not_served_before_arrival():
    s = generate_scenario(GeneratorSpec(n=60, m=6, dynamic_fraction=0.7), 8)
    log, _ = run_mission(s, SimConfig(latency=1.0))
    arrival = {t.id: t.arrival_time for t in s.tasks}
    for e in log.of_kind("complete"):
        assert e.time >= arrival[e.task]


@pytest.mark.parametrize("seed", range(6))
@pytest.mark.parametrize("latency", [0.0, 1.0])
@pytest.mark.parametrize("policy", ["dec-mrta", "rnd-feas"])
def test_missions_are_sound(seed, latency, policy):
    spec = GeneratorSpec(n=50, m=1 + seed, dynamic_fraction=0.3, service_time=0.5 * (seed % 2))
    s = generate_scenario(spec, seed)
    log, met = run_mission(s, SimConfig(policy=policy, latency=latency, seed=seed))
    assert check_mission(s, log) == []
    if latency == 0.0:
        assert met.wasted_trips == 0


def test_check_mission_flags_problems():
    s = one_task_scenario()
    log = MissionLog(
        [
            LogEvent(0.0, 1, "depart", 1, distance=5.0),
            LogEvent(31.0, 1, "complete", 1),
            LogEvent(31.0, 1, "complete", 1),
            LogEvent(30.0, 1, "depart", 0, distance=16.0),
        ]
    )
    problems = " | ".join(check_mission(s, log))
    for fragment in ("after deadline", "completed twice", "backwards", "exceeded range"):
        assert fragment in problems


def test_sweep_single_size():
    s = generate_scenario(GeneratorSpec(n=20, m=1), 0)
    rows = sweep_swarm_size(s, [1])
    assert len(rows) == 1
    assert math.isfinite(rows[0]["mean_robot_compute_s"])
    assert rows[0]["scenario"] == s.digest()


def test_sweep_completion_grows_with_swarm():
    s = generate_scenario(GeneratorSpec(n=50, m=1), 5)
    rows = sweep_swarm_size(s, [1, 2, 4], SimConfig(), range(10))
    means = [statistics.fmean(r["completion_rate"] for r in rows if r["m"] == m) for m in (1, 2, 4)]
    assert means == sorted(means)


def test_latency_zero_reduces_to_size_sweep():
    s = generate_scenario(GeneratorSpec(n=30, m=1), 5)
    strip = lambda rows: [{k: v for k, v in r.items() if "compute" not in k} for r in rows]
    a = sweep_latency(s, [1, 3], [0.0], SimConfig(), range(2))
    b = sweep_swarm_size(s, [1, 3], SimConfig(), range(2))
    assert strip(a) == strip(b)


def test_config_validation():
    with pytest.raises(ValueError):
        SimConfig(policy="greedy")
    with pytest.raises(ValueError):
        SimConfig(latency=-1)


def test_fixed_labels_override_shuffle():
    s = replace(latency_fixture(), labels=(2, 1))
    sim = Simulation(s, SimConfig(seed=5))
    assert [sim.robots[i].label for i in (1, 2)] == [2, 1]
