import math
from fractions import Fraction

import numpy as np
import pytest

from decmrta import ilp
from decmrta.domain import GeneratorSpec, IncentiveParams, Point, Scenario, Task, generate_scenario
from decmrta.ilp import RoutePlan


def scenario(points, deadlines=None, m=1, Q=3, h=2, max_range=40.0, **kw):
    deadlines = deadlines or [100.0] * len(points)
    tasks = tuple(Task(i + 1, Point(*p), deadline=dl) for i, (p, dl) in enumerate(zip(points, deadlines)))
    return Scenario(Point(0, 0), tasks, m, 1.0, max_range, Q, IncentiveParams(10, 0.5), max_tours=h, **kw)


def test_instance_without_tasks():
    inst = ilp.build_instance(scenario([]))
    assert inst.d.shape == (2, 2) and not inst.d.any()


def test_instance_distances():
    inst = ilp.build_instance(scenario([(3, 4), (6, 8)]))
    assert inst.d[0, 1] == pytest.approx(5)
    assert inst.d[0, 2] == pytest.approx(10)
    assert inst.d[1, 2] == pytest.approx(5)
    assert inst.d[1, 3] == pytest.approx(5)
    assert inst.ret == 3


def test_service_time_added_at_task_nodes():
    inst = ilp.build_instance(scenario([(3, 4)], service_time=2.0))
    assert inst.t[0, 1] == pytest.approx(7)
    assert inst.t[1, 2] == pytest.approx(5)


@pytest.mark.parametrize(
    "routes, expected",
    [
        ([[]], 0.0),
        ([[[1, 2], [3]]], 2.5),
        ([[[1]], [[2]]], 2.0),
    ],
)
def test_objective(routes, expected):
    plan = RoutePlan.from_lists(routes)
    assert ilp.objective_value(plan) == expected
    assert ilp.objective_fraction(plan) == Fraction(expected)


def test_empty_plan_has_no_violations():
    inst = ilp.build_instance(scenario([(1, 0), (2, 0)], m=2))
    assert ilp.check_constraints(RoutePlan.empty(2), inst).feasible


def test_over_capacity_is_one_payload_violation():
    inst = ilp.build_instance(scenario([(1, 0), (2, 0), (3, 0), (4, 0)], Q=3))
    rep = ilp.check_constraints(RoutePlan.from_lists([[[1, 2, 3, 4]]]), inst)
    assert rep.families() == {"payload": 1}
    assert rep.violations[0].values == (4, 3)


def test_over_range_is_one_range_violation():
    inst = ilp.build_instance(scenario([(0, 3), (0, 7.5)], max_range=12))
    rep = ilp.check_constraints(RoutePlan.from_lists([[[1, 2]]]), inst)
    assert rep.families() == {"range": 1}
    assert rep.violations[0].values == pytest.approx((15, 12))


def test_duplicate_task_is_flagged():
    inst = ilp.build_instance(scenario([(1, 0), (2, 0)], m=2))
    rep = ilp.check_constraints(RoutePlan.from_lists([[[1]], [[1, 2]]]), inst)
    assert "unique" in rep.families()


def test_late_task_is_flagged():
    inst = ilp.build_instance(scenario([(5, 0)], deadlines=[4.0]))
    rep = ilp.check_constraints(RoutePlan.from_lists([[[1]]]), inst)
    assert rep.families() == {"deadline": 1}


def test_second_tour_deadline_counts_first_tour_time():
    # tour 1 takes 10 min round trip, so task 2 (5 km out) is reached at 15
    inst = ilp.build_instance(scenario([(5, 0), (-5, 0)], deadlines=[100.0, 14.0], Q=1))
    assert not ilp.check_constraints(RoutePlan.from_lists([[[1], [2]]]), inst).feasible
    assert ilp.check_constraints(RoutePlan.from_lists([[[2], [1]]]), inst).feasible


def test_structure_errors():
    inst = ilp.build_instance(scenario([(1, 0)], h=1))
    assert "structure" in ilp.check_constraints(RoutePlan.from_lists([[[1]], [[]]]), inst).families()
    assert "structure" in ilp.check_constraints(RoutePlan.from_lists([[[9]]]), inst).families()
    assert "structure" in ilp.check_constraints(RoutePlan.from_lists([[[], [1]]]), inst).families()


def test_repeated_task_in_a_tour_is_caught():
    inst = ilp.build_instance(scenario([(1, 0), (2, 0)]))
    assert not ilp.check_constraints(RoutePlan.from_lists([[[1, 2, 1]]]), inst).feasible


def test_literal_deadline_form_rejects_timely_second_tour():
    inst = ilp.build_instance(scenario([(5, 0), (-5, 0)], deadlines=[100.0, 40.0], Q=1))
    plan = RoutePlan.from_lists([[[1], [2]]])
    assert ilp.check_constraints(plan, inst).feasible
    assert not ilp.check_literal_deadline(plan, inst).feasible


def test_plan_round_trip():
    plan = RoutePlan.from_lists([[[3, 1], [2]], []])
    assert ilp.load_plan(plan.dumps()) == plan


@pytest.mark.parametrize("text", ["", "{}", '{"robots": 3}', '{"robots": [[["a"]]]}'])
def test_bad_plan_text(text):
    with pytest.raises(ilp.PlanError):
        ilp.load_plan(text)


def test_solve_without_tasks():
    res = ilp.solve_exact(ilp.build_instance(scenario([])))
    assert res.objective == 0 and res.optimal and res.plan.served_count() == 0


def test_solve_single_task():
    res = ilp.solve_exact(ilp.build_instance(scenario([(3, 4)])))
    assert res.plan.routes == (((1,),),)
    assert res.objective == 1.0


def test_solve_two_tours():
    inst = ilp.build_instance(scenario([(3, 4), (-3, 4)], Q=1, h=2))
    res = ilp.solve_exact(inst)
    assert res.objective == 1.5
    assert res.plan.served_count() == 2
    assert ilp.enumerate_oracle(inst)[1] == 1.5


def test_unmeetable_deadline_left_out():
    inst = ilp.build_instance(scenario([(3, 4), (8, 0)], deadlines=[100.0, 7.0]))
    res = ilp.solve_exact(inst)
    assert res.plan.served() == {1}
    plan, obj = ilp.enumerate_oracle(inst)
    assert plan.served() == {1} and obj == 1.0


def test_oracle_without_tasks():
    assert ilp.enumerate_oracle(ilp.build_instance(scenario([], m=2)))[1] == 0.0


def test_solver_guard():
    inst = ilp.build_instance(generate_scenario(GeneratorSpec(n=13, m=2), 0))
    with pytest.raises(ilp.SearchTooLarge):
        ilp.solve_exact(inst)


def test_oracle_guard():
    inst = ilp.build_instance(generate_scenario(GeneratorSpec(n=9, m=3), 0))
    with pytest.raises(ilp.SearchTooLarge):
        ilp.enumerate_oracle(inst)


def test_count_plans_small_cases():
    assert ilp.count_plans(0, 3) == 1
    assert ilp.count_plans(1, 2) == 3  # unserved, bucket 1, bucket 2
    assert ilp.count_plans(2, 1) == 1 + 2 + 2  # {}, {a}, {b}, (a,b), (b,a)
    assert ilp.count_plans(2, 1, capacity=1) == 3


def _random_instance(rng):
    n, m, h = int(rng.integers(0, 6)), int(rng.integers(1, 3)), int(rng.integers(1, 3))
    pts = rng.uniform(-8, 8, size=(n, 2))
    deadlines = rng.uniform(5, 40, size=n)
    s = scenario(
        [tuple(p) for p in pts],
        deadlines=list(deadlines),
        m=m,
        Q=int(rng.integers(1, 4)),
        h=h,
        max_range=float(rng.uniform(15, 40)),
    )
    return ilp.build_instance(s)


@pytest.mark.parametrize("bound", ["count", "slots"])
def test_solver_agrees_with_oracle(bound):
    rng = np.random.default_rng(7)
    for _ in range(40):
        inst = _random_instance(rng)
        res = ilp.solve_exact(inst, bound=bound)
        oracle_plan, oracle = ilp.enumerate_oracle(inst)
        assert res.optimal
        assert ilp.objective_fraction(res.plan) == ilp.objective_fraction(oracle_plan)
        assert res.objective == pytest.approx(oracle, abs=1e-12)
        assert res.plan.served_count() == oracle_plan.served_count()
        assert ilp.check_constraints(res.plan, inst).feasible


def test_timeout_returns_feasible_incumbent():
    inst = ilp.build_instance(generate_scenario(GeneratorSpec(n=12, m=3), 4))
    res = ilp.solve_exact(inst, timeout=0.05)
    assert ilp.check_constraints(res.plan, inst).feasible
    assert res.elapsed < 5


def test_turnaround_delays_later_tours():
    s = scenario([(5, 0), (-5, 0)], deadlines=[100.0, 17.0], Q=1)
    plan = RoutePlan.from_lists([[[1], [2]]])
    assert ilp.check_constraints(plan, ilp.build_instance(s)).feasible
    assert not ilp.check_constraints(plan, ilp.build_instance(s, turnaround=3.0)).feasible
    assert math.isinf(ilp.build_instance(s).deadline[0])
