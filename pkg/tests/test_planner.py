import numpy as np
import pytest

from curiosym import planner
from curiosym.model import EncoderConfig, Network
from curiosym.planner import (
    Plan,
    PlanningError,
    PlanningProblem,
    PlanStep,
    bfs_plan,
    enumerate_plans,
    execute_plan,
    goal_check,
    predict_transition,
)
from curiosym.symbols import DistilledPrimitive
from curiosym.world import ObjectSpec, WorldState, execute

from planner_cases import NET, random_problem
from test_world import TRACES

CUBE = ObjectSpec(0.04, 0.04, 0.04, 0)
SMALL_CUBE = ObjectSpec(0.03, 0.03, 0.03, 1)


def two_objects():
    return WorldState([CUBE, SMALL_CUBE], np.array([[0.0, 0.0, 0.02], [0.2, -0.1, 0.015]]), 0)


def zero_net():
    net = Network(EncoderConfig(hidden_width=8, hidden_layers=2), seed=0)
    net.params["dec.fc2.W"][:] = 0.0
    net.params["dec.fc2.b"][:] = 0.0
    return net


def test_goal_check_cases():
    pos = np.array([[0.0, 0.0, 0.02], [0.1, 0.1, 0.02]])
    assert goal_check(pos, pos, 1e-9)
    off = pos.copy()
    off[1, 0] += 0.06
    assert not goal_check(off, pos, 0.05)
    assert goal_check(off, pos, 0.06)
    thresholds = np.linspace(0.001, 0.1, 50)
    results = [goal_check(off, pos, t) for t in thresholds]
    assert results == sorted(results)


def test_problem_validation():
    with pytest.raises(PlanningError):
        PlanningProblem(two_objects(), np.zeros((1, 3)))
    with pytest.raises(PlanningError):
        PlanningProblem(two_objects(), np.zeros((2, 3)), threshold=0)


def test_zero_effect_primitive_leaves_state():
    s = two_objects()
    prim = DistilledPrimitive((0,), TRACES[0][1], 0.0)
    out = predict_transition(zero_net(), s, prim, 1)
    np.testing.assert_array_equal(out.positions, s.positions)


def test_transition_matches_hand_trace():
    s = two_objects()
    prim = DistilledPrimitive((0,), TRACES[0][1], 0.0)
    o = s.objects[1].features()
    z = np.hstack([NET.encode_objects(o), NET.encode_actions(prim.action)])
    mu = NET.decode(z[:, : NET.config.object_bits], z[:, NET.config.object_bits :])[0][0]
    out = predict_transition(NET, s, prim, 1)
    expected = s.positions[1] + mu
    expected[2] = max(expected[2], 0.015)
    np.testing.assert_array_equal(out.positions[1], expected)
    np.testing.assert_array_equal(out.positions[0], s.positions[0])


def test_transition_floors_height():
    net = zero_net()
    net.params["dec.fc2.b"][2] = -5.0  # predicts a 0.5 m drop
    out = predict_transition(net, two_objects(), DistilledPrimitive((0,), np.zeros(12), 0.0), 0)
    assert out.positions[0, 2] == 0.02


def test_invalid_target():
    with pytest.raises(PlanningError):
        predict_transition(NET, two_objects(), DistilledPrimitive((0,), np.zeros(12), 0.0), 2)


def test_already_at_goal():
    s = two_objects()
    library = [DistilledPrimitive((0,), TRACES[0][1], 0.0)]
    plan = bfs_plan(NET, library, PlanningProblem(s, s.positions, 0.01, 3))
    assert plan.found and plan.steps == []
    ex = execute_plan(plan, library, PlanningProblem(s, s.positions, 0.01, 3))
    assert ex.success


def test_empty_library_rejected():
    s = two_objects()
    with pytest.raises(PlanningError):
        bfs_plan(NET, [], PlanningProblem(s, s.positions))


def test_unreachable_goal_respects_node_bound():
    s = two_objects()
    library = [DistilledPrimitive((i,), a, 0.0) for i, a in enumerate(np.random.default_rng(0).uniform(-0.05, 0.05, (3, 12)))]
    goal = s.positions + [[5.0, 0, 0], [0, 0, 0]]
    plan = bfs_plan(NET, library, PlanningProblem(s, goal, 0.01, 3))
    b, d = len(library) * 2, 3
    assert not plan.found
    assert plan.expanded <= (b ** (d + 1) - 1) // (b - 1)
    assert plan.expanded == 1 + b + b * b
    assert plan.generated == 1 + b + b**2 + b**3


def test_plan_matches_exhaustive_enumeration():
    rng = np.random.default_rng(77)
    for _ in range(25):
        library, problem = random_problem(rng, 8)
        plan = bfs_plan(NET, library, problem)
        length, seq = enumerate_plans(NET, library, problem)
        assert plan.found == (length is not None)
        if plan.found:
            assert [(s.primitive_index, s.target_index) for s in plan.steps] == seq
            assert goal_check(plan.predicted_final, problem.goal_positions, problem.threshold)
            assert len(plan.steps) <= problem.max_depth


def test_planning_is_deterministic():
    library, problem = random_problem(np.random.default_rng(3))
    a, b = bfs_plan(NET, library, problem), bfs_plan(NET, library, problem)
    assert a.steps == b.steps and a.expanded == b.expanded


def test_search_never_touches_the_world(monkeypatch):
    def boom(*args, **kwargs):
        raise AssertionError("world called during search")

    monkeypatch.setattr(planner, "execute", boom)
    library, problem = random_problem(np.random.default_rng(4))
    bfs_plan(NET, library, problem)


def test_execution_never_touches_the_model(monkeypatch):
    s = WorldState([CUBE], np.array([[0.0, 0.0, 0.02]]), 0)
    library = [DistilledPrimitive((0,), TRACES[0][1], 0.0)]
    problem = PlanningProblem(s, [[0.07, 0.0, 0.02]], 0.01, 1)
    monkeypatch.setattr(planner, "predict_transition", lambda *a: (_ for _ in ()).throw(AssertionError))
    monkeypatch.setattr(planner, "effect_table", lambda *a: (_ for _ in ()).throw(AssertionError))
    ex = execute_plan(Plan([PlanStep(0, 0)], s.positions, True), library, problem, predicted_effects=[np.zeros(3)])
    assert ex.success
    assert ex.deviations == [pytest.approx(0.07)]


def test_execution_reports_model_world_gap():
    s = WorldState([CUBE], np.array([[0.0, 0.0, 0.02]]), 0)
    library = [DistilledPrimitive((0,), TRACES[0][1], 0.0)]
    predicted = [np.array([0.05, 0.01, 0.0])]
    problem = PlanningProblem(s, [[0.05, 0.0, 0.02]], 0.01, 1)
    ex = execute_plan(Plan([PlanStep(0, 0)], s.positions, True), library, problem, predicted_effects=predicted)
    executed = execute(s, TRACES[0][1]).effect
    assert ex.deviations[0] == pytest.approx(np.linalg.norm(executed - predicted[0]), abs=1e-15)
    assert not ex.success


def test_cannot_execute_missing_plan():
    s = two_objects()
    with pytest.raises(PlanningError):
        execute_plan(Plan([], s.positions, False), [], PlanningProblem(s, s.positions))
