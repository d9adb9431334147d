"""Breadth-first tree search over distilled primitives.

Search uses the model's predicted mean effect; execution uses the world.
The two phases never call into each other.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field

import numpy as np

from .model import Network
from .symbols import DistilledPrimitive
from .world import WorldConfig, WorldState, execute


class PlanningError(ValueError):
    pass


@dataclass
class PlanningProblem:
    initial: WorldState
    goal_positions: np.ndarray
    threshold: float = 0.05
    max_depth: int = 3

    def __post_init__(self):
        self.goal_positions = np.asarray(self.goal_positions, dtype=float).reshape(-1, 3)
        if len(self.goal_positions) != self.initial.count:
            raise PlanningError("need one goal position per object")
        if self.threshold <= 0:
            raise PlanningError("threshold must be positive")
        if self.max_depth < 0:
            raise PlanningError("max_depth must be non-negative")


@dataclass(frozen=True)
class PlanStep:
    primitive_index: int
    target_index: int


@dataclass
class Plan:
    steps: list[PlanStep]
    predicted_final: np.ndarray
    found: bool
    expanded: int = 0
    generated: int = 0


@dataclass
class Execution:
    final: WorldState
    success: bool
    deviations: list[float] = field(default_factory=list)


def goal_check(positions, goal_positions, threshold: float) -> bool:
    """Every object within ``threshold`` (Euclidean) of its goal."""
    d = np.linalg.norm(np.asarray(positions, dtype=float) - np.asarray(goal_positions, dtype=float), axis=1)
    return bool(np.all(d <= threshold))


def predicted_effect(net: Network, state: WorldState, primitive: DistilledPrimitive, target_index: int) -> np.ndarray:
    if not 0 <= target_index < state.count:
        raise PlanningError(f"target index {target_index} out of range for {state.count} objects")
    o = state.objects[target_index].features()
    mu, _ = net.predict(o[None, :], primitive.action[None, :])
    return mu[0]


def _apply(positions, target, effect, half_height):
    out = positions.copy()
    out[target] = out[target] + effect
    out[target, 2] = max(out[target, 2], half_height)
    return out


def predict_transition(net: Network, state: WorldState, primitive: DistilledPrimitive, target_index: int) -> WorldState:
    """Shift the target by the predicted mean effect; z never drops below resting height."""
    mu = predicted_effect(net, state, primitive, target_index)
    pos = _apply(state.positions, target_index, mu, 0.5 * state.objects[target_index].d)
    return WorldState(list(state.objects), pos, state.target_index)


def effect_table(net: Network, state: WorldState, library: list[DistilledPrimitive]) -> np.ndarray:
    """Predicted mean effect of every (primitive, object) pair, shape (P, m, 3).

    Object features never change during search, so one batched call covers
    every transition the planner can take.
    """
    feats = np.array([o.features() for o in state.objects])
    acts = np.array([p.action for p in library])
    P, m = len(library), len(feats)
    mu, _ = net.predict(np.repeat(feats[None], P, 0).reshape(-1, 4), np.repeat(acts, m, 0))
    return mu.reshape(P, m, 3)


def bfs_plan(net: Network, library: list[DistilledPrimitive], problem: PlanningProblem) -> Plan:
    """Shortest primitive sequence whose predicted outcome satisfies the goal.

    Children are ordered by (primitive index, target index); no duplicate
    pruning. Returns ``found=False`` when ``max_depth`` is exhausted.
    """
    if not library:
        raise PlanningError("empty primitive library")
    state = problem.initial
    table = effect_table(net, state, library)
    half = np.array([0.5 * o.d for o in state.objects])
    goal = problem.goal_positions
    root = state.positions.copy()
    if goal_check(root, goal, problem.threshold):
        return Plan([], root, True, 0, 1)

    children = [(p, t) for p in range(len(library)) for t in range(state.count)]
    queue = deque([(root, ())])
    expanded = 0
    generated = 1
    while queue:
        pos, path = queue.popleft()
        if len(path) >= problem.max_depth:
            continue
        expanded += 1
        for p, t in children:
            child = _apply(pos, t, table[p, t], half[t])
            generated += 1
            child_path = path + ((p, t),)
            if goal_check(child, goal, problem.threshold):
                steps = [PlanStep(pi, ti) for pi, ti in child_path]
                return Plan(steps, child, True, expanded, generated)
            queue.append((child, child_path))
    return Plan([], root, False, expanded, generated)


def enumerate_plans(net: Network, library: list[DistilledPrimitive], problem: PlanningProblem):
    """Brute-force reference: ``(length, steps)`` of the first goal-reaching sequence, or ``(None, None)``.

    Every sequence up to ``max_depth`` is rolled out with
    :func:`predict_transition`, independently of the search's effect table.
    Sequences of one length are scanned in lexicographic (primitive, target)
    order, so the answer is the lexicographically first shortest plan.
    """
    if not library:
        raise PlanningError("empty primitive library")
    actions = [(p, t) for p in range(len(library)) for t in range(problem.initial.count)]
    level = [(problem.initial, [])]
    for depth in range(problem.max_depth + 1):
        for state, seq in level:
            if goal_check(state.positions, problem.goal_positions, problem.threshold):
                return depth, seq
        if depth == problem.max_depth:
            break
        level = [(predict_transition(net, s, library[p], t), seq + [(p, t)]) for s, seq in level for p, t in actions]
    return None, None


def execute_plan(
    plan: Plan,
    library: list[DistilledPrimitive],
    problem: PlanningProblem,
    world_config: WorldConfig | None = None,
    predicted_effects: list[np.ndarray] | None = None,
    rng: np.random.Generator | None = None,
) -> Execution:
    """Run the plan open-loop in the world and test the goal on the result."""
    if not plan.found:
        raise PlanningError("cannot execute a plan that was not found")
    cfg = world_config or WorldConfig()
    state = problem.initial.copy()
    deviations = []
    for i, step in enumerate(plan.steps):
        state = state.copy(target_index=step.target_index)
        before = state.positions[step.target_index].copy()
        out = execute(state, library[step.primitive_index].action, cfg, rng)
        state = out.state
        if predicted_effects is not None:
            executed = state.positions[step.target_index] - before
            deviations.append(float(np.linalg.norm(executed - predicted_effects[i])))
    success = goal_check(state.positions, problem.goal_positions, problem.threshold)
    return Execution(state, success, deviations)
