"""Discrete symbols from encoder embeddings, and their continuous realisations.

Codes are read off the tanh bottleneck with a sign threshold. Each action
code is turned back into executable parameters by gradient descent on the
action input of the frozen action encoder.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field

import numpy as np

from .model import Network
from .world import ObjectSpec, WorldConfig, WorldState, action_bounds, execute, total_effect_magnitude

LABELS = ("null", "grasp", "pick and place", "forward push", "pull", "left push", "right push")

# Canonical object used to name primitives: a solid 4 cm cube at the origin.
CANONICAL_OBJECT = ObjectSpec(0.04, 0.04, 0.04, 0)


class DistillationError(RuntimeError):
    """No seed reached the residual bound; the symbol is not realisable."""


@dataclass(frozen=True)
class DistillConfig:
    step_size: float = 0.01
    iterations: int = 500
    seeds: int = 64
    residual_bound: float = 0.25


@dataclass
class DistilledPrimitive:
    code: tuple[int, ...]
    action: np.ndarray
    residual: float
    label: str | None = None
    count: int = 0
    seed_residuals: list[float] = field(default_factory=list, repr=False)

    def to_record(self) -> dict:
        return {
            "code": list(self.code),
            "action": [float(v) for v in self.action],
            "residual": float(self.residual),
            "label": self.label,
            "count": int(self.count),
        }

    @classmethod
    def from_record(cls, rec: dict) -> "DistilledPrimitive":
        return cls(
            tuple(int(b) for b in rec["code"]),
            np.asarray(rec["action"], dtype=float),
            float(rec["residual"]),
            rec.get("label"),
            int(rec.get("count", 0)),
        )


def binarize(embedding) -> np.ndarray:
    """1 where the embedding is strictly positive, else 0."""
    return (np.asarray(embedding) > 0).astype(np.int64)


def code_key(bits) -> tuple[int, ...]:
    return tuple(int(b) for b in np.asarray(bits).reshape(-1))


def code_target(code) -> np.ndarray:
    """Map {0, 1} bits to the tanh extremes {-1, +1}."""
    return 2.0 * np.asarray(code, dtype=float) - 1.0


def enumerate_action_symbols(net: Network, actions) -> dict[tuple[int, ...], int]:
    """Distinct action codes over ``actions`` with their occurrence counts."""
    actions = np.asarray(actions, dtype=float).reshape(-1, 12)
    if len(actions) == 0:
        return {}
    codes = binarize(net.encode_actions(actions))
    return dict(sorted(Counter(code_key(c) for c in codes).items()))


def enumerate_object_symbols(net: Network, objects) -> dict[tuple[int, ...], int]:
    objects = np.asarray(objects, dtype=float).reshape(-1, 4)
    if len(objects) == 0:
        return {}
    codes = binarize(net.encode_objects(objects))
    return dict(sorted(Counter(code_key(c) for c in codes).items()))


def distill_from(net: Network, code, start_actions, config: DistillConfig | None = None):
    """Projected gradient descent from each start; returns ``(actions, residuals)`` per start.

    The residual is the mean squared error between the action embedding and
    ``2 * code - 1``. Network parameters are only read.
    """
    cfg = config or DistillConfig()
    target = code_target(code)
    k = target.size
    lo, hi = action_bounds()
    a = np.clip(np.array(start_actions, dtype=float).reshape(-1, 12), lo, hi)

    def objective(z):
        diff = z - target
        return np.mean(diff * diff, axis=1), 2.0 * diff / k

    for _ in range(cfg.iterations):
        _, _, grad = net.action_input_grad(a, objective)
        a = np.clip(a - cfg.step_size * grad, lo, hi)
    _, residual, _ = net.action_input_grad(a, objective)
    return a, residual


def distill(net: Network, code, seed_actions, config: DistillConfig | None = None) -> DistilledPrimitive:
    """Best realisation of ``code`` among the seeds after descent."""
    cfg = config or DistillConfig()
    actions, residuals = distill_from(net, code, seed_actions, cfg)
    best = int(np.argmin(residuals))
    if not residuals[best] < cfg.residual_bound:
        raise DistillationError(
            f"code {code_key(code)}: best residual {residuals[best]:.4f} >= bound {cfg.residual_bound}"
        )
    return DistilledPrimitive(code_key(code), actions[best], float(residuals[best]), seed_residuals=residuals.tolist())


def sample_seeds(dataset_actions, n: int, rng: np.random.Generator) -> np.ndarray:
    actions = np.asarray(dataset_actions, dtype=float)
    idx = rng.choice(len(actions), size=min(n, len(actions)), replace=False)
    return actions[np.sort(idx)]


def classify_effect(effect, held: bool, lifted: bool, noise_floor: float) -> str:
    """Name an effect signature. The robot stands on the -x side facing +x."""
    e = np.asarray(effect, dtype=float)
    if total_effect_magnitude(e) < noise_floor:
        return "null"
    if held:
        return "grasp"
    if lifted:
        return "pick and place"
    dx, dy = e[0], e[1]
    if abs(dx) >= abs(dy):
        return "forward push" if dx > 0 else "pull"
    return "left push" if dy > 0 else "right push"


def annotate(primitive: DistilledPrimitive, world_config: WorldConfig | None = None) -> str:
    """Execute ``primitive`` on the canonical object and name what happened."""
    cfg = world_config or WorldConfig()
    obj = CANONICAL_OBJECT
    state = WorldState([obj], np.array([[0.0, 0.0, 0.5 * obj.d]]), 0)
    out = execute(state, primitive.action, cfg, np.random.default_rng(0))
    return classify_effect(out.effect, out.held, out.max_lift > 1e-9, cfg.effect_threshold)


def build_library(
    net: Network,
    dataset_actions,
    rng: np.random.Generator,
    config: DistillConfig | None = None,
    world_config: WorldConfig | None = None,
) -> tuple[list[DistilledPrimitive], list[dict]]:
    """Distill and annotate every action code seen in the data.

    Returns the accepted primitives (ordered by code) and one record per
    rejected code.
    """
    cfg = config or DistillConfig()
    counts = enumerate_action_symbols(net, dataset_actions)
    library = []
    rejected = []
    for code, count in counts.items():
        seeds = sample_seeds(dataset_actions, cfg.seeds, rng)
        try:
            prim = distill(net, code, seeds, cfg)
        except DistillationError as exc:
            rejected.append({"code": list(code), "count": count, "reason": str(exc)})
            continue
        prim.count = count
        prim.label = annotate(prim, world_config)
        library.append(prim)
    return library, rejected
