"""Deterministic surrogate tabletop world.

A point gripper follows the three-waypoint trajectory of an action. Open
contact pushes objects horizontally; closing near the target's centre picks
it up (hollow objects only by their rim); opening again drops it.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .kernels import sweep

ACTION_DIM = 12
OBJECT_DIM = 4
EFFECT_DIM = 3
OFFSET_LIMIT = 0.05
GRIPPER_OPEN = 0.5

# Table-frame directions: the robot stands on the -x side of the workspace.
FORWARD = np.array([1.0, 0.0])
LEFT = np.array([0.0, 1.0])


class WorldError(ValueError):
    """Invalid world input (non-finite action, bad object count, ...)."""


class PlacementError(RuntimeError):
    """Rejection sampling could not place non-overlapping objects."""


@dataclass(frozen=True)
class WorldConfig:
    dim_min: float = 0.02
    dim_max: float = 0.08
    grasp_radius: float = 0.03
    sweep_resolution: float = 0.001
    noise_sigma: float = 0.0
    workspace_extent: float = 1.0
    rim_inner: float = 0.6
    rim_outer: float = 1.0
    effect_threshold: float = 0.008
    spawn_margin: float = 0.1
    max_placement_attempts: int = 1000

    def __post_init__(self):
        if not 0.0 < self.dim_min <= self.dim_max:
            raise WorldError(f"need 0 < dim_min <= dim_max, got {self.dim_min}, {self.dim_max}")
        if self.grasp_radius <= 0 or self.sweep_resolution <= 0:
            raise WorldError("grasp_radius and sweep_resolution must be positive")
        if self.noise_sigma < 0:
            raise WorldError("noise_sigma must be non-negative")
        if self.workspace_extent <= 2 * self.spawn_margin:
            raise WorldError("workspace too small for the spawn margin")


@dataclass(frozen=True)
class ObjectSpec:
    s_x: float
    s_y: float
    d: float
    t: int  # 0 = solid, 1 = hollow

    def features(self) -> np.ndarray:
        return np.array([self.s_x, self.s_y, self.d, float(self.t)])

    @classmethod
    def from_features(cls, f) -> "ObjectSpec":
        return cls(float(f[0]), float(f[1]), float(f[2]), int(round(float(f[3]))))


@dataclass
class WorldState:
    objects: list[ObjectSpec]
    positions: np.ndarray  # (m, 3) object centres
    target_index: int = 0

    def __post_init__(self):
        self.positions = np.asarray(self.positions, dtype=float).reshape(-1, 3)
        if not 1 <= len(self.objects) <= 2 or len(self.objects) != len(self.positions):
            raise WorldError("a state holds one or two objects with one pose each")
        if not 0 <= self.target_index < len(self.objects):
            raise WorldError(f"target_index {self.target_index} out of range")

    @property
    def count(self) -> int:
        return len(self.objects)

    def dims(self) -> np.ndarray:
        return np.array([[o.s_x, o.s_y, o.d] for o in self.objects])

    def hollow(self) -> np.ndarray:
        return np.array([o.t == 1 for o in self.objects])

    def copy(self, target_index: int | None = None) -> "WorldState":
        return WorldState(
            list(self.objects),
            self.positions.copy(),
            self.target_index if target_index is None else target_index,
        )


@dataclass
class Outcome:
    state: WorldState
    effect: np.ndarray
    max_lift: float = 0.0
    held: bool = False


def sample_actions(rng: np.random.Generator, n: int) -> np.ndarray:
    """Draw ``n`` actions: offsets in [-0.05, 0.05], gripper commands in [0, 1]."""
    a = rng.uniform(-OFFSET_LIMIT, OFFSET_LIMIT, size=(n, ACTION_DIM))
    a[:, 3::4] = rng.uniform(0.0, 1.0, size=(n, 3))
    return a


def action_bounds() -> tuple[np.ndarray, np.ndarray]:
    lo = np.full(ACTION_DIM, -OFFSET_LIMIT)
    hi = np.full(ACTION_DIM, OFFSET_LIMIT)
    lo[3::4] = 0.0
    hi[3::4] = 1.0
    return lo, hi


def _footprints_overlap(p, q, dp, dq) -> bool:
    return abs(p[0] - q[0]) < 0.5 * (dp[0] + dq[0]) and abs(p[1] - q[1]) < 0.5 * (dp[1] + dq[1])


def spawn_random(rng_seed, object_count: int = 1, config: WorldConfig | None = None) -> WorldState:
    """Random resting objects with non-overlapping footprints.

    ``rng_seed`` may be an int or a ``numpy.random.Generator``.
    """
    cfg = config or WorldConfig()
    if object_count not in (1, 2):
        raise WorldError(f"object_count must be 1 or 2, got {object_count}")
    rng = rng_seed if isinstance(rng_seed, np.random.Generator) else np.random.default_rng(rng_seed)
    half = 0.5 * cfg.workspace_extent - cfg.spawn_margin

    objects = []
    positions = []
    for _ in range(object_count):
        for _attempt in range(cfg.max_placement_attempts):
            s_x, s_y, d = rng.uniform(cfg.dim_min, cfg.dim_max, size=3)
            t = int(rng.integers(0, 2))
            xy = rng.uniform(-half, half, size=2)
            dims = (s_x, s_y)
            if all(not _footprints_overlap(xy, p, dims, (o.s_x, o.s_y)) for o, p in zip(objects, positions)):
                objects.append(ObjectSpec(float(s_x), float(s_y), float(d), t))
                positions.append([xy[0], xy[1], 0.5 * d])
                break
        else:
            raise PlacementError(f"could not place object {len(objects)} after {cfg.max_placement_attempts} attempts")
    return WorldState(objects, np.array(positions), 0)


def execute(
    state: WorldState,
    action,
    config: WorldConfig | None = None,
    rng: np.random.Generator | None = None,
) -> Outcome:
    """Run ``action`` against ``state.target_index``; the input state is not modified."""
    cfg = config or WorldConfig()
    a = np.asarray(action, dtype=float).reshape(-1)
    if a.shape != (ACTION_DIM,):
        raise WorldError(f"action must have {ACTION_DIM} entries, got {a.shape}")
    if not np.all(np.isfinite(a)):
        raise WorldError("action contains non-finite values")

    way = a.reshape(3, 4)
    pos = state.positions.copy()
    max_lift, held = sweep(
        state.dims(),
        state.hollow(),
        pos,
        state.target_index,
        np.ascontiguousarray(way[:, :3]),
        way[:, 3] < GRIPPER_OPEN,
        cfg.grasp_radius,
        cfg.sweep_resolution,
        cfg.rim_inner,
        cfg.rim_outer,
        0.5 * cfg.workspace_extent,
    )
    new_state = WorldState(list(state.objects), pos, state.target_index)
    effect = pos[state.target_index] - state.positions[state.target_index]
    if cfg.noise_sigma > 0:
        if rng is None:
            raise WorldError("noise_sigma > 0 requires an rng")
        effect = effect + rng.normal(0.0, cfg.noise_sigma, size=EFFECT_DIM)
    return Outcome(new_state, effect, float(max_lift), bool(held))


def total_effect_magnitude(effect) -> float:
    """L1 size of an effect: |dx| + |dy| + |dz|."""
    return float(np.abs(np.asarray(effect, dtype=float)).sum())
