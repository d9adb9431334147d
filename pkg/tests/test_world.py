import numpy as np
import pytest
from hypothesis import given, strategies as st

from curiosym import world
from curiosym.world import (
    ObjectSpec,
    PlacementError,
    WorldConfig,
    WorldError,
    WorldState,
    action_bounds,
    execute,
    sample_actions,
    spawn_random,
    total_effect_magnitude,
)

CUBE = ObjectSpec(0.04, 0.04, 0.04, 0)
OPEN, CLOSED = 0.9, 0.1


def act(*waypoints):
    return np.array([v for wp in waypoints for v in wp], dtype=float)


def at_origin(obj=CUBE):
    return WorldState([obj], np.array([[0.0, 0.0, 0.5 * obj.d]]), 0)


# Hand-traced outcomes on a 4 cm solid cube resting at the origin.
# An open sweep through the cube leaves its far face at the sweep end, so the
# centre moves by (end offset + half width) = 0.05 + 0.02.
TRACES = [
    ("forward push", act((-0.05, 0, 0.01, OPEN), (0.05, 0, 0.01, OPEN), (0.05, 0, 0.01, OPEN)), [0.07, 0, 0], False),
    ("left push", act((0, -0.05, 0.01, OPEN), (0, 0.05, 0.01, OPEN), (0, 0.05, 0.01, OPEN)), [0, 0.07, 0], False),
    ("pull", act((0.05, 0, 0.01, OPEN), (-0.05, 0, 0.01, OPEN), (-0.05, 0, 0.01, OPEN)), [-0.07, 0, 0], False),
    ("pass above", act((-0.05, 0, 0.05, OPEN), (0.05, 0, 0.05, OPEN), (0.05, 0, 0.05, OPEN)), [0, 0, 0], False),
    # p1 inside the cube: gripper rests on the top face (z = 0.04), closes
    # 0.02 from the centre, then rises to 0.07, a 0.03 lift.
    ("grasp and hold", act((0, 0, 0, CLOSED), (0, 0, 0.05, CLOSED), (0, 0, 0.05, CLOSED)), [0, 0, 0.03], True),
    ("pick and place", act((0, 0, 0, CLOSED), (0, 0, 0.05, CLOSED), (0.03, 0, 0.05, OPEN)), [0.03, 0, 0], False),
]


@pytest.mark.parametrize("name,action,effect,held", TRACES, ids=[t[0] for t in TRACES])
def test_traced_outcomes(name, action, effect, held):
    out = execute(at_origin(), action)
    np.testing.assert_allclose(out.effect, effect, atol=1e-12)
    assert out.held is held


def test_grasp_lifts_by_gripper_rise():
    out = execute(at_origin(), TRACES[4][1])
    assert out.max_lift == pytest.approx(0.03, abs=1e-12)
    assert out.state.positions[0, 2] == pytest.approx(0.05, abs=1e-12)


def test_hollow_object_only_grasps_at_rim():
    ring = ObjectSpec(0.06, 0.06, 0.02, 1)
    centre = act((0, 0, 0, CLOSED), (0, 0, 0.05, CLOSED), (0, 0, 0.05, CLOSED))
    rim = act((0.025, 0, 0, CLOSED), (0.025, 0, 0.05, CLOSED), (0.025, 0, 0.05, CLOSED))
    assert not execute(at_origin(ring), centre).held
    out = execute(at_origin(ring), rim)
    assert out.held
    assert out.effect[2] > 0


def test_solid_of_same_shape_grasps_at_centre():
    solid = ObjectSpec(0.06, 0.06, 0.02, 0)
    centre = act((0, 0, 0, CLOSED), (0, 0, 0.05, CLOSED), (0, 0, 0.05, CLOSED))
    assert execute(at_origin(solid), centre).held


def test_closed_far_from_object_does_nothing():
    a = act((0.05, 0.05, 0.05, CLOSED), (0.05, 0.05, 0.05, CLOSED), (0.05, 0.05, 0.05, CLOSED))
    out = execute(at_origin(), a)
    assert total_effect_magnitude(out.effect) == 0.0
    assert not out.held


def test_input_state_untouched():
    s = at_origin()
    before = s.positions.copy()
    execute(s, TRACES[0][1])
    np.testing.assert_array_equal(s.positions, before)


def test_non_target_object_is_frame_invariant_when_not_touched():
    other = ObjectSpec(0.03, 0.03, 0.03, 0)
    s = WorldState([CUBE, other], np.array([[0, 0, 0.02], [0, 0.3, 0.015]]), 0)
    out = execute(s, TRACES[0][1])
    np.testing.assert_array_equal(out.state.positions[1], s.positions[1])


def test_sweep_pushes_scenery_without_reporting_it():
    # Objects interact only through the gripper: a sweep that passes through
    # both footprints moves both, and the effect covers the target alone.
    other = ObjectSpec(0.04, 0.04, 0.04, 0)
    s = WorldState([CUBE, other], np.array([[0, 0, 0.02], [0.06, 0.04, 0.02]]), 0)
    sweep = act((-0.05, 0, 0.01, OPEN), (0.05, 0, 0.01, OPEN), (0.05, 0.05, 0.01, OPEN))
    out = execute(s, sweep)
    np.testing.assert_allclose(out.effect, out.state.positions[0] - s.positions[0], atol=1e-12)
    assert out.effect[0] == pytest.approx(0.07, abs=1e-12)
    np.testing.assert_allclose(out.state.positions[1] - s.positions[1], [0, 0.03, 0], atol=1e-12)


@pytest.mark.parametrize("bad", [np.zeros(11), np.full(12, np.nan), np.r_[np.zeros(11), np.inf]])
def test_rejects_bad_actions(bad):
    with pytest.raises(WorldError):
        execute(at_origin(), bad)


def test_noise_requires_rng_and_is_seeded():
    cfg = WorldConfig(noise_sigma=0.001)
    with pytest.raises(WorldError):
        execute(at_origin(), TRACES[0][1], cfg)
    a = execute(at_origin(), TRACES[0][1], cfg, np.random.default_rng(3)).effect
    b = execute(at_origin(), TRACES[0][1], cfg, np.random.default_rng(3)).effect
    np.testing.assert_array_equal(a, b)
    assert np.abs(a - [0.07, 0, 0]).max() < 0.01


def test_sampler_stays_in_box(rng):
    a = sample_actions(rng, 5000)
    lo, hi = action_bounds()
    assert np.all(a >= lo) and np.all(a <= hi)
    assert a[:, 3::4].min() >= 0 and a[:, 3::4].max() <= 1
    # roughly half the gripper commands are closed
    assert 0.45 < np.mean(a[:, 3::4] < world.GRIPPER_OPEN) < 0.55


def test_spawn_is_seeded_and_valid():
    a = spawn_random(5, 2)
    b = spawn_random(5, 2)
    np.testing.assert_array_equal(a.positions, b.positions)
    assert a.objects == b.objects
    cfg = WorldConfig()
    for o, p in zip(a.objects, a.positions):
        assert cfg.dim_min <= min(o.s_x, o.s_y, o.d) <= max(o.s_x, o.s_y, o.d) <= cfg.dim_max
        assert p[2] == pytest.approx(0.5 * o.d)
        assert np.all(np.abs(p[:2]) <= 0.4)
    d = np.abs(a.positions[0, :2] - a.positions[1, :2])
    dims = a.dims()
    assert d[0] >= 0.5 * (dims[0, 0] + dims[1, 0]) or d[1] >= 0.5 * (dims[0, 1] + dims[1, 1])


def test_spawn_errors():
    with pytest.raises(WorldError):
        spawn_random(0, 3)
    tight = WorldConfig(workspace_extent=0.21, spawn_margin=0.1, dim_min=0.08, dim_max=0.08, max_placement_attempts=5)
    with pytest.raises(PlacementError):
        spawn_random(0, 2, tight)


def test_config_validation():
    with pytest.raises(WorldError):
        WorldConfig(dim_min=0.1, dim_max=0.05)
    with pytest.raises(WorldError):
        WorldConfig(noise_sigma=-1)


def test_object_feature_round_trip():
    o = ObjectSpec(0.03, 0.05, 0.07, 1)
    assert ObjectSpec.from_features(o.features()) == o


@given(seed=st.integers(0, 2**31 - 1), count=st.sampled_from([1, 2]))
def test_execute_deterministic_and_grounded(seed, count):
    rng = np.random.default_rng(seed)
    s = spawn_random(rng, count)
    a = sample_actions(rng, 1)[0]
    one = execute(s, a)
    two = execute(s, a)
    np.testing.assert_array_equal(one.effect, two.effect)
    np.testing.assert_array_equal(one.state.positions, two.state.positions)
    np.testing.assert_allclose(one.effect, one.state.positions[0] - s.positions[0], atol=0)
    half = 0.5 * s.dims()[:, 2]
    # nothing sinks below the table; only a held object may be off it
    assert np.all(one.state.positions[:, 2] >= half - 1e-12)
    if not one.held:
        np.testing.assert_allclose(one.state.positions[:, 2], half, atol=1e-12)
    # a sweep never displaces an object by more than the path can reach
    assert np.all(np.abs(one.effect[:2]) <= 0.3)
