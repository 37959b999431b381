import numpy as np
import pytest

from mmforesight.exceptions import ConfigError, InputError
from mmforesight.sensors import Behavior, load_dataset, read_manifest
from mmforesight.synthworld import (
    FLOOR,
    HEAVY,
    LIGHT,
    ObjectCatalog,
    SceneSpec,
    allocate,
    ambiguous_pair,
    generate_dataset,
    generate_trials,
    render,
    render_frame,
    simulate,
)


def test_scene_validation():
    with pytest.raises(InputError):
        SceneSpec("wiggle")
    with pytest.raises(ConfigError):
        SceneSpec("push", mass="medium")
    with pytest.raises(ConfigError):
        SceneSpec("push", object_x=1.0)
    with pytest.raises(ConfigError):
        SceneSpec("drop", height=40)


def test_default_lengths():
    assert simulate(SceneSpec("push")).T == 20
    assert simulate(SceneSpec("grasp")).T == 10
    assert simulate(SceneSpec("tap")).T == 10
    with pytest.raises(InputError):
        simulate(SceneSpec("push"), T=5)


def test_hold_keeps_object_still():
    trajectory = simulate(SceneSpec("hold"))
    np.testing.assert_array_equal(trajectory.object_pose, trajectory.object_pose[:1].repeat(20, axis=0))
    assert trajectory.contacts == []


def test_heavy_push_moves_less():
    light = simulate(SceneSpec("push", mass=LIGHT))
    heavy = simulate(SceneSpec("push", mass=HEAVY))
    light_shift = light.object_pose[-1, 0] - light.object_pose[0, 0]
    heavy_shift = heavy.object_pose[-1, 0] - heavy.object_pose[0, 0]
    assert 0 < heavy_shift < light_shift


def test_drop_lands_on_floor():
    spec = SceneSpec("drop", height=12, size=4)
    trajectory = simulate(spec)
    assert trajectory.object_pose[0, 1] == pytest.approx(FLOOR - 2 - 12)
    assert trajectory.object_pose[-1, 1] == pytest.approx(FLOOR - 2)
    assert trajectory.contacts[0].time == pytest.approx(np.sqrt(24.0))
    times = [c.time for c in trajectory.contacts]
    assert times == sorted(times)


def test_clamped_object_is_recorded():
    trajectory = simulate(SceneSpec("push", object_x=26.0, arm_speed=1.2, contact_time=2.0))
    assert trajectory.clamped
    assert trajectory.object_pose[:, 0].max() <= 32 - 2.5


def test_hold_has_silent_audio_and_flat_torques():
    spec = SceneSpec("hold")
    raw = render(simulate(spec), spec)
    np.testing.assert_array_equal(raw.audio, 0.0)
    np.testing.assert_array_equal(raw.vibro, 0.0)
    torques = raw.haptic[:, :7]
    np.testing.assert_array_equal(torques, torques[:1].repeat(len(torques), axis=0))


def test_single_contact_single_burst():
    spec = SceneSpec("push", contact_time=4.0)
    trajectory = simulate(spec)
    assert len(trajectory.contacts) == 1
    raw = render(trajectory, spec)
    active = np.flatnonzero(raw.audio)
    assert active[0] == 4 * 8000 // 10
    assert active[-1] < active[0] + 800


def test_render_shapes():
    spec = SceneSpec("lift")
    raw = render(simulate(spec), spec, trial_id=4)
    assert raw.video.shape == (20, 32, 32, 3)
    assert raw.video.min() >= 0.0 and raw.video.max() <= 1.0
    assert raw.haptic.shape == (200, 10)
    assert raw.audio.shape == (16000,)
    assert raw.vibro.shape == (2000, 3)
    assert raw.trial_id == 4


def test_render_frame_draws_object():
    spec = SceneSpec("hold", size=6, color=(255, 0, 0))
    frame = render_frame(np.array([16.0, 25.0]), np.array([16.0, 0.0]), spec)
    assert frame.shape == (32, 32, 3)
    np.testing.assert_allclose(frame[25, 16], [1.0, 0.0, 0.0])


def test_catalog_twins_look_alike():
    catalog = ObjectCatalog(10, seed=3)
    for j in range(5):
        light, heavy = catalog[2 * j], catalog[2 * j + 1]
        assert (light["mass"], heavy["mass"]) == (LIGHT, HEAVY)
        for key in ("shape", "color", "size"):
            assert light[key] == heavy[key]


def test_ambiguous_pair_diverges_after_contact():
    light, heavy = ambiguous_pair(ObjectCatalog(4, seed=0), 1, seed=5)
    assert (light.object_id, heavy.object_id) == (2, 3)
    light_video = render(simulate(light), light).video
    heavy_video = render(simulate(heavy), heavy).video
    np.testing.assert_array_equal(light_video[:4], heavy_video[:4])
    assert not np.array_equal(light_video[11], heavy_video[11])


def test_allocate():
    assert allocate(100, {"push": 0.5, "drop": 0.5}) == {"push": 50, "drop": 50}
    assert allocate(10, {"push": 1, "poke": 1, "press": 1}) == {"push": 4, "poke": 3, "press": 3}
    assert sum(allocate(37, {b: 1.0 for b in Behavior.ALL}).values()) == 37
    with pytest.raises(InputError):
        allocate(10, {"push": 0.0})
    with pytest.raises(InputError):
        allocate(10, {"wiggle": 1.0})


def test_generate_trials_mix_and_pairs():
    trials = generate_trials(20, {"push": 1.0}, seed=1)
    scenes = [scene for _, scene in trials]
    assert len(trials) == 20
    assert all(scene.behavior == "push" for scene in scenes)
    # two ambiguous pairs come first
    for light, heavy in (scenes[0:2], scenes[2:4]):
        assert light.replace(mass=HEAVY, object_id=heavy.object_id) == heavy
    assert [trial.trial_id for trial, _ in trials] == list(range(20))


def test_generate_trials_covers_objects():
    trials = generate_trials(20, {"hold": 1.0, "tap": 1.0}, seed=2, n_objects=10)
    assert sorted({trial.object_id for trial, _ in trials}) == list(range(10))


def test_generate_trials_errors():
    with pytest.raises(InputError):
        generate_trials(9)
    with pytest.raises(ConfigError):
        generate_trials(10, {"push": 1.0}, ambiguous_pairs=6)


def test_generate_dataset_is_deterministic(tmp_path):
    mix = {"push": 0.5, "drop": 0.5}
    a = generate_dataset(tmp_path / "a", 10, mix, seed=4)
    b = generate_dataset(tmp_path / "b", 10, mix, seed=4)
    names = sorted(p.name for p in a.iterdir())
    assert names == sorted(p.name for p in b.iterdir())
    for name in names:
        assert (a / name).read_bytes() == (b / name).read_bytes()

    manifest = read_manifest(a)
    behaviors = [manifest[f"trial.{i:05d}.behavior"] for i in range(10)]
    assert behaviors.count("push") == 5 and behaviors.count("drop") == 5

    dataset = load_dataset(a)
    assert len(dataset) == 10
    assert dataset[0].vision.shape == (20, 3, 32, 32)
