from typing import Optional

import numpy as np
from PIL import Image, ImageDraw
from scipy.signal import butter, sosfilt

from ..sensors import FrameConfig, RawTrial
from .structures import DISC, FLOOR, FRAME_SIZE, SceneSpec, Trajectory

BACKGROUND = (24, 24, 32)
FLOOR_COLOR = (96, 72, 48)
ARM_COLOR = (150, 150, 150)
ARM_BASE = (FRAME_SIZE // 2, 0)

JOINTS = 7
# per-joint weights of arm height, sustained load and contact spikes
POSE_GAIN = np.linspace(0.1, 0.7, JOINTS)
LOAD_GAIN = np.linspace(1.0, 0.4, JOINTS)
SPIKE_GAIN = np.array([0.6, 1.0, 0.8, 0.5, 0.9, 0.4, 0.7])
SPIKE_DECAY = 0.3

AUDIO_BURST = 0.1
AUDIO_DECAY = 0.02
VIBRO_BURST = 0.05
VIBRO_DECAY = 0.01
VIBRO_BAND = (50.0, 200.0)


def render_frame(object_xy: np.ndarray, arm_xy: np.ndarray, spec: SceneSpec) -> np.ndarray:
    image = Image.new("RGB", (FRAME_SIZE, FRAME_SIZE), BACKGROUND)
    draw = ImageDraw.Draw(image)
    draw.rectangle([0, FLOOR, FRAME_SIZE - 1, FRAME_SIZE - 1], fill=FLOOR_COLOR)
    draw.line([ARM_BASE, (float(arm_xy[0]), float(arm_xy[1]))], fill=ARM_COLOR, width=2)

    # the object is drawn last so it is never occluded
    left = int(round(object_xy[0] - spec.size / 2.0))
    top = int(round(object_xy[1] - spec.size / 2.0))
    box = [left, top, left + spec.size - 1, top + spec.size - 1]
    if spec.shape == DISC:
        draw.ellipse(box, fill=spec.color)
    else:
        draw.rectangle(box, fill=spec.color)
    return np.asarray(image, dtype=np.float32) / 255.0


def _onset(time: float, rate: float, fps: float) -> int:
    return int(round(time * rate / fps))


def render(
    trajectory: Trajectory,
    spec: SceneSpec,
    config: Optional[FrameConfig] = None,
    trial_id: int = 0,
) -> RawTrial:
    """
    Rasterizes the video and synthesizes the haptic, audio and vibro
    streams. Every torque spike, audio burst and vibro burst starts at a
    contact of the trajectory.
    """
    config = config or FrameConfig.default()
    T = trajectory.T
    fps = config.fps

    video = np.stack(
        [render_frame(trajectory.object_pose[t], trajectory.arm_pose[t], spec) for t in range(T)]
    )

    # haptic: 7 torques then end-effector x, y and gripper aperture
    samples = int(round(T * config.haptic_rate / fps))
    times = np.arange(samples) * fps / config.haptic_rate
    frames = np.arange(T)
    arm_x = np.interp(times, frames, trajectory.arm_pose[:, 0]) / FRAME_SIZE
    arm_y = np.interp(times, frames, trajectory.arm_pose[:, 1]) / FRAME_SIZE
    torques = POSE_GAIN[None, :] * arm_y[:, None] + LOAD_GAIN[None, :] * trajectory.load_at(times)[:, None]
    for contact in trajectory.contacts:
        elapsed = times - contact.time
        pulse = np.where(elapsed >= 0, np.exp(-np.maximum(elapsed, 0.0) / SPIKE_DECAY), 0.0)
        torques = torques + contact.impulse * SPIKE_GAIN[None, :] * pulse[:, None]
    haptic = np.concatenate(
        [torques, arm_x[:, None], arm_y[:, None], trajectory.aperture_at(times)[:, None]], axis=1
    )

    audio = np.zeros(int(round(T * config.audio_rate / fps)))
    tone = 400.0 + 100.0 * spec.size
    length = int(AUDIO_BURST * config.audio_rate)
    k = np.arange(length)
    burst = np.cos(2.0 * np.pi * tone * k / config.audio_rate) * np.exp(
        -k / (AUDIO_DECAY * config.audio_rate)
    )
    for contact in trajectory.contacts:
        start = _onset(contact.time, config.audio_rate, fps)
        span = min(length, len(audio) - start)
        if span > 0:
            audio[start : start + span] += 0.5 * contact.impulse * burst[:span]

    vibro = np.zeros((int(round(T * config.vibro_rate / fps)), 3))
    sos = butter(4, VIBRO_BAND, btype="bandpass", fs=config.vibro_rate, output="sos")
    length = int(VIBRO_BURST * config.vibro_rate)
    envelope = np.exp(-np.arange(length) / (VIBRO_DECAY * config.vibro_rate))
    for index, contact in enumerate(trajectory.contacts):
        start = _onset(contact.time, config.vibro_rate, fps)
        span = min(length, len(vibro) - start)
        if span <= 0:
            continue
        noise = np.random.default_rng([spec.seed, index]).standard_normal(length)
        shaped = sosfilt(sos, noise) * envelope
        axes = np.array([0.3, 0.6, 0.3])
        axes[contact.axis] = 1.0
        vibro[start : start + span] += 0.3 * contact.impulse * shaped[:span, None] * axes[None, :]

    return RawTrial(
        video=video,
        haptic=haptic,
        audio=audio,
        vibro=vibro,
        behavior=spec.behavior,
        fps=fps,
        haptic_rate=config.haptic_rate,
        audio_rate=config.audio_rate,
        vibro_rate=config.vibro_rate,
        object_id=spec.object_id,
        trial_id=trial_id,
    )
