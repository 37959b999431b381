import math
from typing import Dict, Optional

import numpy as np

from ..exceptions import InputError, TruncationError
from .spectrogram import stream_spectrogram, vibro_spectrogram
from .structures import FrameConfig, Modality, RawTrial, SampleQuadruple


def frame_windows(
    stream: np.ndarray,
    frame_count: int,
    samples_per_frame: float,
    steps: int,
    modality: str = "stream",
) -> np.ndarray:
    """
    Splits a channels×samples stream into `frame_count` contiguous windows of
    `samples_per_frame` samples and linearly resamples each to `steps` columns.

    When samples_per_frame == steps the windows are exact slices.

    :return: frame_count×channels×steps
    """
    stream = np.atleast_2d(np.asarray(stream, dtype=np.float64))
    if steps < 1:
        raise InputError("In-frame steps must be at least 1")
    if samples_per_frame <= 0:
        raise InputError("Samples per frame must be positive")

    available = stream.shape[1]
    # a trailing partial sample is served by clipping to the last one
    needed = math.floor(frame_count * samples_per_frame + 1e-9)
    if available < needed:
        raise TruncationError(
            modality,
            f"{modality} stream has {available} samples, {needed} are needed to cover "
            f"{frame_count} frames",
        )

    frames = np.arange(frame_count)[:, None]
    offsets = (np.arange(steps)[None, :] + 0.5) / steps
    positions = ((frames + offsets) * samples_per_frame - 0.5).ravel()
    positions = np.clip(positions, 0, available - 1)

    lower = np.floor(positions).astype(int)
    upper = np.minimum(lower + 1, available - 1)
    weight = positions - lower
    resampled = stream[:, lower] * (1 - weight) + stream[:, upper] * weight

    return resampled.reshape(stream.shape[0], frame_count, steps).transpose(1, 0, 2)


def sync_to_frames(
    raw: RawTrial,
    in_frame_steps: Optional[Dict[str, int]] = None,
    config: Optional[FrameConfig] = None,
) -> SampleQuadruple:
    """
    Brings every sensor stream onto the video's frame clock. Audio and vibro
    are turned into spectrogram streams first.
    """
    config = config or FrameConfig.default()
    steps = dict(config.in_frame_steps)
    if in_frame_steps is not None:
        steps.update(in_frame_steps)

    frame_count = raw.frame_count

    haptic = frame_windows(
        raw.haptic.T,
        frame_count,
        raw.haptic_rate / raw.fps,
        steps[Modality.HAPTIC],
        Modality.HAPTIC,
    )

    if len(raw.audio) < config.audio_hop:
        raise TruncationError(Modality.AUDIO)
    audio = frame_windows(
        stream_spectrogram(
            raw.audio, config.audio_window, config.audio_hop, config.audio_bins
        ),
        frame_count,
        raw.audio_rate / config.audio_hop / raw.fps,
        steps[Modality.AUDIO],
        Modality.AUDIO,
    )

    if len(raw.vibro) < config.vibro_hop:
        raise TruncationError(Modality.VIBRO)
    vibro = frame_windows(
        vibro_spectrogram(
            raw.vibro, config.vibro_window, config.vibro_hop, config.vibro_bins
        ),
        frame_count,
        raw.vibro_rate / config.vibro_hop / raw.fps,
        steps[Modality.VIBRO],
        Modality.VIBRO,
    )

    vision = np.clip(raw.video, 0.0, 1.0).transpose(0, 3, 1, 2)

    return SampleQuadruple(
        vision=vision.astype(np.float32),
        haptic=haptic.astype(np.float32),
        audio=audio.astype(np.float32),
        vibro=vibro.astype(np.float32),
        behavior=raw.behavior,
        object_id=raw.object_id,
        trial_id=raw.trial_id,
    )
