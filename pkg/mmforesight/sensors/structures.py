from typing import Dict, Tuple

import numpy as np

from ..exceptions import DimensionError, InputError


class Behavior:
    """
    Exploratory behaviors a trial can be recorded with.
    """

    PUSH = "push"
    POKE = "poke"
    PRESS = "press"
    SHAKE = "shake"
    LIFT = "lift"
    DROP = "drop"
    GRASP = "grasp"
    TAP = "tap"
    HOLD = "hold"

    ALL = (PUSH, POKE, PRESS, SHAKE, LIFT, DROP, GRASP, TAP, HOLD)

    @classmethod
    def validate(cls, label: str) -> str:
        if label not in cls.ALL:
            raise InputError(f"Unknown behavior {label!r}")
        return label

    @classmethod
    def index(cls, label: str) -> int:
        return cls.ALL.index(cls.validate(label))

    @classmethod
    def from_index(cls, index: int) -> str:
        if not 0 <= index < len(cls.ALL):
            raise InputError(f"Behavior index {index} out of range")
        return cls.ALL[index]


class Modality:
    VISION = "vision"
    HAPTIC = "haptic"
    AUDIO = "audio"
    VIBRO = "vibro"

    NON_VISUAL = (HAPTIC, AUDIO, VIBRO)
    ALL = (VISION, HAPTIC, AUDIO, VIBRO)


class FrameConfig:
    """
    Frame dimensions, sensor rates and STFT settings shared by the generator,
    the trainer and the evaluator.
    """

    def __init__(
        self,
        image_size: int = 32,
        fps: float = 10.0,
        haptic_channels: int = 10,
        haptic_steps: int = 8,
        haptic_rate: float = 100.0,
        audio_bins: int = 32,
        audio_steps: int = 8,
        audio_rate: float = 8000.0,
        audio_window: int = 256,
        audio_hop: int = 128,
        vibro_bins: int = 16,
        vibro_steps: int = 8,
        vibro_rate: float = 1000.0,
        vibro_window: int = 64,
        vibro_hop: int = 25,
    ) -> None:
        for name, value in (
            ("fps", fps),
            ("haptic_rate", haptic_rate),
            ("audio_rate", audio_rate),
            ("vibro_rate", vibro_rate),
        ):
            if value <= 0:
                raise ValueError(f"{name} must be positive")

        if audio_bins > audio_window // 2 + 1:
            raise ValueError("audio_bins cannot exceed audio_window / 2 + 1")
        if vibro_bins > vibro_window // 2 + 1:
            raise ValueError("vibro_bins cannot exceed vibro_window / 2 + 1")

        self.image_size = image_size
        self.fps = fps
        self.haptic_channels = haptic_channels
        self.haptic_steps = haptic_steps
        self.haptic_rate = haptic_rate
        self.audio_bins = audio_bins
        self.audio_steps = audio_steps
        self.audio_rate = audio_rate
        self.audio_window = audio_window
        self.audio_hop = audio_hop
        self.vibro_bins = vibro_bins
        self.vibro_steps = vibro_steps
        self.vibro_rate = vibro_rate
        self.vibro_window = vibro_window
        self.vibro_hop = vibro_hop

    @classmethod
    def default(cls) -> "FrameConfig":
        return cls()

    @property
    def in_frame_steps(self) -> Dict[str, int]:
        return {
            Modality.HAPTIC: self.haptic_steps,
            Modality.AUDIO: self.audio_steps,
            Modality.VIBRO: self.vibro_steps,
        }

    def frame_shape(self, modality: str) -> Tuple[int, ...]:
        if modality == Modality.VISION:
            return (3, self.image_size, self.image_size)
        if modality == Modality.HAPTIC:
            return (self.haptic_channels, self.haptic_steps)
        if modality == Modality.AUDIO:
            return (self.audio_bins, self.audio_steps)
        if modality == Modality.VIBRO:
            return (self.vibro_bins, self.vibro_steps)
        raise InputError(f"Unknown modality {modality!r}")

    def to_dict(self) -> Dict[str, float]:
        return dict(vars(self))

    @classmethod
    def from_dict(cls, values: Dict[str, str]) -> "FrameConfig":
        kwargs = {}
        reference = vars(cls())
        for key, default in reference.items():
            if key in values:
                kwargs[key] = type(default)(float(values[key]))
        return cls(**kwargs)

    def __eq__(self, other) -> bool:
        return isinstance(other, FrameConfig) and vars(self) == vars(other)

    def __str__(self) -> str:
        return "FrameConfig[{}]".format(
            ", ".join(f"{key}={value}" for key, value in vars(self).items())
        )


class RawTrial:
    """
    One recorded interaction before synchronization: the video plus the three
    sensor streams at their own rates.
    """

    def __init__(
        self,
        video: np.ndarray,
        haptic: np.ndarray,
        audio: np.ndarray,
        vibro: np.ndarray,
        behavior: str,
        fps: float,
        haptic_rate: float,
        audio_rate: float,
        vibro_rate: float,
        object_id: int = 0,
        trial_id: int = 0,
    ) -> None:
        video = np.asarray(video, dtype=np.float32)
        if video.ndim != 4 or video.shape[3] != 3:
            raise DimensionError(f"Video must be T×H×W×3, got {video.shape}")
        haptic = np.asarray(haptic, dtype=np.float32)
        if haptic.ndim != 2:
            raise DimensionError(f"Haptic stream must be samples×channels, got {haptic.shape}")
        audio = np.asarray(audio, dtype=np.float32)
        if audio.ndim != 1:
            raise DimensionError(f"Audio must be a mono waveform, got {audio.shape}")
        vibro = np.asarray(vibro, dtype=np.float32)
        if vibro.ndim != 2 or vibro.shape[1] != 3:
            raise DimensionError(f"Vibro stream must be samples×3, got {vibro.shape}")
        for name, rate in (
            ("fps", fps),
            ("haptic_rate", haptic_rate),
            ("audio_rate", audio_rate),
            ("vibro_rate", vibro_rate),
        ):
            if rate <= 0:
                raise ValueError(f"{name} must be positive")

        self._video = video
        self._haptic = haptic
        self._audio = audio
        self._vibro = vibro
        self._behavior = Behavior.validate(behavior)
        self._fps = float(fps)
        self._haptic_rate = float(haptic_rate)
        self._audio_rate = float(audio_rate)
        self._vibro_rate = float(vibro_rate)
        self._object_id = int(object_id)
        self._trial_id = int(trial_id)

    @property
    def video(self) -> np.ndarray:
        return self._video

    @property
    def haptic(self) -> np.ndarray:
        return self._haptic

    @property
    def audio(self) -> np.ndarray:
        return self._audio

    @property
    def vibro(self) -> np.ndarray:
        return self._vibro

    @property
    def behavior(self) -> str:
        return self._behavior

    @property
    def fps(self) -> float:
        return self._fps

    @property
    def haptic_rate(self) -> float:
        return self._haptic_rate

    @property
    def audio_rate(self) -> float:
        return self._audio_rate

    @property
    def vibro_rate(self) -> float:
        return self._vibro_rate

    @property
    def object_id(self) -> int:
        return self._object_id

    @property
    def trial_id(self) -> int:
        return self._trial_id

    @property
    def frame_count(self) -> int:
        return self._video.shape[0]

    @property
    def duration(self) -> float:
        return self.frame_count / self._fps

    def __str__(self) -> str:
        return "RawTrial[trial_id={}, object_id={}, behavior={}, frames={}, haptic={}, audio={}, vibro={}]".format(
            self._trial_id,
            self._object_id,
            self._behavior,
            self.frame_count,
            self._haptic.shape,
            self._audio.shape,
            self._vibro.shape,
        )


class SampleQuadruple:
    """
    A synchronized trial: T frames per modality plus the behavior label.
    Vision frames are stored channel-first (T×3×H×W) in [0, 1].
    """

    def __init__(
        self,
        vision: np.ndarray,
        haptic: np.ndarray,
        audio: np.ndarray,
        vibro: np.ndarray,
        behavior: str,
        object_id: int = 0,
        trial_id: int = 0,
    ) -> None:
        counts = {
            Modality.VISION: len(vision),
            Modality.HAPTIC: len(haptic),
            Modality.AUDIO: len(audio),
            Modality.VIBRO: len(vibro),
        }
        if len(set(counts.values())) != 1:
            raise DimensionError(f"Modalities disagree on frame count: {counts}")
        if np.ndim(vision) != 4 or np.shape(vision)[1] != 3:
            raise DimensionError(f"Vision must be T×3×H×W, got {np.shape(vision)}")
        if np.min(vision) < 0.0 or np.max(vision) > 1.0:
            raise InputError("Vision frames must lie in [0, 1]")

        self._frames = {
            Modality.VISION: np.asarray(vision),
            Modality.HAPTIC: np.asarray(haptic),
            Modality.AUDIO: np.asarray(audio),
            Modality.VIBRO: np.asarray(vibro),
        }
        self._behavior = Behavior.validate(behavior)
        self._object_id = int(object_id)
        self._trial_id = int(trial_id)

    @property
    def vision(self) -> np.ndarray:
        return self._frames[Modality.VISION]

    @property
    def haptic(self) -> np.ndarray:
        return self._frames[Modality.HAPTIC]

    @property
    def audio(self) -> np.ndarray:
        return self._frames[Modality.AUDIO]

    @property
    def vibro(self) -> np.ndarray:
        return self._frames[Modality.VIBRO]

    @property
    def behavior(self) -> str:
        return self._behavior

    @property
    def object_id(self) -> int:
        return self._object_id

    @property
    def trial_id(self) -> int:
        return self._trial_id

    @property
    def T(self) -> int:
        return len(self.vision)

    def frames(self, modality: str) -> np.ndarray:
        try:
            return self._frames[modality]
        except KeyError:
            raise InputError(f"Unknown modality {modality!r}") from None

    def replace(self, **frames) -> "SampleQuadruple":
        values = dict(self._frames)
        values.update(frames)
        return SampleQuadruple(
            values[Modality.VISION],
            values[Modality.HAPTIC],
            values[Modality.AUDIO],
            values[Modality.VIBRO],
            self._behavior,
            self._object_id,
            self._trial_id,
        )

    def __str__(self) -> str:
        return "SampleQuadruple[trial_id={}, object_id={}, behavior={}, T={}]".format(
            self._trial_id, self._object_id, self._behavior, self.T
        )
