from itertools import product
from typing import Dict, List, Tuple

from ..exceptions import ConfigError, DimensionError
from ..sensors import Behavior, Modality
from ..tensor import Tensor


class ModalityMask:
    """
    Which inputs feed the fusion module, and whether the non-visual
    modalities get auxiliary next-frame decoders.
    """

    def __init__(
        self,
        use_haptic: bool = False,
        use_audio: bool = False,
        use_vibro: bool = False,
        use_behavior: bool = False,
        aux_training: bool = False,
        use_vision: bool = True,
    ) -> None:
        if not use_vision:
            raise ConfigError("Vision cannot be disabled")

        self._flags = {
            Modality.HAPTIC: bool(use_haptic),
            Modality.AUDIO: bool(use_audio),
            Modality.VIBRO: bool(use_vibro),
        }
        self._use_behavior = bool(use_behavior)
        self._aux_training = bool(aux_training)

    @classmethod
    def vision_only(cls) -> "ModalityMask":
        return cls()

    @classmethod
    def all(cls, aux_training: bool = False) -> "ModalityMask":
        return cls(True, True, True, True, aux_training)

    @classmethod
    def enumerate(cls, aux_training: bool = False) -> List["ModalityMask"]:
        """
        Every combination of the four optional inputs, vision-only first
        """
        return [
            cls(haptic, audio, vibro, behavior, aux_training)
            for haptic, audio, vibro, behavior in product((False, True), repeat=4)
        ]

    @classmethod
    def parse(cls, label: str, aux_training: bool = False) -> "ModalityMask":
        """
        Parses labels such as "vision+haptic+behavior"
        """
        parts = {part.strip() for part in label.split("+") if part.strip()}
        unknown = parts - set(Modality.ALL) - {"behavior"}
        if unknown:
            raise ConfigError(f"Unknown modalities in {label!r}: {sorted(unknown)}")
        return cls(
            Modality.HAPTIC in parts,
            Modality.AUDIO in parts,
            Modality.VIBRO in parts,
            "behavior" in parts,
            aux_training,
        )

    @property
    def use_vision(self) -> bool:
        return True

    @property
    def use_haptic(self) -> bool:
        return self._flags[Modality.HAPTIC]

    @property
    def use_audio(self) -> bool:
        return self._flags[Modality.AUDIO]

    @property
    def use_vibro(self) -> bool:
        return self._flags[Modality.VIBRO]

    @property
    def use_behavior(self) -> bool:
        return self._use_behavior

    @property
    def aux_training(self) -> bool:
        return self._aux_training

    def uses(self, modality: str) -> bool:
        if modality == Modality.VISION:
            return True
        return self._flags.get(modality, False)

    @property
    def enabled(self) -> List[str]:
        return [Modality.VISION] + [m for m in Modality.NON_VISUAL if self._flags[m]]

    @property
    def aux_modalities(self) -> List[str]:
        if not self._aux_training:
            return []
        return [m for m in Modality.NON_VISUAL if self._flags[m]]

    def with_aux(self, aux_training: bool) -> "ModalityMask":
        return ModalityMask(
            self.use_haptic, self.use_audio, self.use_vibro, self.use_behavior, aux_training
        )

    def with_behavior(self, use_behavior: bool) -> "ModalityMask":
        return ModalityMask(
            self.use_haptic, self.use_audio, self.use_vibro, use_behavior, self.aux_training
        )

    def compatible_with(self, requested: "ModalityMask") -> bool:
        """
        A model can serve a requested mask if the inputs agree and every
        requested auxiliary head exists.
        """
        return self.inputs() == requested.inputs() and (
            self._aux_training or not requested.aux_training
        )

    def inputs(self) -> Tuple[bool, bool, bool, bool]:
        return (self.use_haptic, self.use_audio, self.use_vibro, self.use_behavior)

    @property
    def label(self) -> str:
        parts = self.enabled + (["behavior"] if self._use_behavior else [])
        return "+".join(parts)

    def to_dict(self) -> Dict[str, bool]:
        return {
            "use_haptic": self.use_haptic,
            "use_audio": self.use_audio,
            "use_vibro": self.use_vibro,
            "use_behavior": self.use_behavior,
            "aux_training": self.aux_training,
        }

    @classmethod
    def from_dict(cls, values: Dict[str, str]) -> "ModalityMask":
        def flag(key: str) -> bool:
            return str(values.get(key, "False")).lower() in ("1", "true", "yes")

        return cls(
            flag("use_haptic"),
            flag("use_audio"),
            flag("use_vibro"),
            flag("use_behavior"),
            flag("aux_training"),
        )

    def __eq__(self, other) -> bool:
        return isinstance(other, ModalityMask) and self.to_dict() == other.to_dict()

    def __hash__(self) -> int:
        return hash(tuple(self.to_dict().values()))

    def __str__(self) -> str:
        return "ModalityMask[{}, aux_training={}]".format(self.label, self._aux_training)


class ModelConfig:
    """
    Channel budget and head settings of the predictor. Every encoder lands on
    a `grid`×`grid` feature map.
    """

    def __init__(
        self,
        vision_channels: int = 64,
        haptic_channels: int = 16,
        audio_channels: int = 16,
        vibro_channels: int = 8,
        fusion_channels: int = 64,
        n_kernels: int = 10,
        kernel_size: int = 5,
        grid: int = 8,
        lstm_kernel: int = 3,
        decoder_channels: int = 32,
    ) -> None:
        if fusion_channels not in (64, 128):
            raise ConfigError("Fusion channels must be 64 or 128")
        if kernel_size % 2 == 0:
            raise ConfigError("CDNA kernel size must be odd")
        if n_kernels < 1:
            raise ConfigError("At least one CDNA kernel is needed")
        if lstm_kernel % 2 == 0:
            raise ConfigError("ConvLSTM kernel size must be odd")

        self.vision_channels = vision_channels
        self.haptic_channels = haptic_channels
        self.audio_channels = audio_channels
        self.vibro_channels = vibro_channels
        self.fusion_channels = fusion_channels
        self.n_kernels = n_kernels
        self.kernel_size = kernel_size
        self.grid = grid
        self.lstm_kernel = lstm_kernel
        self.decoder_channels = decoder_channels

    @classmethod
    def default(cls) -> "ModelConfig":
        return cls()

    @property
    def behavior_channels(self) -> int:
        return len(Behavior.ALL)

    @property
    def cdna_logits(self) -> int:
        return self.n_kernels * self.kernel_size * self.kernel_size

    @property
    def mask_channels(self) -> int:
        return self.n_kernels + 1

    def encoder_channels(self, modality: str) -> int:
        return {
            Modality.VISION: self.vision_channels,
            Modality.HAPTIC: self.haptic_channels,
            Modality.AUDIO: self.audio_channels,
            Modality.VIBRO: self.vibro_channels,
        }[modality]

    def fusion_inputs(self, mask: ModalityMask) -> int:
        channels = sum(self.encoder_channels(m) for m in mask.enabled)
        if mask.use_behavior:
            channels += self.behavior_channels
        return channels

    def to_dict(self) -> Dict[str, int]:
        return dict(vars(self))

    @classmethod
    def from_dict(cls, values: Dict[str, str]) -> "ModelConfig":
        return cls(**{key: int(values[key]) for key in vars(cls()) if key in values})

    def __eq__(self, other) -> bool:
        return isinstance(other, ModelConfig) and vars(self) == vars(other)

    def __str__(self) -> str:
        return "ModelConfig[{}]".format(
            ", ".join(f"{key}={value}" for key, value in vars(self).items())
        )


class FeatureMap:
    """
    An N×C×H×W encoder, fusion or behavior map
    """

    def __init__(self, data: Tensor, name: str = "") -> None:
        if data.ndim != 4:
            raise DimensionError(f"Feature maps are N×C×H×W, got shape {data.shape}")
        self._data = data
        self._name = name

    @property
    def data(self) -> Tensor:
        return self._data

    @property
    def name(self) -> str:
        return self._name

    @property
    def channels(self) -> int:
        return self._data.shape[1]

    @property
    def height(self) -> int:
        return self._data.shape[2]

    @property
    def width(self) -> int:
        return self._data.shape[3]

    @property
    def spatial(self) -> Tuple[int, int]:
        return self.height, self.width

    def __str__(self) -> str:
        return "FeatureMap[name={}, channels={}, height={}, width={}]".format(
            self._name, self.channels, self.height, self.width
        )


class CdnaKernelSet:
    """
    N×n_kernels×k×k normalized advection kernels. The identity slot is
    implicit and added by apply_cdna.
    """

    def __init__(self, kernels: Tensor) -> None:
        if kernels.ndim != 4 or kernels.shape[2] != kernels.shape[3]:
            raise DimensionError(f"Expected N×M×k×k kernels, got {kernels.shape}")
        self._kernels = kernels

    @property
    def kernels(self) -> Tensor:
        return self._kernels

    @property
    def count(self) -> int:
        return self._kernels.shape[1]

    @property
    def size(self) -> int:
        return self._kernels.shape[2]

    def __str__(self) -> str:
        return "CdnaKernelSet[count={}, size={}]".format(self.count, self.size)
