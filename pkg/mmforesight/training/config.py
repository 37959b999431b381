from typing import Dict, Optional, Union

from ..exceptions import ConfigError
from ..model import ModalityMask, ModelConfig
from .loss import LossWeights


class TrainConfig:
    """
    Training hyperparameters. `teacher_forcing` is True for pure forcing,
    False for self-feeding, or "linear" to decay from forcing to self-feeding
    over the epochs.
    """

    def __init__(
        self,
        lr: float = 1e-3,
        epochs: int = 30,
        batch_size: int = 32,
        K: int = 4,
        seed: int = 0,
        weights: Optional[LossWeights] = None,
        mask: Optional[ModalityMask] = None,
        model: Optional[ModelConfig] = None,
        teacher_forcing: Union[bool, str] = True,
        clip_norm: Optional[float] = 5.0,
        workers: int = 0,
        prefetch: int = 4,
    ) -> None:
        if lr <= 0:
            raise ConfigError("Learning rate must be positive")
        if epochs < 1:
            raise ConfigError("At least one epoch is needed")
        if batch_size < 1:
            raise ConfigError("Batch size must be at least 1")
        if K < 1:
            raise ConfigError("At least one context frame is needed")
        if teacher_forcing not in (True, False, "linear"):
            raise ConfigError(f"Unknown teacher forcing schedule {teacher_forcing!r}")
        if clip_norm is not None and clip_norm <= 0:
            raise ConfigError("Clip norm must be positive")
        if workers < 0:
            raise ConfigError("Worker count cannot be negative")

        self.lr = lr
        self.epochs = epochs
        self.batch_size = batch_size
        self.K = K
        self.seed = seed
        self.weights = weights or LossWeights.default()
        self.mask = mask or ModalityMask.vision_only()
        self.model = model or ModelConfig.default()
        self.teacher_forcing = teacher_forcing
        self.clip_norm = clip_norm
        self.workers = workers
        self.prefetch = prefetch

    @classmethod
    def default(cls) -> "TrainConfig":
        return cls()

    def forcing_ratio(self, epoch: int) -> Union[bool, float]:
        if self.teacher_forcing != "linear":
            return self.teacher_forcing
        if self.epochs == 1:
            return 1.0
        return 1.0 - epoch / (self.epochs - 1)

    def replace(self, **changes) -> "TrainConfig":
        values = self.to_kwargs()
        values.update(changes)
        return TrainConfig(**values)

    def to_kwargs(self) -> Dict[str, object]:
        return dict(vars(self))

    def echo(self) -> Dict[str, object]:
        return {
            f"train.{key}": value
            for key, value in vars(self).items()
            if key not in ("weights", "mask", "model")
        }

    def __str__(self) -> str:
        return "TrainConfig[lr={}, epochs={}, batch_size={}, K={}, seed={}, mask={}, teacher_forcing={}]".format(
            self.lr,
            self.epochs,
            self.batch_size,
            self.K,
            self.seed,
            self.mask.label,
            self.teacher_forcing,
        )
