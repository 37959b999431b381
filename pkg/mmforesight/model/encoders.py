from typing import List, Optional, Sequence, Tuple, Union

import numpy as np

from ..exceptions import DimensionError
from ..sensors import Behavior, FrameConfig
from ..tensor import (
    Conv2d,
    ConvLSTMCell,
    ConvLSTMState,
    Module,
    Tensor,
    TensorLike,
    as_tensor,
    get_default_dtype,
    relu,
    tile_spatial,
)
from .structures import FeatureMap, ModelConfig

EncoderState = List[Optional[ConvLSTMState]]


def _batch(frame: TensorLike, ndim: int) -> Tensor:
    frame = as_tensor(frame)
    if frame.ndim == ndim - 1:
        return frame.reshape((1,) + frame.shape)
    return frame


def _fresh(state: Optional[EncoderState], layers: int) -> EncoderState:
    return list(state) if state is not None else [None] * layers


class VisionEncoder(Module):
    """
    Two downsampling conv stages with a ConvLSTM after each, then a final
    conv onto the common grid. Both ConvLSTM outputs are kept as skips for
    the mask head.
    """

    def __init__(self, config: ModelConfig, frame: FrameConfig, rng: np.random.Generator) -> None:
        if frame.image_size != 4 * config.grid:
            raise DimensionError(
                f"A {frame.image_size}px frame does not reduce onto a {config.grid}×{config.grid} grid"
            )
        self.image_size = frame.image_size
        k = config.lstm_kernel
        self.conv0 = Conv2d(3, 16, 5, rng, stride=2, padding=2)
        self.lstm0 = ConvLSTMCell(16, 16, k, rng)
        self.conv1 = Conv2d(16, 32, 3, rng, stride=2, padding=1)
        self.lstm1 = ConvLSTMCell(32, 32, k, rng)
        self.conv2 = Conv2d(32, config.vision_channels, 3, rng, stride=1, padding=1)

    @property
    def skip_channels(self) -> Tuple[int, int]:
        return 16, 32

    def forward(
        self, frame: TensorLike, state: Optional[EncoderState] = None
    ) -> Tuple[FeatureMap, List[FeatureMap], EncoderState]:
        x = _batch(frame, 4)
        expected = (3, self.image_size, self.image_size)
        if x.ndim != 4 or x.shape[1:] != expected:
            raise DimensionError(f"Vision frames must be {expected}, got {x.shape}")
        state = _fresh(state, 2)

        skip16, state[0] = self.lstm0(relu(self.conv0(x)), state[0])
        skip8, state[1] = self.lstm1(relu(self.conv1(skip16)), state[1])
        out = relu(self.conv2(skip8))
        return (
            FeatureMap(out, "vision"),
            [FeatureMap(skip16, "skip16"), FeatureMap(skip8, "skip8")],
            state,
        )


def tile_haptic(frame: TensorLike, grid: int) -> Tensor:
    """
    Flattens N×M_d×M_d' haptic frames and tiles the vector over a grid×grid
    map, giving N×(M_d·M_d')×grid×grid.
    """
    x = _batch(frame, 3)
    if x.ndim != 3:
        raise DimensionError(f"Haptic frames must be N×M_d×M_d', got {x.shape}")
    return tile_spatial(x.reshape(x.shape[0], x.shape[1] * x.shape[2]), grid, grid)


def fold_bands(frame: TensorLike, grid: int) -> Tensor:
    """
    Reshapes N×bins×steps spectrogram frames into N×(bins/grid)×grid×steps
    band images; each channel holds `grid` adjacent frequency rows.
    """
    x = _batch(frame, 3)
    if x.ndim != 3 or x.shape[1] % grid != 0 or x.shape[2] != grid:
        raise DimensionError(
            f"Spectrogram frames of shape {x.shape[1:]} do not fold onto a {grid}×{grid} grid"
        )
    return x.reshape(x.shape[0], x.shape[1] // grid, grid, x.shape[2])


def unfold_bands(maps: TensorLike) -> Tensor:
    x = as_tensor(maps)
    return x.reshape(x.shape[0], x.shape[1] * x.shape[2], x.shape[3])


class HapticEncoder(Module):
    def __init__(self, config: ModelConfig, frame: FrameConfig, rng: np.random.Generator) -> None:
        self.grid = config.grid
        self.frame_shape = frame.frame_shape("haptic")
        features = frame.haptic_channels * frame.haptic_steps
        self.conv = Conv2d(features, config.haptic_channels, 3, rng, padding=1)
        self.lstm = ConvLSTMCell(config.haptic_channels, config.haptic_channels, config.lstm_kernel, rng)

    def forward(
        self, frame: TensorLike, state: Optional[EncoderState] = None
    ) -> Tuple[FeatureMap, EncoderState]:
        x = _batch(frame, 3)
        if x.shape[1:] != self.frame_shape:
            raise DimensionError(f"Haptic frames must be {self.frame_shape}, got {x.shape}")
        state = _fresh(state, 1)
        out, state[0] = self.lstm(relu(self.conv(tile_haptic(x, self.grid))), state[0])
        return FeatureMap(out, "haptic"), state


class SpectrogramEncoder(Module):
    """
    Encoder for audio and vibro spectrogram frames: band fold, one conv and
    one ConvLSTM.
    """

    def __init__(
        self,
        modality: str,
        config: ModelConfig,
        frame: FrameConfig,
        rng: np.random.Generator,
    ) -> None:
        self._modality = modality
        self.grid = config.grid
        self.frame_shape = frame.frame_shape(modality)
        bins, steps = self.frame_shape
        if bins % config.grid != 0 or steps != config.grid:
            raise DimensionError(
                f"{modality} frames {self.frame_shape} do not fold onto a {config.grid}×{config.grid} grid"
            )
        channels = config.encoder_channels(modality)
        self.conv = Conv2d(bins // config.grid, channels, 3, rng, padding=1)
        self.lstm = ConvLSTMCell(channels, channels, config.lstm_kernel, rng)

    def forward(
        self, frame: TensorLike, state: Optional[EncoderState] = None
    ) -> Tuple[FeatureMap, EncoderState]:
        x = _batch(frame, 3)
        if x.shape[1:] != self.frame_shape:
            raise DimensionError(
                f"{self._modality} frames must be {self.frame_shape}, got {x.shape}"
            )
        state = _fresh(state, 1)
        out, state[0] = self.lstm(relu(self.conv(fold_bands(x, self.grid))), state[0])
        return FeatureMap(out, self._modality), state


def embed_behavior(behaviors: Union[str, Sequence[str]], grid: int = 8, dtype=None) -> FeatureMap:
    """
    One-hot behavior labels tiled to N×9×grid×grid
    """
    if isinstance(behaviors, str):
        behaviors = [behaviors]
    onehot = np.zeros((len(behaviors), len(Behavior.ALL)), dtype=dtype or get_default_dtype())
    for row, behavior in enumerate(behaviors):
        onehot[row, Behavior.index(behavior)] = 1.0
    maps = np.broadcast_to(onehot[:, :, None, None], onehot.shape + (grid, grid)).copy()
    return FeatureMap(Tensor(maps), "behavior")
