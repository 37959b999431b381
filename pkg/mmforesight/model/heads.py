from typing import Dict, Optional, Sequence, Tuple

import numpy as np

from ..exceptions import ContractError, DimensionError
from ..sensors import FrameConfig, Modality
from ..tensor import (
    Conv2d,
    ConvLSTMCell,
    ConvLSTMState,
    ConvTranspose2d,
    Linear,
    Module,
    Tensor,
    TensorLike,
    as_tensor,
    clamp,
    concat,
    depthwise_advect,
    relu,
    softmax,
)
from .encoders import unfold_bands
from .structures import CdnaKernelSet, FeatureMap, ModalityMask, ModelConfig


class Fusion(Module):
    """
    Channel concatenation of the enabled maps, one conv and one ConvLSTM.
    The output width is fixed whatever the number of inputs.
    """

    def __init__(self, config: ModelConfig, mask: ModalityMask, rng: np.random.Generator) -> None:
        self.in_channels = config.fusion_inputs(mask)
        self.out_channels = config.fusion_channels
        self.conv = Conv2d(self.in_channels, self.out_channels, 3, rng, padding=1)
        self.lstm = ConvLSTMCell(self.out_channels, self.out_channels, config.lstm_kernel, rng)

    def forward(
        self, maps: Sequence[FeatureMap], state: Optional[ConvLSTMState] = None
    ) -> Tuple[FeatureMap, ConvLSTMState]:
        if len(maps) == 0:
            raise ContractError("Nothing to fuse")
        spatial = maps[0].spatial
        for feature in maps[1:]:
            if feature.spatial != spatial:
                raise DimensionError(
                    f"{feature.name} map is {feature.spatial}, {maps[0].name} map is {spatial}"
                )
        channels = sum(feature.channels for feature in maps)
        if channels != self.in_channels:
            raise ContractError(
                f"Fusion expects {self.in_channels} channels, got {channels} from "
                f"{[feature.name for feature in maps]}"
            )

        x = concat([feature.data for feature in maps], axis=1)
        out, state = self.lstm(relu(self.conv(x)), state)
        return FeatureMap(out, "fused"), state


class CdnaHead(Module):
    """
    Dense projection of the flattened fused map to n_kernels·k·k logits,
    normalized per kernel by a spatial softmax.
    """

    def __init__(self, config: ModelConfig, rng: np.random.Generator) -> None:
        self.n_kernels = config.n_kernels
        self.kernel_size = config.kernel_size
        features = config.fusion_channels * config.grid * config.grid
        self.dense = Linear(features, config.cdna_logits, rng)

    def forward(self, fused: FeatureMap) -> CdnaKernelSet:
        x = fused.data
        logits = self.dense(x.reshape(x.shape[0], -1))
        logits = logits.reshape(x.shape[0], self.n_kernels, self.kernel_size, self.kernel_size)
        return CdnaKernelSet(softmax(logits, axes=(2, 3)))


def apply_cdna(prev_frame: TensorLike, kernels: CdnaKernelSet) -> Tensor:
    """
    Advects the previous frame with every kernel and appends an unchanged
    copy as the last slot.

    :param prev_frame: N×C×H×W (or C×H×W)
    :return: N×(n_kernels + 1)×C×H×W transformed frames
    """
    frame = as_tensor(prev_frame)
    if frame.ndim == 3:
        frame = frame.reshape((1,) + frame.shape)
    moved = depthwise_advect(frame, kernels.kernels)
    identity = frame.reshape(frame.shape[0], 1, *frame.shape[1:])
    return concat([moved, identity], axis=1)


class MaskHead(Module):
    """
    Upsamples the fused map back to frame resolution with the vision skips
    concatenated in at matching sizes, then a channel softmax over the
    compositing masks.
    """

    def __init__(self, config: ModelConfig, skip_channels: Tuple[int, int], rng: np.random.Generator) -> None:
        skip16, skip8 = skip_channels
        self.up8 = ConvTranspose2d(config.fusion_channels + skip8, 32, 4, rng, stride=2, padding=1)
        self.up16 = ConvTranspose2d(32 + skip16, 16, 4, rng, stride=2, padding=1)
        self.logits = Conv2d(16, config.mask_channels, 1, rng)

    @staticmethod
    def _join(x: Tensor, skip: FeatureMap) -> Tensor:
        if x.shape[2:] != skip.data.shape[2:]:
            raise DimensionError(
                f"Skip {skip.name} is {skip.spatial}, the decoder is at {x.shape[2:]}"
            )
        return concat([x, skip.data], axis=1)

    def forward(self, fused: FeatureMap, skips: Sequence[FeatureMap]) -> Tensor:
        if len(skips) != 2:
            raise ContractError(f"Expected two vision skips, got {len(skips)}")
        skip16, skip8 = skips
        x = relu(self.up8(self._join(fused.data, skip8)))
        x = relu(self.up16(self._join(x, skip16)))
        return softmax(self.logits(x), axes=1)


def compose(transformed: TensorLike, masks: TensorLike) -> Tensor:
    """
    Per-pixel mask-weighted sum of the transformed frames, clamped to [0, 1]

    :param transformed: N×M×C×H×W (or M×C×H×W)
    :param masks: N×M×H×W (or M×H×W)
    """
    j = as_tensor(transformed)
    m = as_tensor(masks)
    if j.ndim == 4 and m.ndim == 3:
        j = j.reshape((1,) + j.shape)
        m = m.reshape((1,) + m.shape)
    if j.ndim != 5 or m.ndim != 4:
        raise DimensionError(f"Cannot compose frames {j.shape} with masks {m.shape}")
    if j.shape[1] != m.shape[1]:
        raise ContractError(
            f"{j.shape[1]} transformed frames but {m.shape[1]} mask channels"
        )
    if j.shape[0] != m.shape[0] or j.shape[3:] != m.shape[2:]:
        raise DimensionError(f"Cannot compose frames {j.shape} with masks {m.shape}")

    weighted = j * m.reshape(m.shape[0], m.shape[1], 1, m.shape[2], m.shape[3])
    return clamp(weighted.sum(axis=1), 0.0, 1.0)


class AuxDecoder(Module):
    """
    Two transposed convs from the fused map to a grid×grid image per
    modality channel, folded back into the modality's frame shape.
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
        rows, steps = self.frame_shape
        if steps != config.grid:
            raise DimensionError(f"{modality} frames need {config.grid} in-frame steps")
        if modality == Modality.HAPTIC:
            out_channels = rows
        else:
            out_channels = rows // config.grid

        self.up0 = ConvTranspose2d(config.fusion_channels, config.decoder_channels, 3, rng, padding=1)
        self.up1 = ConvTranspose2d(config.decoder_channels, out_channels, 3, rng, padding=1)

    def forward(self, fused: FeatureMap) -> Tensor:
        x = self.up1(relu(self.up0(fused.data)))
        if self._modality == Modality.HAPTIC:
            # one image per channel, rows averaged into the in-frame steps
            return x.mean(axis=2)
        return unfold_bands(x)


def decode_aux(
    decoders: Dict[str, AuxDecoder], fused: FeatureMap, modality: str, mask: ModalityMask
) -> Tensor:
    if modality not in mask.aux_modalities or modality not in decoders:
        raise ContractError(f"No auxiliary decoder for {modality} under {mask}")
    return decoders[modality](fused)
