import logging
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from ..exceptions import ConfigError, ContractError
from ..sensors import FrameConfig, Modality, SampleQuadruple
from ..tensor import ConvLSTMState, Module, Tensor, TensorLike
from .encoders import (
    EncoderState,
    HapticEncoder,
    SpectrogramEncoder,
    VisionEncoder,
    embed_behavior,
)
from .heads import AuxDecoder, CdnaHead, Fusion, MaskHead, apply_cdna, compose, decode_aux
from .structures import CdnaKernelSet, FeatureMap, ModalityMask, ModelConfig

Samples = Union[SampleQuadruple, Sequence[SampleQuadruple]]


class PredictorState:
    """
    Recurrent state of every encoder plus the fusion ConvLSTM. A fresh state
    means zero hidden and cell maps everywhere.
    """

    def __init__(
        self,
        encoders: Optional[Dict[str, EncoderState]] = None,
        fusion: Optional[ConvLSTMState] = None,
    ) -> None:
        self._encoders = dict(encoders or {})
        self._fusion = fusion

    def encoder(self, modality: str) -> Optional[EncoderState]:
        return self._encoders.get(modality)

    @property
    def fusion(self) -> Optional[ConvLSTMState]:
        return self._fusion

    def __str__(self) -> str:
        return "PredictorState[encoders={}, fusion={}]".format(
            sorted(self._encoders), self._fusion
        )


class StepOutput:
    def __init__(
        self,
        vision: Tensor,
        aux: Dict[str, Tensor],
        kernels: CdnaKernelSet,
        masks: Tensor,
        fused: FeatureMap,
    ) -> None:
        self.vision = vision
        self.aux = aux
        self.kernels = kernels
        self.masks = masks
        self.fused = fused


class RolloutResult:
    """
    Predictions for frames K..T-1 (0-indexed) of a batch of equal-length
    trials. Each entry is an N×... tensor for one timestep.
    """

    def __init__(
        self,
        vision: List[Tensor],
        aux: Dict[str, List[Tensor]],
        context: int,
        length: int,
        behaviors: Sequence[str] = (),
        trial_ids: Sequence[int] = (),
    ) -> None:
        if len(vision) != length - context:
            raise ContractError(
                f"{len(vision)} vision predictions for T={length}, K={context}"
            )
        for modality, frames in aux.items():
            if len(frames) != len(vision):
                raise ContractError(f"{modality} has {len(frames)} predictions, vision has {len(vision)}")

        self._vision = list(vision)
        self._aux = {modality: list(frames) for modality, frames in aux.items()}
        self._context = context
        self._length = length
        self._behaviors = list(behaviors)
        self._trial_ids = list(trial_ids)

    @property
    def vision(self) -> List[Tensor]:
        return self._vision

    @property
    def aux(self) -> Dict[str, List[Tensor]]:
        return self._aux

    @property
    def K(self) -> int:
        return self._context

    @property
    def T(self) -> int:
        return self._length

    @property
    def behaviors(self) -> List[str]:
        return self._behaviors

    @property
    def trial_ids(self) -> List[int]:
        return self._trial_ids

    @property
    def target_indices(self) -> List[int]:
        return list(range(self._context, self._length))

    def predicted(self, modality: str) -> List[Tensor]:
        if modality == Modality.VISION:
            return self._vision
        return self._aux.get(modality, [])

    def has(self, modality: str) -> bool:
        return len(self.predicted(modality)) > 0

    def to_numpy(self, modality: str) -> np.ndarray:
        """
        :return: N×(T-K)×frame_shape
        """
        frames = self.predicted(modality)
        if not frames:
            raise ContractError(f"No {modality} predictions in this rollout")
        return np.stack([frame.data for frame in frames], axis=1)

    def __len__(self) -> int:
        return len(self._vision)

    def __str__(self) -> str:
        return "RolloutResult[T={}, K={}, batch={}, aux={}]".format(
            self._length,
            self._context,
            self._vision[0].shape[0] if self._vision else 0,
            sorted(self._aux),
        )


class MultimodalPredictor(Module):
    """
    Per-modality encoders, a fusion ConvLSTM, the CDNA visual head and the
    optional auxiliary decoders. Only the modules the mask enables exist, so
    the parameter set (and the checkpoint layout) follows the mask.
    """

    def __init__(
        self,
        config: Optional[ModelConfig] = None,
        mask: Optional[ModalityMask] = None,
        frame: Optional[FrameConfig] = None,
        seed: int = 0,
    ) -> None:
        self._config = config or ModelConfig.default()
        self._mask = mask or ModalityMask.vision_only()
        self._frame = frame or FrameConfig.default()
        self._seed = seed
        rng = np.random.default_rng(seed)

        self.vision = VisionEncoder(self._config, self._frame, rng)
        self.encoders = {}
        for modality in self._mask.enabled[1:]:
            if modality == Modality.HAPTIC:
                self.encoders[modality] = HapticEncoder(self._config, self._frame, rng)
            else:
                self.encoders[modality] = SpectrogramEncoder(modality, self._config, self._frame, rng)
        self.fusion = Fusion(self._config, self._mask, rng)
        self.cdna = CdnaHead(self._config, rng)
        self.masks = MaskHead(self._config, self.vision.skip_channels, rng)
        self.decoders = {
            modality: AuxDecoder(modality, self._config, self._frame, rng)
            for modality in self._mask.aux_modalities
        }

        logging.getLogger("mmforesight.py").debug(
            f"Built predictor {self._mask.label} with {self.num_parameters()} parameters"
        )

    @property
    def config(self) -> ModelConfig:
        return self._config

    @property
    def mask(self) -> ModalityMask:
        return self._mask

    @property
    def frame_config(self) -> FrameConfig:
        return self._frame

    @property
    def seed(self) -> int:
        return self._seed

    @property
    def dtype(self):
        return self.vision.conv0.weight.dtype

    def _input(self, value: TensorLike) -> Tensor:
        if isinstance(value, Tensor):
            return value
        return Tensor(np.asarray(value, dtype=self.dtype))

    def encode_vision(
        self, frame: TensorLike, state: Optional[EncoderState] = None
    ) -> Tuple[FeatureMap, List[FeatureMap], EncoderState]:
        return self.vision(self._input(frame), state)

    def _encode(
        self, modality: str, frame: TensorLike, state: Optional[EncoderState] = None
    ) -> Tuple[FeatureMap, EncoderState]:
        if modality not in self.encoders:
            raise ContractError(f"{modality} is not enabled in {self._mask}")
        return self.encoders[modality](self._input(frame), state)

    def encode_haptic(self, frame: TensorLike, state: Optional[EncoderState] = None):
        return self._encode(Modality.HAPTIC, frame, state)

    def encode_audio(self, frame: TensorLike, state: Optional[EncoderState] = None):
        return self._encode(Modality.AUDIO, frame, state)

    def encode_vibro(self, frame: TensorLike, state: Optional[EncoderState] = None):
        return self._encode(Modality.VIBRO, frame, state)

    def embed_behavior(self, behaviors: Sequence[str]) -> FeatureMap:
        return embed_behavior(behaviors, self._config.grid, dtype=self.dtype)

    def fuse(
        self, maps: Sequence[FeatureMap], state: Optional[ConvLSTMState] = None
    ) -> Tuple[FeatureMap, ConvLSTMState]:
        return self.fusion(maps, state)

    def decode_aux(self, fused: FeatureMap, modality: str) -> Tensor:
        return decode_aux(self.decoders, fused, modality, self._mask)

    def reset(self) -> PredictorState:
        return PredictorState()

    def step(
        self,
        inputs: Dict[str, TensorLike],
        behaviors: Sequence[str],
        state: Optional[PredictorState] = None,
    ) -> Tuple[StepOutput, PredictorState]:
        """
        Consumes the frames of one timestep and predicts the next one.

        :param inputs: a batch of frames for every enabled modality
        :param behaviors: one label per batch entry, used when the mask
            enables the behavior feature
        """
        state = state or self.reset()
        frame = self._input(inputs[Modality.VISION])
        encoder_states = {}

        vision_map, skips, encoder_states[Modality.VISION] = self.encode_vision(
            frame, state.encoder(Modality.VISION)
        )
        maps = [vision_map]
        for modality in self._mask.enabled[1:]:
            if modality not in inputs:
                raise ContractError(f"Missing {modality} input for {self._mask}")
            feature, encoder_states[modality] = self._encode(
                modality, inputs[modality], state.encoder(modality)
            )
            maps.append(feature)
        if self._mask.use_behavior:
            maps.append(self.embed_behavior(behaviors))

        fused, fusion_state = self.fuse(maps, state.fusion)
        kernels = self.cdna(fused)
        masks = self.masks(fused, skips)
        prediction = compose(apply_cdna(frame, kernels), masks)
        aux = {modality: self.decode_aux(fused, modality) for modality in self._mask.aux_modalities}

        return (
            StepOutput(prediction, aux, kernels, masks, fused),
            PredictorState(encoder_states, fusion_state),
        )

    def rollout(
        self,
        sample: Samples,
        K: int,
        mask: Optional[ModalityMask] = None,
        teacher_forcing: Union[bool, float] = True,
        feed_aux: bool = False,
    ) -> RolloutResult:
        return rollout(self, sample, K, mask, teacher_forcing, feed_aux)

    def __str__(self) -> str:
        return "MultimodalPredictor[mask={}, fusion_channels={}, parameters={}]".format(
            self._mask.label, self._config.fusion_channels, self.num_parameters()
        )


def as_batch(sample: Samples) -> List[SampleQuadruple]:
    samples = [sample] if isinstance(sample, SampleQuadruple) else list(sample)
    if not samples:
        raise ContractError("Empty batch")
    lengths = {s.T for s in samples}
    if len(lengths) != 1:
        raise ContractError(f"A batch needs trials of one length, got {sorted(lengths)}")
    return samples


def stack_frames(samples: Sequence[SampleQuadruple], modality: str) -> np.ndarray:
    """
    :return: T×N×frame_shape
    """
    return np.stack([sample.frames(modality) for sample in samples], axis=1)


def forced_steps(teacher_forcing: Union[bool, float], horizon: int) -> int:
    """
    Number of steps past the context that still consume ground-truth vision
    """
    if isinstance(teacher_forcing, bool):
        return horizon if teacher_forcing else 0
    if not 0.0 <= teacher_forcing <= 1.0:
        raise ContractError("Teacher forcing ratio must lie in [0, 1]")
    return int(round(teacher_forcing * horizon))


def rollout(
    model: MultimodalPredictor,
    sample: Samples,
    K: int,
    mask: Optional[ModalityMask] = None,
    teacher_forcing: Union[bool, float] = True,
    feed_aux: bool = False,
) -> RolloutResult:
    """
    Autoregressive rollout over a batch of trials of equal length T.

    Step s consumes frame s and predicts frame s + 1. Vision inputs are
    ground truth while s < K; after that they are ground truth for the
    teacher-forced steps and the previous prediction otherwise. Non-visual
    inputs are ground truth, or the previous auxiliary prediction once past
    the context when `feed_aux` is set. Predictions of frames K..T-1 are
    returned.
    """
    samples = as_batch(sample)
    length = samples[0].T
    if not 1 <= K < length:
        raise ContractError(f"Need 1 <= K < T, got K={K} and T={length}")
    if mask is not None and not model.mask.compatible_with(mask):
        raise ConfigError(f"Model trained with {model.mask} cannot serve {mask}")

    frames = {modality: stack_frames(samples, modality) for modality in model.mask.enabled}
    behaviors = [s.behavior for s in samples]
    forced = forced_steps(teacher_forcing, length - K)

    state = model.reset()
    vision: List[Tensor] = []
    aux: Dict[str, List[Tensor]] = {m: [] for m in model.mask.aux_modalities}
    previous: Optional[StepOutput] = None

    for step in range(length - 1):
        if step < K or step - K < forced:
            inputs = {Modality.VISION: frames[Modality.VISION][step]}
        else:
            inputs = {Modality.VISION: previous.vision}
        for modality in model.mask.enabled[1:]:
            if feed_aux and step >= K and modality in previous.aux:
                inputs[modality] = previous.aux[modality]
            else:
                inputs[modality] = frames[modality][step]

        previous, state = model.step(inputs, behaviors, state)
        if step + 1 >= K:
            vision.append(previous.vision)
            for modality in aux:
                aux[modality].append(previous.aux[modality])

    return RolloutResult(vision, aux, K, length, behaviors, [s.trial_id for s in samples])
