from typing import Dict, Sequence, Union

import numpy as np

from ..exceptions import ConfigError, ContractError
from ..model import ModalityMask, RolloutResult
from ..model.predictor import as_batch, stack_frames
from ..sensors import Modality, SampleQuadruple
from ..tensor import Tensor, mse


class LossWeights:
    """
    Per-modality weights of the multi-task objective
    """

    def __init__(
        self,
        vision: float = 1.0,
        haptic: float = 1e-4,
        audio: float = 1e-3,
        vibro: float = 1e-4,
    ) -> None:
        if vision <= 0:
            raise ConfigError("The vision weight must be positive")
        if min(haptic, audio, vibro) < 0:
            raise ConfigError("Loss weights cannot be negative")
        self._weights = {
            Modality.VISION: float(vision),
            Modality.HAPTIC: float(haptic),
            Modality.AUDIO: float(audio),
            Modality.VIBRO: float(vibro),
        }

    @classmethod
    def default(cls) -> "LossWeights":
        return cls()

    def __getitem__(self, modality: str) -> float:
        return self._weights[modality]

    def for_mask(self, mask: ModalityMask) -> "LossWeights":
        """
        Zeroes every modality without an auxiliary head under `mask`
        """
        aux = set(mask.aux_modalities)
        return LossWeights(
            *[
                self._weights[m] if m == Modality.VISION or m in aux else 0.0
                for m in Modality.ALL
            ]
        )

    def to_dict(self) -> Dict[str, float]:
        return dict(self._weights)

    def __str__(self) -> str:
        return "LossWeights[{}]".format(
            ", ".join(f"{m}={w:g}" for m, w in self._weights.items())
        )


def loss_terms(
    rollout: RolloutResult, sample: Union[SampleQuadruple, Sequence[SampleQuadruple]]
) -> Dict[str, Tensor]:
    """
    MSE of every predicted modality, averaged over the predicted timesteps
    and their elements.
    """
    samples = as_batch(sample)
    if samples[0].T != rollout.T or len(samples) != rollout.vision[0].shape[0]:
        raise ContractError(
            f"Rollout (T={rollout.T}) does not line up with {len(samples)} trials of T={samples[0].T}"
        )
    if rollout.trial_ids and rollout.trial_ids != [s.trial_id for s in samples]:
        raise ContractError("Rollout and targets come from different trials")

    terms = {}
    for modality in Modality.ALL:
        predictions = rollout.predicted(modality)
        if not predictions:
            continue
        targets = stack_frames(samples, modality)[rollout.K :]
        total = None
        for prediction, target in zip(predictions, targets):
            error = mse(prediction, np.asarray(target, dtype=prediction.dtype))
            total = error if total is None else total + error
        terms[modality] = total * (1.0 / len(predictions))
    return terms


def weighted_sum(terms: Dict[str, Tensor], weights: LossWeights) -> Tensor:
    total = terms[Modality.VISION] * weights[Modality.VISION]
    for modality in Modality.NON_VISUAL:
        if modality in terms and weights[modality] > 0:
            total = total + terms[modality] * weights[modality]
    return total


def total_loss(
    rollout: RolloutResult,
    sample: Union[SampleQuadruple, Sequence[SampleQuadruple]],
    weights: LossWeights,
) -> Tensor:
    return weighted_sum(loss_terms(rollout, sample), weights)
