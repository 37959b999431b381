from typing import Dict, Iterable, Optional, Union

import numpy as np

from ..exceptions import ContractError
from ..sensors import Modality, SampleQuadruple
from ..tensor import Tensor
from .predictor import RolloutResult, Samples, as_batch, stack_frames
from .structures import ModalityMask


class PersistenceBaseline:
    """
    Repeats the last context frame for every predicted step.
    """

    mask = ModalityMask.vision_only()

    def rollout(
        self,
        sample: Samples,
        K: int,
        mask: Optional[ModalityMask] = None,
        teacher_forcing: Union[bool, float] = False,
        feed_aux: bool = False,
    ) -> RolloutResult:
        samples = as_batch(sample)
        length = samples[0].T
        if not 1 <= K < length:
            raise ContractError(f"Need 1 <= K < T, got K={K} and T={length}")
        last = Tensor(stack_frames(samples, Modality.VISION)[K - 1])
        return RolloutResult(
            [last] * (length - K),
            self._aux(samples, length - K),
            K,
            length,
            [s.behavior for s in samples],
            [s.trial_id for s in samples],
        )

    def _aux(self, samples, horizon: int) -> Dict[str, list]:
        return {}

    def __str__(self) -> str:
        return "PersistenceBaseline[]"


class TrainingMeanBaseline(PersistenceBaseline):
    """
    Persistence for vision, and the per-channel training mean for every
    non-visual modality.
    """

    mask = ModalityMask.all(aux_training=True)

    def __init__(self, training_split: Iterable[SampleQuadruple]) -> None:
        samples = list(training_split)
        if not samples:
            raise ContractError("Cannot take means of an empty split")
        self._means = {}
        for modality in Modality.NON_VISUAL:
            frames = np.concatenate([s.frames(modality) for s in samples], axis=0)
            # frames×channels×steps -> one value per channel
            self._means[modality] = frames.mean(axis=(0, 2))

    @property
    def means(self) -> Dict[str, np.ndarray]:
        return self._means

    def _aux(self, samples, horizon: int) -> Dict[str, list]:
        aux = {}
        for modality, mean in self._means.items():
            steps = samples[0].frames(modality).shape[2]
            frame = np.broadcast_to(
                mean[None, :, None], (len(samples), len(mean), steps)
            ).astype(samples[0].frames(modality).dtype)
            aux[modality] = [Tensor(frame)] * horizon
        return aux

    def __str__(self) -> str:
        return "TrainingMeanBaseline[{}]".format(
            ", ".join(f"{m}={len(v)} channels" for m, v in self._means.items())
        )
