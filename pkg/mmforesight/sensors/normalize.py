import logging
from typing import Dict, Iterable, List, Sequence

import numpy as np

from ..exceptions import ContractError
from .structures import Modality, SampleQuadruple


class ModalityStats:
    def __init__(self, mean: np.ndarray, std: np.ndarray, clamped: Sequence[int] = ()) -> None:
        self._mean = np.asarray(mean, dtype=np.float64)
        self._std = np.asarray(std, dtype=np.float64)
        self._clamped = list(clamped)

    @property
    def mean(self) -> np.ndarray:
        return self._mean

    @property
    def std(self) -> np.ndarray:
        return self._std

    @property
    def clamped(self) -> List[int]:
        return self._clamped

    def apply(self, frames: np.ndarray) -> np.ndarray:
        # frames: ...×channels×steps
        return (frames - self._mean[:, None]) / self._std[:, None]

    def invert(self, frames: np.ndarray) -> np.ndarray:
        return frames * self._std[:, None] + self._mean[:, None]

    def __str__(self) -> str:
        return "ModalityStats[channels={}, clamped={}]".format(
            len(self._mean), self._clamped
        )


class NormalizationStats:
    """
    Per-channel mean/std of each non-visual modality, measured on a training
    split. Vision is left in [0, 1].
    """

    def __init__(self, stats: Dict[str, ModalityStats]) -> None:
        missing = [m for m in Modality.NON_VISUAL if m not in stats]
        if missing:
            raise ContractError(f"Missing statistics for {missing}")
        self._stats = dict(stats)

    def __getitem__(self, modality: str) -> ModalityStats:
        return self._stats[modality]

    def items(self):
        return self._stats.items()

    def to_arrays(self) -> Dict[str, np.ndarray]:
        arrays = {}
        for modality, stats in self._stats.items():
            arrays[f"stats.{modality}.mean"] = stats.mean
            arrays[f"stats.{modality}.std"] = stats.std
        return arrays

    @classmethod
    def from_arrays(cls, arrays: Dict[str, np.ndarray]) -> "NormalizationStats":
        return cls(
            {
                modality: ModalityStats(
                    arrays[f"stats.{modality}.mean"], arrays[f"stats.{modality}.std"]
                )
                for modality in Modality.NON_VISUAL
            }
        )

    def __str__(self) -> str:
        return "NormalizationStats[{}]".format(
            ", ".join(f"{m}={s}" for m, s in self._stats.items())
        )


def compute_stats(training_split: Iterable[SampleQuadruple]) -> NormalizationStats:
    """
    Two-pass per-channel reduction over every frame and in-frame step of the
    training trials. A channel whose minimum equals its maximum has zero
    variance whatever the rounding of the mean.
    """
    logger = logging.getLogger("mmforesight.py")
    samples = list(training_split)
    if not samples:
        raise ContractError("Cannot compute statistics of an empty split")

    stats = {}
    for modality in Modality.NON_VISUAL:
        streams = [np.asarray(sample.frames(modality), dtype=np.float64) for sample in samples]
        count = sum(frames.shape[0] * frames.shape[2] for frames in streams)
        mean = sum(frames.sum(axis=(0, 2)) for frames in streams) / count
        low = np.min([frames.min(axis=(0, 2)) for frames in streams], axis=0)
        high = np.max([frames.max(axis=(0, 2)) for frames in streams], axis=0)

        squares = sum(
            np.square(frames - mean[None, :, None]).sum(axis=(0, 2)) for frames in streams
        )
        std = np.sqrt(squares / count)

        constant = (low == high) | (std <= 1e-12 * np.maximum(1.0, np.abs(mean)))
        clamped = [int(c) for c in np.flatnonzero(constant)]
        if clamped:
            logger.warning(
                f"{modality} channels {clamped} have zero variance, clamping std to 1"
            )
            std[clamped] = 1.0

        stats[modality] = ModalityStats(mean, std, clamped)

    return NormalizationStats(stats)


def normalize(
    dataset: Iterable[SampleQuadruple], stats: NormalizationStats
) -> List[SampleQuadruple]:
    return [
        sample.replace(
            **{
                modality: stats[modality]
                .apply(sample.frames(modality))
                .astype(sample.frames(modality).dtype)
                for modality in Modality.NON_VISUAL
            }
        )
        for sample in dataset
    ]


def denormalize(
    dataset: Iterable[SampleQuadruple], stats: NormalizationStats
) -> List[SampleQuadruple]:
    return [
        sample.replace(
            **{
                modality: stats[modality]
                .invert(sample.frames(modality))
                .astype(sample.frames(modality).dtype)
                for modality in Modality.NON_VISUAL
            }
        )
        for sample in dataset
    ]
