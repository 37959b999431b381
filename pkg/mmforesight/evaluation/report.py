import logging
import warnings
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from ..exceptions import ConfigError, ContractError
from ..model import Checkpoint, MultimodalPredictor, ModalityMask, load_checkpoint
from ..sensors import Modality, NormalizationStats, SampleQuadruple, TrialDataset
from ..tensor import no_grad
from ..utils import RunKey, write_csv
from .ssim import SsimConfig, batch_ssim

EVAL_HEADER = ("timestep", "ssim", "mse_h", "mse_a", "mse_v")

Evaluated = Union[str, Path, Checkpoint, MultimodalPredictor, object]


class TrialResult:
    """
    Per-step scores of one trial; MSE curves exist only for predicted
    modalities.
    """

    def __init__(
        self,
        trial_id: int,
        behavior: str,
        K: int,
        ssim: np.ndarray,
        mse: Dict[str, np.ndarray],
    ) -> None:
        self.trial_id = trial_id
        self.behavior = behavior
        self.K = K
        self.ssim = ssim
        self.mse = mse

    def __len__(self) -> int:
        return len(self.ssim)


def _pooled(curves: Sequence[np.ndarray]) -> Tuple[np.ndarray, np.ndarray]:
    """
    Step-wise mean of curves of different lengths, with per-step counts
    """
    if not curves:
        return np.zeros(0), np.zeros(0, dtype=int)
    horizon = max(len(curve) for curve in curves)
    total = np.zeros(horizon)
    count = np.zeros(horizon, dtype=int)
    for curve in curves:
        total[: len(curve)] += curve
        count[: len(curve)] += 1
    with np.errstate(invalid="ignore", divide="ignore"):
        return np.where(count > 0, total / np.maximum(count, 1), np.nan), count


class EvalReport:
    """
    Mean SSIM per prediction step, per-modality MSE per step and a
    per-behavior breakdown of one model on one split. Step s of the curve
    scores frame K + s (0-indexed), so the CSV timestep column is the
    1-based frame number K + s + 1.
    """

    def __init__(
        self,
        trials: Sequence[TrialResult],
        subset: str = "",
        fold: int = 0,
    ) -> None:
        if not trials:
            raise ContractError("An evaluation report needs at least one trial")
        contexts = {trial.K for trial in trials}
        if len(contexts) != 1:
            raise ContractError(f"Trials were rolled out with different contexts {contexts}")

        self._trials = list(trials)
        self._subset = subset
        self._fold = fold
        self._K = contexts.pop()
        self._ssim, self._counts = _pooled([trial.ssim for trial in trials])
        self._mse = {}
        for modality in Modality.NON_VISUAL:
            curves = [trial.mse[modality] for trial in trials if modality in trial.mse]
            if curves:
                self._mse[modality] = _pooled(curves)[0]

    @property
    def subset(self) -> str:
        return self._subset

    @property
    def fold(self) -> int:
        return self._fold

    @property
    def K(self) -> int:
        return self._K

    @property
    def trials(self) -> List[TrialResult]:
        return list(self._trials)

    @property
    def ssim_curve(self) -> np.ndarray:
        return self._ssim

    @property
    def counts(self) -> np.ndarray:
        return self._counts

    @property
    def timesteps(self) -> List[int]:
        return [self._K + step + 1 for step in range(len(self._ssim))]

    def mse_curve(self, modality: str) -> Optional[np.ndarray]:
        return self._mse.get(modality)

    def mse(self, modality: str) -> float:
        """
        Mean over every predicted frame of every trial, NaN if the model does
        not predict the modality
        """
        values = [trial.mse[modality] for trial in self._trials if modality in trial.mse]
        if not values:
            return float("nan")
        return float(np.mean(np.concatenate(values)))

    def mean_ssim(self, first: Optional[int] = None, last: Optional[int] = None) -> float:
        """
        Mean SSIM over every predicted frame, or over the frames numbered
        first..last (1-based, inclusive) when given.
        """
        values = []
        for trial in self._trials:
            steps = np.arange(len(trial)) + trial.K + 1
            keep = np.ones(len(trial), dtype=bool)
            if first is not None:
                keep &= steps >= first
            if last is not None:
                keep &= steps <= last
            values.append(trial.ssim[keep])
        values = np.concatenate(values)
        return float(values.mean()) if values.size else float("nan")

    def per_behavior(self) -> Dict[str, float]:
        groups: Dict[str, List[np.ndarray]] = {}
        for trial in self._trials:
            groups.setdefault(trial.behavior, []).append(trial.ssim)
        return {
            behavior: float(np.mean(np.concatenate(curves)))
            for behavior, curves in sorted(groups.items())
        }

    def rows(self) -> List[tuple]:
        def value(modality: str, step: int) -> float:
            curve = self._mse.get(modality)
            return float(curve[step]) if curve is not None else float("nan")

        return [
            (
                timestep,
                float(self._ssim[step]),
                value(Modality.HAPTIC, step),
                value(Modality.AUDIO, step),
                value(Modality.VIBRO, step),
            )
            for step, timestep in enumerate(self.timesteps)
        ]

    def write_csv(self, path: Union[str, Path]) -> Path:
        return write_csv(path, EVAL_HEADER, self.rows())

    @classmethod
    def fold_mean(cls, reports: Sequence["EvalReport"]) -> "FoldMean":
        return FoldMean(reports)

    def __str__(self) -> str:
        return "EvalReport[subset={}, fold={}, trials={}, mean_ssim={:.4f}]".format(
            self._subset, self._fold, len(self._trials), self.mean_ssim()
        )


class FoldMean:
    """
    Mean over folds of per-fold reports: every fold counts once whatever
    its trial count.
    """

    def __init__(self, reports: Sequence[EvalReport]) -> None:
        if not reports:
            raise ContractError("Nothing to average")
        self._reports = list(reports)
        horizon = max(len(r.ssim_curve) for r in reports)
        self._K = reports[0].K

        def stacked(curves: List[Optional[np.ndarray]]) -> np.ndarray:
            table = np.full((len(curves), horizon), np.nan)
            for row, curve in enumerate(curves):
                if curve is not None:
                    table[row, : len(curve)] = curve
            return table

        with warnings.catch_warnings():
            # steps no fold reaches stay NaN
            warnings.simplefilter("ignore", category=RuntimeWarning)
            self._ssim = np.nanmean(stacked([r.ssim_curve for r in reports]), axis=0)
            self._mse = {
                modality: np.nanmean(stacked([r.mse_curve(modality) for r in reports]), axis=0)
                for modality in Modality.NON_VISUAL
            }

    @property
    def reports(self) -> List[EvalReport]:
        return list(self._reports)

    @property
    def ssim_curve(self) -> np.ndarray:
        return self._ssim

    @property
    def timesteps(self) -> List[int]:
        return [self._K + step + 1 for step in range(len(self._ssim))]

    def mean_ssim(self, first: Optional[int] = None, last: Optional[int] = None) -> float:
        return float(np.mean([r.mean_ssim(first, last) for r in self._reports]))

    def mse(self, modality: str) -> float:
        values = [r.mse(modality) for r in self._reports]
        return float(np.mean(values))

    def per_behavior(self) -> Dict[str, float]:
        groups: Dict[str, List[float]] = {}
        for report in self._reports:
            for behavior, value in report.per_behavior().items():
                groups.setdefault(behavior, []).append(value)
        return {behavior: float(np.mean(values)) for behavior, values in sorted(groups.items())}

    def rows(self) -> List[tuple]:
        return [
            (timestep, float(self._ssim[step]))
            + tuple(float(self._mse[m][step]) for m in Modality.NON_VISUAL)
            for step, timestep in enumerate(self.timesteps)
        ]

    def write_csv(self, path: Union[str, Path]) -> Path:
        return write_csv(path, EVAL_HEADER, self.rows())


def resolve_model(model: Evaluated) -> Tuple[object, Optional[NormalizationStats]]:
    """
    Loads a checkpoint path; a Checkpoint gives its model and stats; any
    other object with a rollout method is used as is.
    """
    if isinstance(model, (str, Path)):
        model = load_checkpoint(model)
    if isinstance(model, Checkpoint):
        return model.model, model.stats
    if not hasattr(model, "rollout") or not hasattr(model, "mask"):
        raise ContractError(f"{model} cannot be evaluated: it has no rollout")
    return model, None


def _check_dims(model: object, dataset: TrialDataset) -> None:
    frame = getattr(model, "frame_config", None)
    if frame is None:
        return
    for modality in model.mask.enabled:
        expected = frame.frame_shape(modality)
        actual = dataset.config.frame_shape(modality)
        if expected != actual:
            raise ConfigError(
                f"Model expects {modality} frames {expected}, dataset has {actual}"
            )
    for sample in dataset:
        for modality in model.mask.enabled:
            if sample.frames(modality).shape[1:] != frame.frame_shape(modality):
                raise ConfigError(
                    f"Trial {sample.trial_id} has {modality} frames "
                    f"{sample.frames(modality).shape[1:]}, model expects {frame.frame_shape(modality)}"
                )


def _score(
    model: object,
    batch: List[SampleQuadruple],
    K: int,
    mask: ModalityMask,
    config: SsimConfig,
) -> List[TrialResult]:
    with no_grad():
        result = model.rollout(batch, K, mask, teacher_forcing=False)

    predicted = result.to_numpy(Modality.VISION)
    scores = []
    for index, sample in enumerate(batch):
        truth = sample.frames(Modality.VISION)[K:]
        curve = batch_ssim(np.clip(predicted[index], 0.0, config.dynamic_range), truth, config)
        mse = {}
        for modality in Modality.NON_VISUAL:
            if result.has(modality):
                error = result.to_numpy(modality)[index] - sample.frames(modality)[K:]
                mse[modality] = np.mean(
                    np.square(error.astype(np.float64)), axis=tuple(range(1, error.ndim))
                )
        scores.append(TrialResult(sample.trial_id, sample.behavior, K, curve, mse))
    return scores


def evaluate(
    model: Evaluated,
    dataset: TrialDataset,
    mask: Optional[ModalityMask] = None,
    K: int = 4,
    ssim_config: Optional[SsimConfig] = None,
    stats: Optional[NormalizationStats] = None,
    batch_size: int = 32,
    workers: int = 0,
    fold: int = 0,
) -> EvalReport:
    """
    Rolls every trial out without teacher forcing and scores the predicted
    frames K..T-1. Non-visual streams are normalized with the checkpoint's
    statistics (or `stats`) unless the dataset already is, so the MSE is in
    the units the model was trained in. Nothing is written anywhere.
    """
    model, checkpoint_stats = resolve_model(model)
    mask = mask or model.mask
    if not model.mask.compatible_with(mask):
        raise ConfigError(f"Model trained with {model.mask} cannot serve {mask}")
    _check_dims(model, dataset)
    if len(dataset) == 0:
        raise ContractError("Cannot evaluate an empty split")

    stats = stats or checkpoint_stats
    if stats is not None and dataset.stats is None:
        dataset = dataset.normalized(stats)
    config = ssim_config or SsimConfig.default()

    jobs: Dict[RunKey, List[SampleQuadruple]] = {}
    for length, group in dataset.group_by_length().items():
        if length <= K:
            raise ConfigError(f"Trials of {length} frames leave nothing to predict after K={K}")
        for start in range(0, len(group), batch_size):
            batch = group[start : start + batch_size]
            jobs[RunKey(mask.label, fold, batch[0].trial_id)] = batch

    if workers > 0:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            futures = {
                key: pool.submit(_score, model, batch, K, mask, config)
                for key, batch in jobs.items()
            }
            results = {key: future.result() for key, future in futures.items()}
    else:
        results = {key: _score(model, batch, K, mask, config) for key, batch in jobs.items()}

    trials = [trial for key in sorted(results) for trial in results[key]]
    report = EvalReport(trials, mask.label, fold)
    logging.getLogger("mmforesight.py").info(f"Evaluated {report}")
    return report
