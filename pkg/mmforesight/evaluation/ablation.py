import logging
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np

from ..exceptions import ConfigError
from ..model import ModalityMask
from ..sensors import Modality, TrialDataset
from ..training import TrainConfig, train
from ..utils import RunKey, derive_seed, write_csv
from .crossval import Fold, crossval, split
from .report import EvalReport, FoldMean, evaluate

# the modality rows of the contribution study, vision implied
CONTRIBUTION_ROWS = (
    "vision+haptic",
    "vision+haptic+audio",
    "vision+haptic+vibro",
    "vision+audio",
    "vision+vibro",
    "vision+audio+vibro",
    "vision+haptic+audio+vibro",
    "vision+behavior",
    "vision+haptic+audio+vibro+behavior",
)

# the rows of the auxiliary-training comparison
AUX_ROWS = (
    "vision",
    "vision+haptic",
    "vision+haptic+audio",
    "vision+haptic+audio+vibro",
)

ABLATION_HEADER = (
    "subset",
    "haptic",
    "audio",
    "vibro",
    "behavior",
    "aux",
    "ssim",
    "mse_h",
    "mse_a",
    "mse_v",
)
BEHAVIOR_HEADER = ("subset", "behavior", "specific_ssim", "general_ssim")
AUX_HEADER = ("subset", "ssim_aux", "ssim_no_aux", "mse_h", "mse_a", "mse_v")

AVERAGED = "averaged"
GENERAL = "general"


def expand_subsets(
    subsets: Iterable[ModalityMask],
    behavior_toggle: bool = False,
    aux_toggle: bool = False,
) -> List[ModalityMask]:
    """
    Adds the behavior-off/on and aux-off/on variants of every mask, keeping
    first-seen order and dropping duplicates.
    """
    expanded: List[ModalityMask] = []
    for mask in subsets:
        variants = [mask]
        if behavior_toggle:
            variants = [m.with_behavior(flag) for m in variants for flag in (False, True)]
        if aux_toggle:
            variants = [
                m.with_aux(flag)
                for m in variants
                for flag in ((False, True) if len(m.enabled) > 1 else (m.aux_training,))
            ]
        for variant in variants:
            if variant not in expanded:
                expanded.append(variant)
    return expanded


class AblationRow:
    """
    Fold-averaged results of one modality mask: the model trained on every
    behavior, and optionally one behavior-specific model per behavior.
    """

    def __init__(
        self,
        mask: ModalityMask,
        general: FoldMean,
        specific: Optional[Dict[str, FoldMean]] = None,
    ) -> None:
        self.mask = mask
        self.general = general
        self.specific = dict(specific or {})

    @property
    def label(self) -> str:
        return self.mask.label

    @property
    def ssim(self) -> float:
        return self.general.mean_ssim()

    def mse(self, modality: str) -> float:
        return self.general.mse(modality)

    @property
    def averaged(self) -> float:
        """
        Mean over behaviors of the behavior-specific models' SSIM
        """
        if not self.specific:
            return float("nan")
        return float(np.mean([report.mean_ssim() for report in self.specific.values()]))

    def row(self) -> tuple:
        return (
            self.label,
            int(self.mask.use_haptic),
            int(self.mask.use_audio),
            int(self.mask.use_vibro),
            int(self.mask.use_behavior),
            int(self.mask.aux_training),
            self.ssim,
        ) + tuple(self.mse(m) for m in Modality.NON_VISUAL)

    def behavior_rows(self) -> List[tuple]:
        general = self.general.per_behavior()
        rows = [
            (self.label, behavior, report.mean_ssim(), general.get(behavior, float("nan")))
            for behavior, report in sorted(self.specific.items())
        ]
        rows.append((self.label, AVERAGED, self.averaged, self.ssim))
        return rows

    def __str__(self) -> str:
        return "AblationRow[{}, aux={}, ssim={:.4f}]".format(
            self.label, self.mask.aux_training, self.ssim
        )


class AblationTable:
    def __init__(self, rows: Sequence[AblationRow]) -> None:
        self._rows = list(rows)

    @property
    def rows(self) -> List[AblationRow]:
        return list(self._rows)

    def __len__(self) -> int:
        return len(self._rows)

    def __getitem__(self, mask: ModalityMask) -> AblationRow:
        for row in self._rows:
            if row.mask == mask:
                return row
        raise KeyError(str(mask))

    def aux_comparison(self) -> List[tuple]:
        """
        One row per input combination that ran both with and without the
        auxiliary heads: vision SSIM of each, then the aux-on MSE per modality.
        """
        rows = []
        seen = []
        for row in self._rows:
            inputs = row.mask.inputs()
            if inputs in seen:
                continue
            seen.append(inputs)
            if len(row.mask.enabled) == 1:
                # no non-visual input means no aux head: one model fills both columns
                rows.append((row.label, row.ssim, row.ssim) + (float("nan"),) * 3)
                continue
            try:
                aux = self[row.mask.with_aux(True)]
                plain = self[row.mask.with_aux(False)]
            except KeyError:
                continue
            rows.append(
                (row.label, aux.ssim, plain.ssim) + tuple(aux.mse(m) for m in Modality.NON_VISUAL)
            )
        return rows

    def behavior_groups(self) -> Dict[str, Dict[str, float]]:
        """
        behavior (plus "averaged" and "general") -> subset label -> SSIM
        """
        groups: Dict[str, Dict[str, float]] = {}
        for row in self._rows:
            if not row.specific:
                continue
            for behavior, report in sorted(row.specific.items()):
                groups.setdefault(behavior, {})[row.label] = report.mean_ssim()
            groups.setdefault(AVERAGED, {})[row.label] = row.averaged
            groups.setdefault(GENERAL, {})[row.label] = row.ssim
        return groups

    def write_csv(self, path: Union[str, Path]) -> Path:
        return write_csv(path, ABLATION_HEADER, [row.row() for row in self._rows])

    def write_behavior_csv(self, path: Union[str, Path]) -> Path:
        return write_csv(
            path, BEHAVIOR_HEADER, [r for row in self._rows if row.specific for r in row.behavior_rows()]
        )

    def write_aux_csv(self, path: Union[str, Path]) -> Path:
        return write_csv(path, AUX_HEADER, self.aux_comparison())

    def __str__(self) -> str:
        return "AblationTable[{}]".format(", ".join(str(row) for row in self._rows))


def run_fold(
    dataset: TrialDataset,
    mask: ModalityMask,
    config: TrainConfig,
    fold_index: int,
    fold: Fold,
    behavior: Optional[str] = None,
) -> Optional[EvalReport]:
    """
    Trains on the fold's training objects and evaluates on its test
    objects. Returns None when a behavior leaves either side empty.
    """
    train_set, test_set = split(dataset, fold)
    if behavior is not None:
        train_set = train_set.subset_by_behavior(behavior)
        test_set = test_set.subset_by_behavior(behavior)
    if len(train_set) == 0 or len(test_set) == 0:
        logging.getLogger("mmforesight.py").warning(
            f"Skipping fold {fold_index} of {mask.label} ({behavior or 'all behaviors'}): empty split"
        )
        return None

    fold_config = config.replace(mask=mask, seed=derive_seed(config.seed, fold_index))
    result = train(train_set, fold_config)
    return evaluate(
        result.model,
        test_set,
        mask,
        K=config.K,
        stats=result.stats,
        fold=fold_index,
    )


def ablate(
    dataset: TrialDataset,
    subsets: Sequence[ModalityMask],
    config: Optional[TrainConfig] = None,
    k_folds: int = 5,
    seed: int = 0,
    behavior_toggle: bool = False,
    aux_toggle: bool = False,
    per_behavior: bool = False,
    workers: int = 0,
    out_dir: Optional[Union[str, Path]] = None,
) -> AblationTable:
    """
    Trains and evaluates one model per subset and fold (and per behavior
    when `per_behavior` is set). Every job is keyed by a RunKey, and the
    table is assembled in key order so it does not depend on `workers`.
    Per-fold evaluation CSVs go to `out_dir` when given.
    """
    if not subsets:
        raise ConfigError("Ablation needs at least one modality subset")
    config = config or TrainConfig.default()
    masks = expand_subsets(subsets, behavior_toggle, aux_toggle)
    folds = crossval(dataset, k_folds, seed)
    behaviors = dataset.behaviors() if per_behavior else []

    jobs: Dict[RunKey, Tuple[ModalityMask, int, Optional[str]]] = {}
    for index, mask in enumerate(masks):
        for group in [None] + behaviors:
            name = f"{index:03d}/{group or GENERAL}"
            for fold_index in range(len(folds)):
                jobs[RunKey(name, fold_index)] = (mask, fold_index, group)

    def run(key: RunKey) -> Optional[EvalReport]:
        mask, fold_index, group = jobs[key]
        return run_fold(dataset, mask, config, fold_index, folds[fold_index], group)

    if workers > 0:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            futures = {key: pool.submit(run, key) for key in jobs}
            reports = {key: future.result() for key, future in futures.items()}
    else:
        reports = {key: run(key) for key in jobs}

    def collect(index: int, group: Optional[str]) -> List[EvalReport]:
        name = f"{index:03d}/{group or GENERAL}"
        keys = sorted(key for key in reports if key.subset == name)
        return [reports[key] for key in keys if reports[key] is not None]

    logger = logging.getLogger("mmforesight.py")
    rows = []
    for index, mask in enumerate(masks):
        general = collect(index, None)
        if not general:
            raise ConfigError(f"No fold of {mask.label} had both training and test trials")
        specific = {}
        for behavior in behaviors:
            found = collect(index, behavior)
            if found:
                specific[behavior] = FoldMean(found)

        if out_dir is not None:
            tag = mask.label.replace("+", "_") + ("_aux" if mask.aux_training else "")
            for report in general:
                report.write_csv(Path(out_dir) / f"{tag}_fold{report.fold}.csv")

        row = AblationRow(mask, FoldMean(general), specific)
        logger.info(f"Ablation {row}")
        rows.append(row)

    return AblationTable(rows)
