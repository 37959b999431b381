from typing import List, Tuple

import numpy as np

from ..exceptions import ConfigError
from ..sensors import TrialDataset
from ..utils import derive_seed

Fold = Tuple[List[int], List[int]]


def crossval(dataset: TrialDataset, k_folds: int = 5, seed: int = 0) -> List[Fold]:
    """
    Object-disjoint folds: the object ids are shuffled and cut into k_folds
    near-equal test groups, and each fold trains on every other object.

    :return: (train object ids, test object ids) per fold, both sorted
    """
    if k_folds < 2:
        raise ConfigError(f"Cross-validation needs at least 2 folds, got {k_folds}")
    objects = dataset.object_ids()
    if len(objects) < k_folds:
        raise ConfigError(f"{len(objects)} objects cannot fill {k_folds} folds")

    rng = np.random.default_rng(derive_seed(seed, k_folds))
    shuffled = [objects[i] for i in rng.permutation(len(objects))]
    groups = np.array_split(np.array(shuffled), k_folds)

    folds = []
    for index, test in enumerate(groups):
        train = [int(o) for j, group in enumerate(groups) if j != index for o in group]
        folds.append((sorted(train), sorted(int(o) for o in test)))
    return folds


def split(dataset: TrialDataset, fold: Fold) -> Tuple[TrialDataset, TrialDataset]:
    train, test = fold
    return dataset.subset_by_objects(train), dataset.subset_by_objects(test)
