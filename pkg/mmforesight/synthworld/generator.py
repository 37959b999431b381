import logging
import math
from pathlib import Path
from typing import Dict, List, Optional, Tuple, Union

import numpy as np

from ..exceptions import ConfigError, InputError
from ..sensors import Behavior, FrameConfig, RawTrial, write_container
from ..utils import derive_seed
from .render import render
from .simulate import simulate
from .structures import FLOOR, HEAVY, LIGHT, PALETTE, SHAPES, SceneSpec

# scene of the mass-ambiguous pairs: the push lands between frames 3 and 4
AMBIGUOUS_CONTACT = 3.5
AMBIGUOUS_SPEED = 0.8
AMBIGUOUS_X = 10.0


class ObjectCatalog:
    """
    Objects come in look-alike twins: object 2j is light, object 2j + 1 is
    heavy, and both share shape, color and size.
    """

    def __init__(self, count: int, seed: int) -> None:
        if count < 1:
            raise ConfigError("At least one object is needed")
        self._objects = []
        for index in range(count):
            rng = np.random.default_rng(derive_seed(seed, 1, index // 2))
            self._objects.append(
                {
                    "shape": SHAPES[int(rng.integers(len(SHAPES)))],
                    "color": PALETTE[int(rng.integers(len(PALETTE)))],
                    "size": int(rng.integers(4, 8)),
                    "mass": LIGHT if index % 2 == 0 else HEAVY,
                }
            )

    def __len__(self) -> int:
        return len(self._objects)

    def __getitem__(self, object_id: int) -> Dict[str, object]:
        return dict(self._objects[object_id])


def allocate(n_trials: int, mix: Dict[str, float]) -> Dict[str, int]:
    """
    Splits n_trials over behaviors by largest remainder; ties go to the
    earlier behavior.
    """
    for behavior in mix:
        Behavior.validate(behavior)
    total = float(sum(mix.values()))
    if total <= 0 or min(mix.values()) < 0:
        raise InputError("Behavior mix weights must be non-negative and not all zero")

    ordered = [b for b in Behavior.ALL if b in mix]
    exact = {b: n_trials * mix[b] / total for b in ordered}
    counts = {b: int(math.floor(exact[b])) for b in ordered}
    remainder = n_trials - sum(counts.values())
    by_fraction = sorted(ordered, key=lambda b: (-(exact[b] - counts[b]), ordered.index(b)))
    for behavior in by_fraction[:remainder]:
        counts[behavior] += 1
    return counts


def random_scene(behavior: str, catalog: ObjectCatalog, object_id: int, seed: int) -> SceneSpec:
    rng = np.random.default_rng(seed)
    item = catalog[object_id]
    size = item["size"]
    return SceneSpec(
        behavior=behavior,
        shape=item["shape"],
        color=item["color"],
        size=size,
        mass=item["mass"],
        elasticity=round(float(rng.uniform(0.3, 0.6)), 3),
        object_x=round(float(rng.uniform(8.0, 20.0)), 2),
        arm_speed=round(float(rng.uniform(0.6, 1.2)), 3),
        contact_time=round(float(rng.uniform(2.0, 6.0)) * 4) / 4,
        height=int(rng.integers(6, min(18, FLOOR - size) + 1)),
        seed=seed,
        object_id=object_id,
    )


def ambiguous_pair(catalog: ObjectCatalog, pair: int, seed: int) -> Tuple[SceneSpec, SceneSpec]:
    """
    Two pushes of look-alike objects that differ only in mass
    """
    light_id = (2 * pair) % (len(catalog) - len(catalog) % 2)
    item = catalog[light_id]
    light = SceneSpec(
        behavior=Behavior.PUSH,
        shape=item["shape"],
        color=item["color"],
        size=item["size"],
        mass=LIGHT,
        object_x=AMBIGUOUS_X,
        arm_speed=AMBIGUOUS_SPEED,
        contact_time=AMBIGUOUS_CONTACT,
        seed=seed,
        object_id=light_id,
    )
    return light, light.replace(mass=HEAVY, object_id=light_id + 1)


def generate_trials(
    n_trials: int,
    mix: Optional[Dict[str, float]] = None,
    seed: int = 0,
    n_objects: Optional[int] = None,
    ambiguous_pairs: Optional[int] = None,
    config: Optional[FrameConfig] = None,
) -> List[Tuple[RawTrial, SceneSpec]]:
    """
    Deterministic trials for a behavior mix. Objects are assigned round
    robin over a shuffled catalog so every object appears once n_trials
    reaches the catalog size. Mass-ambiguous push pairs take their slots
    from the push share.
    """
    if n_trials < 10:
        raise InputError(f"Need at least 10 trials, got {n_trials}")
    config = config or FrameConfig.default()
    mix = mix or {behavior: 1.0 for behavior in Behavior.ALL}
    counts = allocate(n_trials, mix)

    n_objects = n_objects or min(100, max(10, n_trials // 2))
    catalog = ObjectCatalog(n_objects, seed)

    pushes = counts.get(Behavior.PUSH, 0)
    pairs = pushes // 10 if ambiguous_pairs is None else ambiguous_pairs
    if 2 * pairs > pushes or (pairs and n_objects < 2):
        raise ConfigError(f"{pairs} ambiguous pairs do not fit {pushes} push trials")

    rng = np.random.default_rng(derive_seed(seed, 0))
    behaviors = [b for b in Behavior.ALL for _ in range(counts.get(b, 0))]
    behaviors = [behaviors[i] for i in rng.permutation(len(behaviors))]
    objects = rng.permutation(n_objects)

    scenes: List[SceneSpec] = []
    for pair in range(pairs):
        scenes += list(ambiguous_pair(catalog, pair, derive_seed(seed, 3, pair)))
    skipped = 0
    for index, behavior in enumerate(behaviors):
        if behavior == Behavior.PUSH and skipped < 2 * pairs:
            skipped += 1
            continue
        object_id = int(objects[len(scenes) % n_objects])
        scenes.append(random_scene(behavior, catalog, object_id, derive_seed(seed, 2, index)))

    trials = [
        (render(simulate(scene), scene, config, trial_id=trial_id), scene)
        for trial_id, scene in enumerate(scenes)
    ]
    logging.getLogger("mmforesight.py").info(
        f"Generated {len(trials)} trials over {n_objects} objects ({pairs} ambiguous pairs)"
    )
    return trials


def generate_dataset(
    path: Union[str, Path],
    n_trials: int,
    mix: Optional[Dict[str, float]] = None,
    seed: int = 0,
    n_objects: Optional[int] = None,
    ambiguous_pairs: Optional[int] = None,
    config: Optional[FrameConfig] = None,
) -> Path:
    config = config or FrameConfig.default()
    trials = generate_trials(n_trials, mix, seed, n_objects, ambiguous_pairs, config)
    return write_container(
        path,
        [trial for trial, _ in trials],
        config,
        scenes=[str(scene) for _, scene in trials],
    )
