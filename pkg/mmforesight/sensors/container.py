import logging
import struct
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from ..exceptions import DataError
from .dataset import TrialDataset
from .structures import Behavior, FrameConfig, RawTrial
from .sync import sync_to_frames

MAGIC = b"MMVP"
VERSION = 1
MANIFEST_NAME = "manifest.txt"

# magic, version, reserved, behavior, object, trial, 4 rates, 9 shape dims
_HEADER = struct.Struct("<4sHHiii4f9I")
_FLOAT = np.dtype("<f4")


def encode_trial(trial: RawTrial) -> bytes:
    header = _HEADER.pack(
        MAGIC,
        VERSION,
        0,
        Behavior.index(trial.behavior),
        trial.object_id,
        trial.trial_id,
        trial.fps,
        trial.haptic_rate,
        trial.audio_rate,
        trial.vibro_rate,
        *trial.video.shape,
        *trial.haptic.shape,
        trial.audio.shape[0],
        *trial.vibro.shape,
    )
    payload = b"".join(
        np.ascontiguousarray(array, dtype=_FLOAT).tobytes()
        for array in (trial.video, trial.haptic, trial.audio, trial.vibro)
    )
    return header + payload


def decode_trial(data: bytes) -> RawTrial:
    if len(data) < _HEADER.size:
        raise DataError("Record is shorter than its header")

    fields = _HEADER.unpack_from(data)
    magic, version = fields[0], fields[1]
    if magic != MAGIC:
        raise DataError(f"Bad magic {magic!r}")
    if version != VERSION:
        raise DataError(f"Unsupported record version {version}")

    behavior, object_id, trial_id = fields[3:6]
    fps, haptic_rate, audio_rate, vibro_rate = fields[6:10]
    dims = fields[10:]
    shapes = [tuple(dims[0:4]), tuple(dims[4:6]), (dims[6],), tuple(dims[7:9])]

    arrays = []
    offset = _HEADER.size
    for shape in shapes:
        count = int(np.prod(shape))
        end = offset + count * _FLOAT.itemsize
        if end > len(data):
            raise DataError("Record payload is truncated")
        arrays.append(np.frombuffer(data, dtype=_FLOAT, count=count, offset=offset).reshape(shape))
        offset = end
    if offset != len(data):
        raise DataError("Record has trailing bytes")

    return RawTrial(
        video=arrays[0],
        haptic=arrays[1],
        audio=arrays[2],
        vibro=arrays[3],
        behavior=Behavior.from_index(behavior),
        fps=fps,
        haptic_rate=haptic_rate,
        audio_rate=audio_rate,
        vibro_rate=vibro_rate,
        object_id=object_id,
        trial_id=trial_id,
    )


def _trial_file(index: int) -> str:
    return f"trial_{index:05d}.bin"


def write_container(
    path: Union[str, Path],
    trials: Sequence[RawTrial],
    config: FrameConfig,
    scenes: Optional[Sequence[str]] = None,
) -> Path:
    """
    Writes one record per trial plus a key=value manifest. The output is a
    pure function of the inputs.
    """
    path = Path(path)
    lines = [
        f"format={MAGIC.decode('ascii')}",
        f"version={VERSION}",
        f"trials={len(trials)}",
        f"behaviors={','.join(Behavior.ALL)}",
    ]
    lines += [f"frame.{key}={value}" for key, value in config.to_dict().items()]

    for index, trial in enumerate(trials):
        prefix = f"trial.{index:05d}"
        lines += [
            f"{prefix}.file={_trial_file(index)}",
            f"{prefix}.id={trial.trial_id}",
            f"{prefix}.behavior={trial.behavior}",
            f"{prefix}.object={trial.object_id}",
            f"{prefix}.frames={trial.frame_count}",
        ]
        if scenes is not None:
            lines.append(f"{prefix}.scene={scenes[index]}")

    try:
        path.mkdir(parents=True, exist_ok=True)
        for index, trial in enumerate(trials):
            (path / _trial_file(index)).write_bytes(encode_trial(trial))
        (path / MANIFEST_NAME).write_text("\n".join(lines) + "\n", encoding="utf-8")
    except OSError as error:
        raise DataError(f"Cannot write container at {path}: {error}") from error

    logging.getLogger("mmforesight.py").info(f"Wrote {len(trials)} trials to {path}")
    return path


def read_manifest(path: Union[str, Path]) -> Dict[str, str]:
    path = Path(path)
    try:
        text = (path / MANIFEST_NAME).read_text(encoding="utf-8")
    except OSError as error:
        raise DataError(f"Cannot read manifest in {path}: {error}") from error

    manifest = {}
    for number, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        if "=" not in line:
            raise DataError(f"{path / MANIFEST_NAME}:{number} is not a key=value line")
        key, value = line.split("=", 1)
        manifest[key.strip()] = value.strip()

    if manifest.get("format") != MAGIC.decode("ascii"):
        raise DataError(f"{path} is not an MMVP container")
    return manifest


def read_container(
    path: Union[str, Path]
) -> Tuple[FrameConfig, List[RawTrial], Dict[str, str]]:
    path = Path(path)
    manifest = read_manifest(path)
    config = FrameConfig.from_dict(
        {key[len("frame.") :]: value for key, value in manifest.items() if key.startswith("frame.")}
    )

    trials = []
    for index in range(int(manifest["trials"])):
        name = manifest.get(f"trial.{index:05d}.file", _trial_file(index))
        try:
            data = (path / name).read_bytes()
        except OSError as error:
            raise DataError(f"Cannot read {path / name}: {error}") from error
        try:
            trials.append(decode_trial(data))
        except DataError as error:
            raise DataError(f"{path / name}: {error}") from error

    return config, trials, manifest


def load_dataset(path: Union[str, Path]) -> TrialDataset:
    config, trials, _ = read_container(path)
    return TrialDataset([sync_to_frames(trial, config=config) for trial in trials], config)
