import logging
import struct
from pathlib import Path
from typing import Dict, Optional, Tuple, Union

import numpy as np

from ..exceptions import ConfigError, DataError
from ..sensors import FrameConfig, NormalizationStats
from .predictor import MultimodalPredictor
from .structures import ModalityMask, ModelConfig

MAGIC = b"MMCK"
VERSION = 2

_PREAMBLE = struct.Struct("<4sHHI")
_COUNT = struct.Struct("<I")
_NAME = struct.Struct("<HBB")
# block dtype codes: parameters are float32, normalization stats float64
_DTYPES = (np.dtype("<f4"), np.dtype("<f8"))


class Checkpoint:
    def __init__(
        self,
        model: MultimodalPredictor,
        stats: Optional[NormalizationStats],
        header: Dict[str, str],
    ) -> None:
        self._model = model
        self._stats = stats
        self._header = header

    @property
    def model(self) -> MultimodalPredictor:
        return self._model

    @property
    def stats(self) -> Optional[NormalizationStats]:
        return self._stats

    @property
    def header(self) -> Dict[str, str]:
        return self._header

    @property
    def seed(self) -> int:
        return int(self._header.get("seed", 0))

    def __str__(self) -> str:
        return "Checkpoint[model={}, stats={}]".format(self._model, self._stats is not None)


def _header_lines(model: MultimodalPredictor, extra: Optional[Dict[str, object]]) -> str:
    lines = [f"seed={model.seed}"]
    lines += [f"model.{k}={v}" for k, v in model.config.to_dict().items()]
    lines += [f"mask.{k}={v}" for k, v in model.mask.to_dict().items()]
    lines += [f"frame.{k}={v}" for k, v in model.frame_config.to_dict().items()]
    lines += [f"{k}={v}" for k, v in (extra or {}).items()]
    return "\n".join(lines)


def _block(name: str, array: np.ndarray, code: int = 0) -> bytes:
    encoded = name.encode("utf-8")
    array = np.ascontiguousarray(array, dtype=_DTYPES[code])
    return (
        _NAME.pack(len(encoded), array.ndim, code)
        + encoded
        + struct.pack(f"<{array.ndim}I", *array.shape)
        + array.tobytes()
    )


def checkpoint_bytes(
    model: MultimodalPredictor,
    stats: Optional[NormalizationStats] = None,
    extra: Optional[Dict[str, object]] = None,
) -> bytes:
    """
    Serializes a predictor: a key=value header echoing its configuration,
    then one little-endian float32 block per parameter and one float64 block
    per stats array.
    """
    header = _header_lines(model, extra).encode("utf-8")
    blocks = [(name, array, 0) for name, array in model.state_dict().items()]
    if stats is not None:
        blocks += [(name, array, 1) for name, array in stats.to_arrays().items()]

    parts = [_PREAMBLE.pack(MAGIC, VERSION, 0, len(header)), header, _COUNT.pack(len(blocks))]
    parts += [_block(name, array, code) for name, array, code in blocks]
    return b"".join(parts)


def save_checkpoint(
    path: Union[str, Path],
    model: MultimodalPredictor,
    stats: Optional[NormalizationStats] = None,
    extra: Optional[Dict[str, object]] = None,
) -> Path:
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_bytes(checkpoint_bytes(model, stats, extra))
    except OSError as error:
        raise DataError(f"Cannot write checkpoint {path}: {error}") from error
    logging.getLogger("mmforesight.py").debug(f"Saved checkpoint {path}")
    return path


def _read_blocks(data: bytes, offset: int) -> Tuple[Dict[str, np.ndarray], int]:
    (count,) = _COUNT.unpack_from(data, offset)
    offset += _COUNT.size
    blocks = {}
    for _ in range(count):
        name_length, ndim, code = _NAME.unpack_from(data, offset)
        offset += _NAME.size
        if code >= len(_DTYPES):
            raise DataError(f"Unknown dtype code {code} in checkpoint")
        dtype = _DTYPES[code]
        name = data[offset : offset + name_length].decode("utf-8")
        offset += name_length
        shape = struct.unpack_from(f"<{ndim}I", data, offset)
        offset += 4 * ndim
        size = int(np.prod(shape)) if ndim else 1
        end = offset + size * dtype.itemsize
        if end > len(data):
            raise DataError(f"Block {name} is truncated")
        blocks[name] = np.frombuffer(data, dtype=dtype, count=size, offset=offset).reshape(shape)
        offset = end
    return blocks, offset


def parse_checkpoint(data: bytes) -> Checkpoint:
    try:
        magic, version, _, header_length = _PREAMBLE.unpack_from(data)
    except struct.error as error:
        raise DataError("Checkpoint is shorter than its preamble") from error
    if magic != MAGIC:
        raise DataError(f"Bad checkpoint magic {magic!r}")
    if version != VERSION:
        raise DataError(f"Unsupported checkpoint version {version}")

    offset = _PREAMBLE.size
    text = data[offset : offset + header_length].decode("utf-8")
    header = dict(line.split("=", 1) for line in text.splitlines() if "=" in line)
    try:
        blocks, offset = _read_blocks(data, offset + header_length)
    except struct.error as error:
        raise DataError("Checkpoint blocks are truncated") from error
    if offset != len(data):
        raise DataError("Checkpoint has trailing bytes")

    def section(prefix: str) -> Dict[str, str]:
        return {k[len(prefix) :]: v for k, v in header.items() if k.startswith(prefix)}

    model = MultimodalPredictor(
        ModelConfig.from_dict(section("model.")),
        ModalityMask.from_dict(section("mask.")),
        FrameConfig.from_dict(section("frame.")),
        seed=int(header.get("seed", 0)),
    )
    stat_blocks = {k: v for k, v in blocks.items() if k.startswith("stats.")}
    model.load_state_dict({k: v for k, v in blocks.items() if not k.startswith("stats.")})
    stats = NormalizationStats.from_arrays(stat_blocks) if stat_blocks else None
    return Checkpoint(model, stats, header)


def load_checkpoint(path: Union[str, Path]) -> Checkpoint:
    path = Path(path)
    try:
        data = path.read_bytes()
    except OSError as error:
        raise DataError(f"Cannot read checkpoint {path}: {error}") from error
    try:
        return parse_checkpoint(data)
    except ConfigError as error:
        raise ConfigError(f"{path}: {error}") from error
