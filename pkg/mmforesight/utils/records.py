import csv
from pathlib import Path
from typing import Iterable, Sequence, Union

import numpy as np

from ..exceptions import DataError


def format_value(value) -> str:
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return str(value)


def write_csv(
    path: Union[str, Path], header: Sequence[str], rows: Iterable[Sequence]
) -> Path:
    """
    Writes rows with floats in their shortest round-tripping form, so equal
    results give byte-identical files.
    """
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with path.open("w", newline="", encoding="utf-8") as output:
            writer = csv.writer(output, lineterminator="\n")
            writer.writerow(header)
            for row in rows:
                writer.writerow([format_value(value) for value in row])
    except OSError as error:
        raise DataError(f"Cannot write {path}: {error}") from error
    return path


def read_csv(path: Union[str, Path]):
    path = Path(path)
    try:
        with path.open(newline="", encoding="utf-8") as source:
            rows = list(csv.reader(source))
    except OSError as error:
        raise DataError(f"Cannot read {path}: {error}") from error
    if not rows:
        raise DataError(f"{path} is empty")
    return rows[0], rows[1:]


def derive_seed(seed: int, *keys: int) -> int:
    """
    A child seed for a sub-job, stable across runs and platforms
    """
    return int(np.random.SeedSequence([seed, *keys]).generate_state(1)[0])
