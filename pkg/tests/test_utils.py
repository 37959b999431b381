import numpy as np
import pytest

from mmforesight.exceptions import DataError
from mmforesight.utils import RunKey, derive_seed, format_value, read_csv, write_csv


def test_run_key_order():
    keys = [RunKey("b", 0), RunKey("a", 1), RunKey("a", 0, 3), RunKey("a", 0, 1)]
    assert [str(key) for key in sorted(keys)] == [
        "a fold=0 trial=1",
        "a fold=0 trial=3",
        "a fold=1 trial=-1",
        "b fold=0 trial=-1",
    ]


def test_run_key_equality():
    assert RunKey("vision", 2, 7) == RunKey("vision", 2, 7)
    assert RunKey("vision", 2) != RunKey("vision", 3)
    assert RunKey("vision") != "vision"
    assert len({RunKey("vision", 1), RunKey("vision", 1)}) == 1


def test_derive_seed_is_stable():
    assert derive_seed(7, 1, 2) == derive_seed(7, 1, 2)
    assert derive_seed(7, 1, 2) != derive_seed(7, 2, 1)
    assert derive_seed(7) != derive_seed(8)
    assert 0 <= derive_seed(0, 4) < 2 ** 32


def test_format_value():
    assert format_value(0.1) == "0.1"
    assert format_value(np.float32(0.5)) == "0.5"
    assert format_value(1 / 3) == repr(1 / 3)
    assert format_value(float("nan")) == "nan"
    assert format_value(3) == "3"
    assert format_value("vision+haptic") == "vision+haptic"


def test_csv_round_trip(tmp_path):
    path = write_csv(tmp_path / "nested" / "out.csv", ("timestep", "ssim"), [(5, 0.75), (6, 2 / 3)])
    assert path.read_text(encoding="utf-8") == "timestep,ssim\n5,0.75\n6,{}\n".format(repr(2 / 3))
    header, rows = read_csv(path)
    assert header == ["timestep", "ssim"]
    assert float(rows[1][1]) == 2 / 3


def test_read_csv_errors(tmp_path):
    with pytest.raises(DataError):
        read_csv(tmp_path / "missing.csv")
    empty = tmp_path / "empty.csv"
    empty.write_text("")
    with pytest.raises(DataError):
        read_csv(empty)
