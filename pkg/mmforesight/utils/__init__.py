from .run_key import RunKey
from .records import write_csv, read_csv, format_value, derive_seed
