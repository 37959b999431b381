from .exceptions import (
    Error,
    DimensionError,
    ContractError,
    GraphStateError,
    InputError,
    TruncationError,
    ConfigError,
    DataError,
    DivergenceError,
)
