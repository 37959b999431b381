class Error(Exception):
    """Base class for other exceptions"""

    pass


class DimensionError(Error):
    """Raised when tensor shapes or frame dimensions do not line up"""

    pass


class ContractError(Error):
    """Raised when a call is made outside of its contract"""

    pass


class GraphStateError(Error):
    """Raised when backward is run on a graph that has already been consumed"""

    pass


class InputError(Error):
    """Raised when an input value is not valid"""

    pass


class TruncationError(Error):
    """Raised when a sensor stream is shorter than the video it is synced to"""

    def __init__(self, modality: str, message: str = None) -> None:
        self.modality = modality
        super().__init__(
            message if message is not None else f"{modality} stream is truncated"
        )


class ConfigError(Error):
    """Raised when configurations, checkpoints and datasets disagree"""

    pass


class DataError(Error):
    """Raised when the bytes of a container or checkpoint are not valid"""

    pass


class DivergenceError(Error):
    """Raised when the training loss stops being finite"""

    pass
