from typing import Optional

import numpy as np
from scipy.signal import convolve2d

from ..exceptions import ConfigError, ContractError


class SsimConfig:
    """
    Gaussian-windowed SSIM settings. The default 7×7 window suits 32×32
    frames; C1 and C2 default to (0.01·L)² and (0.03·L)².
    """

    def __init__(
        self,
        window: int = 7,
        sigma: float = 1.5,
        c1: Optional[float] = None,
        c2: Optional[float] = None,
        dynamic_range: float = 1.0,
    ) -> None:
        if window < 1 or window % 2 == 0:
            raise ConfigError(f"SSIM window must be odd and positive, got {window}")
        if sigma <= 0:
            raise ConfigError("SSIM window sigma must be positive")
        if dynamic_range <= 0:
            raise ConfigError("Dynamic range must be positive")
        c1 = (0.01 * dynamic_range) ** 2 if c1 is None else c1
        c2 = (0.03 * dynamic_range) ** 2 if c2 is None else c2
        if c1 <= 0 or c2 <= 0:
            raise ConfigError("SSIM constants C1 and C2 must be positive")

        self._window = int(window)
        self._sigma = float(sigma)
        self._c1 = float(c1)
        self._c2 = float(c2)
        self._dynamic_range = float(dynamic_range)

    @classmethod
    def default(cls) -> "SsimConfig":
        return cls()

    @property
    def window(self) -> int:
        return self._window

    @property
    def sigma(self) -> float:
        return self._sigma

    @property
    def c1(self) -> float:
        return self._c1

    @property
    def c2(self) -> float:
        return self._c2

    @property
    def dynamic_range(self) -> float:
        return self._dynamic_range

    def kernel(self) -> np.ndarray:
        offsets = np.arange(self._window, dtype=np.float64) - (self._window - 1) / 2.0
        line = np.exp(-(offsets ** 2) / (2.0 * self._sigma ** 2))
        kernel = np.outer(line, line)
        return kernel / kernel.sum()

    def __str__(self) -> str:
        return "SsimConfig[window={}, sigma={}, c1={}, c2={}, dynamic_range={}]".format(
            self._window, self._sigma, self._c1, self._c2, self._dynamic_range
        )


def _channels(image: np.ndarray) -> np.ndarray:
    if image.ndim == 2:
        return image[None]
    if image.ndim == 3:
        return image
    raise ContractError(f"SSIM takes H×W or C×H×W images, got shape {image.shape}")


def ssim_map(a: np.ndarray, b: np.ndarray, config: Optional[SsimConfig] = None) -> np.ndarray:
    """
    Per-window SSIM of every channel over the valid window positions.

    :return: C×(H-w+1)×(W-w+1)
    """
    config = config or SsimConfig.default()
    a = _channels(np.asarray(a, dtype=np.float64))
    b = _channels(np.asarray(b, dtype=np.float64))
    if a.shape != b.shape:
        raise ContractError(f"SSIM needs equal shapes, got {a.shape} and {b.shape}")
    if min(a.shape[1:]) < config.window:
        raise ContractError(f"Images {a.shape[1:]} are smaller than the {config.window}px window")

    kernel = config.kernel()

    def filtered(x: np.ndarray) -> np.ndarray:
        return np.stack([convolve2d(channel, kernel, mode="valid") for channel in x])

    mu_a = filtered(a)
    mu_b = filtered(b)
    var_a = filtered(a * a) - mu_a * mu_a
    var_b = filtered(b * b) - mu_b * mu_b
    covariance = filtered(a * b) - mu_a * mu_b

    numerator = (2.0 * mu_a * mu_b + config.c1) * (2.0 * covariance + config.c2)
    denominator = (mu_a * mu_a + mu_b * mu_b + config.c1) * (var_a + var_b + config.c2)
    return numerator / denominator


def ssim(a: np.ndarray, b: np.ndarray, config: Optional[SsimConfig] = None) -> float:
    """
    Mean SSIM over sliding windows, channels averaged. Images are H×W or
    channel-first C×H×W with values in [0, L].
    """
    return float(ssim_map(a, b, config).mean())


def batch_ssim(a: np.ndarray, b: np.ndarray, config: Optional[SsimConfig] = None) -> np.ndarray:
    """
    SSIM of every image pair along the leading axis of N×C×H×W batches
    """
    a = np.asarray(a)
    b = np.asarray(b)
    if a.shape != b.shape:
        raise ContractError(f"SSIM needs equal shapes, got {a.shape} and {b.shape}")
    return np.array([ssim(x, y, config) for x, y in zip(a, b)], dtype=np.float64)
