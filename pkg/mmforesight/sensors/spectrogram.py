import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from scipy import fft
from scipy.signal import get_window

from ..exceptions import InputError


def _check(wave: np.ndarray, window: int, hop: int) -> np.ndarray:
    wave = np.asarray(wave, dtype=np.float64)
    if wave.ndim != 1:
        raise InputError(f"Expected a 1-d waveform, got shape {wave.shape}")
    if hop < 1:
        raise InputError("Hop must be at least 1")
    if window < 1 or len(wave) < window:
        raise InputError(
            f"Waveform of {len(wave)} samples is shorter than one {window}-sample window"
        )
    return wave


def stft(wave: np.ndarray, window: int, hop: int) -> np.ndarray:
    """
    Hann-windowed short-time Fourier transform without centering

    :return: complex array of shape (window // 2 + 1)×frames
    """
    wave = _check(wave, window, hop)
    frames = sliding_window_view(wave, window)[::hop]
    return fft.rfft(frames * get_window("hann", window), axis=1).T


def reduce_bins(magnitude: np.ndarray, bins: int) -> np.ndarray:
    """
    Averages contiguous groups of frequency rows down to `bins` rows; rows
    past the last full group are dropped.
    """
    rows = magnitude.shape[0]
    if not 1 <= bins <= rows:
        raise InputError(f"Cannot reduce {rows} frequency rows to {bins}")
    group = rows // bins
    return magnitude[: group * bins].reshape(bins, group, -1).mean(axis=1)


def spectrogram(wave: np.ndarray, window: int, hop: int, bins: int) -> np.ndarray:
    """
    Log-compressed magnitude spectrogram, log(1 + |X|), with `bins` rows
    """
    if bins > window // 2 + 1:
        raise InputError(f"{bins} bins do not fit a {window}-sample window")
    magnitude = np.abs(stft(wave, window, hop))
    return np.log1p(reduce_bins(magnitude, bins))


def causal_pad(wave: np.ndarray, window: int, hop: int) -> np.ndarray:
    # column j then only holds samples up to (j + 1) * hop
    return np.concatenate([np.zeros(window - hop, dtype=np.float64), wave])


def stream_spectrogram(wave: np.ndarray, window: int, hop: int, bins: int) -> np.ndarray:
    """
    Spectrogram of a sensor stream laid out so that it reads as a stream of
    len(wave) // hop columns at rate sample_rate / hop
    """
    return spectrogram(causal_pad(np.asarray(wave), window, hop), window, hop, bins)


def vibro_spectrogram(axes: np.ndarray, window: int, hop: int, bins: int) -> np.ndarray:
    """
    Per-axis spectrograms of a 3-axis accelerometer stream, stacked along the
    frequency axis with the axes interleaved per bin and averaged back down to
    `bins` rows.

    :param axes: samples×3
    """
    axes = np.asarray(axes, dtype=np.float64)
    if axes.ndim != 2 or axes.shape[1] != 3:
        raise InputError(f"Expected samples×3 accelerometer data, got {axes.shape}")

    per_axis = [
        reduce_bins(np.abs(stft(causal_pad(axes[:, a], window, hop), window, hop)), bins)
        for a in range(3)
    ]
    stacked = np.stack(per_axis, axis=1).reshape(3 * bins, -1)
    return np.log1p(reduce_bins(stacked, bins))
