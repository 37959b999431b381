from typing import Iterable, Optional, Sequence, Tuple, Union

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from scipy.special import expit

from ..exceptions import ContractError, DimensionError, InputError
from .tensor import Tensor, TensorLike, as_tensor


def _pad(x: np.ndarray, padding: int) -> np.ndarray:
    if padding == 0:
        return x
    return np.pad(x, ((0, 0), (0, 0), (padding, padding), (padding, padding)))


def _windows(x: np.ndarray, size: int, stride: int) -> np.ndarray:
    # N, C, H', W', k, k
    return sliding_window_view(x, (size, size), axis=(2, 3))[:, :, ::stride, ::stride]


def _conv_forward(x: np.ndarray, w: np.ndarray, stride: int, padding: int) -> np.ndarray:
    cols = _windows(_pad(x, padding), w.shape[2], stride)
    out = np.tensordot(cols, w, axes=([1, 4, 5], [1, 2, 3]))
    return np.ascontiguousarray(out.transpose(0, 3, 1, 2))


def _conv_weight_grad(
    grad: np.ndarray, x: np.ndarray, stride: int, padding: int, size: int
) -> np.ndarray:
    cols = _windows(_pad(x, padding), size, stride)
    return np.tensordot(grad, cols, axes=([0, 2, 3], [0, 2, 3]))


def _conv_input_grad(
    grad: np.ndarray,
    w: np.ndarray,
    stride: int,
    padding: int,
    in_hw: Tuple[int, int],
) -> np.ndarray:
    n, _, out_h, out_w = grad.shape
    size = w.shape[2]
    height, width = in_hw
    padded = np.zeros(
        (n, w.shape[1], height + 2 * padding, width + 2 * padding),
        dtype=np.result_type(grad, w),
    )
    for i in range(size):
        for j in range(size):
            contribution = np.tensordot(grad, w[:, :, i, j], axes=([1], [0]))
            padded[
                :,
                :,
                i : i + stride * out_h : stride,
                j : j + stride * out_w : stride,
            ] += contribution.transpose(0, 3, 1, 2)

    if padding == 0:
        return padded
    return padded[:, :, padding:-padding, padding:-padding]


def _batched(x: Tensor) -> Tuple[Tensor, bool]:
    if x.ndim == 3:
        return x.reshape((1,) + x.shape), True
    if x.ndim == 4:
        return x, False
    raise DimensionError(f"Expected C×H×W or N×C×H×W input, got shape {x.shape}")


def _check_kernel(kernel: Tensor) -> int:
    if kernel.ndim != 4 or kernel.shape[2] != kernel.shape[3]:
        raise DimensionError(f"Expected a square 4-d kernel, got shape {kernel.shape}")
    return kernel.shape[2]


def conv2d(
    input: TensorLike,
    kernel: TensorLike,
    bias: Optional[TensorLike] = None,
    stride: int = 1,
    padding: int = 0,
) -> Tensor:
    """
    Zero-padded 2-d cross-correlation.

    :param input: C_in×H×W or N×C_in×H×W
    :param kernel: C_out×C_in×k×k
    :param bias: optional C_out vector
    :return: Tensor C_out×H'×W' (or batched), H' = (H + 2p - k) // stride + 1
    """
    x, squeeze = _batched(as_tensor(input))
    w = as_tensor(kernel)
    size = _check_kernel(w)

    if stride < 1:
        raise ContractError("Stride must be at least 1")
    if padding < 0:
        raise ContractError("Padding cannot be negative")
    if w.shape[1] != x.shape[1]:
        raise DimensionError(
            f"Kernel expects {w.shape[1]} input channels, input has {x.shape[1]}"
        )
    height, width = x.shape[2], x.shape[3]
    if size > height + 2 * padding or size > width + 2 * padding:
        raise DimensionError(
            f"Kernel size {size} does not fit a {height}×{width} input with padding {padding}"
        )

    def backward(grad):
        return (
            _conv_input_grad(grad, w.data, stride, padding, (height, width)),
            _conv_weight_grad(grad, x.data, stride, padding, size),
        )

    out = Tensor._result(
        _conv_forward(x.data, w.data, stride, padding), (x, w), backward, "conv2d"
    )
    if bias is not None:
        out = out + as_tensor(bias).reshape(1, -1, 1, 1)
    if squeeze:
        out = out.reshape(out.shape[1:])
    return out


def conv_transpose2d(
    input: TensorLike,
    kernel: TensorLike,
    bias: Optional[TensorLike] = None,
    stride: int = 1,
    padding: int = 0,
) -> Tensor:
    """
    Transposed convolution, the adjoint of conv2d with the same kernel.

    :param input: C_in×H×W or N×C_in×H×W
    :param kernel: C_in×C_out×k×k
    :return: output with spatial size (H - 1) * stride - 2 * padding + k
    """
    x, squeeze = _batched(as_tensor(input))
    w = as_tensor(kernel)
    size = _check_kernel(w)

    if stride < 1:
        raise ContractError("Stride must be at least 1")
    if w.shape[0] != x.shape[1]:
        raise DimensionError(
            f"Kernel expects {w.shape[0]} input channels, input has {x.shape[1]}"
        )

    out_h = (x.shape[2] - 1) * stride - 2 * padding + size
    out_w = (x.shape[3] - 1) * stride - 2 * padding + size
    if out_h <= 0 or out_w <= 0:
        raise DimensionError(
            f"Transposed convolution would produce a {out_h}×{out_w} output"
        )

    def backward(grad):
        return (
            _conv_forward(grad, w.data, stride, padding),
            _conv_weight_grad(x.data, grad, stride, padding, size),
        )

    out = Tensor._result(
        _conv_input_grad(x.data, w.data, stride, padding, (out_h, out_w)),
        (x, w),
        backward,
        "conv_transpose2d",
    )
    if bias is not None:
        out = out + as_tensor(bias).reshape(1, -1, 1, 1)
    if squeeze:
        out = out.reshape(out.shape[1:])
    return out


def depthwise_advect(frame: TensorLike, kernels: TensorLike) -> Tensor:
    """
    Convolves every channel of each sample's frame with each of that sample's
    kernels (true convolution, zero padding, same spatial size).

    :param frame: N×C×H×W
    :param kernels: N×M×k×k with k odd
    :return: N×M×C×H×W
    """
    x = as_tensor(frame)
    m = as_tensor(kernels)
    if x.ndim != 4 or m.ndim != 4 or m.shape[2] != m.shape[3]:
        raise DimensionError(
            f"Expected N×C×H×W frames and N×M×k×k kernels, got {x.shape} and {m.shape}"
        )
    if x.shape[0] != m.shape[0]:
        raise DimensionError("Frames and kernels disagree on batch size")
    n, channels, height, width = x.shape
    count, size = m.shape[1], m.shape[2]
    if size % 2 == 0:
        raise DimensionError("Advection kernels must have odd size")
    if size > height or size > width:
        raise DimensionError(
            f"Kernel size {size} is larger than the {height}×{width} frame"
        )
    radius = size // 2

    # convolution == correlation with the flipped kernel
    flipped = m.data[:, :, ::-1, ::-1].reshape(n, count, size * size)
    cols = _windows(_pad(x.data, radius), size, 1).reshape(
        n, channels * height * width, size * size
    )
    out = np.matmul(cols, flipped.transpose(0, 2, 1))
    out = out.transpose(0, 2, 1).reshape(n, count, channels, height, width)

    def backward(grad):
        grad = grad.reshape(n, count, channels * height * width)
        kernel_grad = np.matmul(grad, cols).reshape(n, count, size, size)
        col_grad = np.matmul(grad.transpose(0, 2, 1), flipped).reshape(
            n, channels, height, width, size, size
        )
        padded = np.zeros(
            (n, channels, height + 2 * radius, width + 2 * radius),
            dtype=col_grad.dtype,
        )
        for i in range(size):
            for j in range(size):
                padded[:, :, i : i + height, j : j + width] += col_grad[..., i, j]
        frame_grad = padded[:, :, radius : radius + height, radius : radius + width]
        return frame_grad, kernel_grad[:, :, ::-1, ::-1]

    return Tensor._result(np.ascontiguousarray(out), (x, m), backward, "advect")


def _normalize_axes(axes: Union[int, Iterable[int]], ndim: int) -> Tuple[int, ...]:
    if isinstance(axes, int):
        axes = (axes,)
    axes = tuple(axes)
    if len(axes) == 0:
        raise InputError("Softmax needs at least one axis")
    normalized = []
    for axis in axes:
        if not -ndim <= axis < ndim:
            raise InputError(f"Axis {axis} is out of range for {ndim} dimensions")
        normalized.append(axis % ndim)
    if len(set(normalized)) != len(normalized):
        raise InputError(f"Duplicate axes in {axes}")
    return tuple(sorted(normalized))


def softmax(input: TensorLike, axes: Union[int, Iterable[int]]) -> Tensor:
    """
    Max-subtracted softmax over a set of axes
    """
    x = as_tensor(input)
    axes = _normalize_axes(axes, x.ndim)
    shifted = np.exp(x.data - x.data.max(axis=axes, keepdims=True))
    out_data = shifted / shifted.sum(axis=axes, keepdims=True)

    def backward(grad):
        return (out_data * (grad - (grad * out_data).sum(axis=axes, keepdims=True)),)

    return Tensor._result(out_data, (x,), backward, "softmax")


def relu(input: TensorLike) -> Tensor:
    x = as_tensor(input)
    mask = x.data > 0
    return Tensor._result(
        np.where(mask, x.data, 0).astype(x.dtype),
        (x,),
        lambda grad: (grad * mask,),
        "relu",
    )


def sigmoid(input: TensorLike) -> Tensor:
    x = as_tensor(input)
    out_data = expit(x.data)
    return Tensor._result(
        out_data,
        (x,),
        lambda grad: (grad * out_data * (1 - out_data),),
        "sigmoid",
    )


def tanh(input: TensorLike) -> Tensor:
    x = as_tensor(input)
    out_data = np.tanh(x.data)
    return Tensor._result(
        out_data, (x,), lambda grad: (grad * (1 - out_data * out_data),), "tanh"
    )


ACTIVATIONS = {"relu": relu, "sigmoid": sigmoid, "tanh": tanh}


def elementwise(input: TensorLike, fn: str) -> Tensor:
    try:
        return ACTIVATIONS[fn](input)
    except KeyError:
        raise InputError(f"Unknown activation {fn}") from None


def concat(tensors: Sequence[TensorLike], axis: int = 0) -> Tensor:
    tensors = [as_tensor(t) for t in tensors]
    if len(tensors) == 0:
        raise ContractError("Nothing to concatenate")

    ndim = tensors[0].ndim
    if not -ndim <= axis < ndim:
        raise DimensionError(f"Axis {axis} is out of range for {ndim} dimensions")
    axis = axis % ndim

    reference = tensors[0].shape
    for t in tensors[1:]:
        if t.ndim != ndim or any(
            t.shape[i] != reference[i] for i in range(ndim) if i != axis
        ):
            raise DimensionError(
                f"Cannot concatenate {t.shape} with {reference} along axis {axis}"
            )

    splits = np.cumsum([t.shape[axis] for t in tensors])[:-1]

    def backward(grad):
        return tuple(np.split(grad, splits, axis=axis))

    return Tensor._result(
        np.concatenate([t.data for t in tensors], axis=axis),
        tensors,
        backward,
        "concat",
    )


def mse(pred: TensorLike, target: TensorLike) -> Tensor:
    """
    Mean over all elements of the squared difference
    """
    p = as_tensor(pred)
    t = as_tensor(target)
    if p.shape != t.shape:
        raise DimensionError(f"Cannot compare {p.shape} with {t.shape}")

    diff = p.data - t.data
    scale = 2.0 / diff.size

    def backward(grad):
        return grad * scale * diff, -grad * scale * diff

    return Tensor._result(
        np.asarray(np.mean(diff * diff), dtype=diff.dtype), (p, t), backward, "mse"
    )


def clamp(input: TensorLike, low: float, high: float) -> Tensor:
    x = as_tensor(input)
    mask = (x.data >= low) & (x.data <= high)
    return Tensor._result(
        np.clip(x.data, low, high), (x,), lambda grad: (grad * mask,), "clamp"
    )


def tile_spatial(vector: TensorLike, height: int, width: int) -> Tensor:
    """
    Spreads an N×L vector across an N×L×height×width grid
    """
    v = as_tensor(vector)
    if v.ndim != 2:
        raise DimensionError(f"Expected an N×L vector, got shape {v.shape}")
    return v.reshape(v.shape[0], v.shape[1], 1, 1).broadcast_to(
        (v.shape[0], v.shape[1], height, width)
    )
