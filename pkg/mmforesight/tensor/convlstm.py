from typing import Optional, Tuple

import numpy as np

from ..exceptions import DimensionError
from .module import Module, Parameter, uniform_fan_in
from .ops import concat, conv2d, sigmoid, tanh
from .tensor import Tensor, TensorLike, as_tensor, get_default_dtype


class ConvLSTMState:
    def __init__(self, hidden: Tensor, cell: Tensor) -> None:
        if hidden.shape != cell.shape:
            raise DimensionError(
                f"Hidden {hidden.shape} and cell {cell.shape} shapes differ"
            )
        self._hidden = hidden
        self._cell = cell

    @classmethod
    def zeros(
        cls, batch: int, channels: int, height: int, width: int, dtype=None
    ) -> "ConvLSTMState":
        shape = (batch, channels, height, width)
        dtype = dtype or get_default_dtype()
        return cls(Tensor(np.zeros(shape, dtype=dtype)), Tensor(np.zeros(shape, dtype=dtype)))

    @property
    def hidden(self) -> Tensor:
        return self._hidden

    @property
    def cell(self) -> Tensor:
        return self._cell

    @property
    def shape(self) -> Tuple[int, ...]:
        return self._hidden.shape

    def __str__(self) -> str:
        return "ConvLSTMState[shape={}]".format(self.shape)


def convlstm_cell(
    input: TensorLike,
    state: ConvLSTMState,
    weight: TensorLike,
    bias: TensorLike,
) -> Tuple[Tensor, ConvLSTMState]:
    """
    One step of a convolutional LSTM without peepholes.

    Gates are computed by a single convolution over [input, hidden], split in
    the order input, forget, output, candidate:

        c' = f * c + i * g
        h' = o * tanh(c')

    :param input: N×C_in×H×W
    :param state: hidden/cell maps of shape N×C×H×W
    :param weight: 4C×(C_in + C)×k×k
    :param bias: 4C
    :return: the new hidden map and the new state
    """
    x = as_tensor(input)
    if x.ndim != 4:
        raise DimensionError(f"Expected an N×C×H×W input, got shape {x.shape}")
    hidden, cell = state.hidden, state.cell
    if x.shape[0] != hidden.shape[0] or x.shape[2:] != hidden.shape[2:]:
        raise DimensionError(
            f"Input {x.shape} does not match recurrent state {hidden.shape}"
        )

    w = as_tensor(weight)
    channels = hidden.shape[1]
    if w.shape[0] != 4 * channels:
        raise DimensionError(
            f"Gate kernel has {w.shape[0]} outputs, expected {4 * channels}"
        )

    gates = conv2d(concat([x, hidden], axis=1), w, bias, padding=w.shape[2] // 2)
    in_gate = sigmoid(gates[:, 0:channels])
    forget_gate = sigmoid(gates[:, channels : 2 * channels])
    out_gate = sigmoid(gates[:, 2 * channels : 3 * channels])
    candidate = tanh(gates[:, 3 * channels :])

    new_cell = forget_gate * cell + in_gate * candidate
    new_hidden = out_gate * tanh(new_cell)
    return new_hidden, ConvLSTMState(new_hidden, new_cell)


class ConvLSTMCell(Module):
    def __init__(
        self,
        in_channels: int,
        hidden_channels: int,
        kernel_size: int,
        rng: np.random.Generator,
        forget_bias: float = 1.0,
    ) -> None:
        self.hidden_channels = hidden_channels
        fan_in = (in_channels + hidden_channels) * kernel_size * kernel_size
        self.weight = Parameter(
            uniform_fan_in(
                rng,
                (4 * hidden_channels, in_channels + hidden_channels, kernel_size, kernel_size),
                fan_in,
            )
        )
        bias = np.zeros(4 * hidden_channels)
        bias[hidden_channels : 2 * hidden_channels] = forget_bias
        self.bias = Parameter(bias)

    def initial_state(self, batch: int, height: int, width: int) -> ConvLSTMState:
        return ConvLSTMState.zeros(
            batch, self.hidden_channels, height, width, dtype=self.weight.dtype
        )

    def forward(
        self, x: Tensor, state: Optional[ConvLSTMState] = None
    ) -> Tuple[Tensor, ConvLSTMState]:
        if state is None:
            state = self.initial_state(x.shape[0], x.shape[2], x.shape[3])
        return convlstm_cell(x, state, self.weight, self.bias)
