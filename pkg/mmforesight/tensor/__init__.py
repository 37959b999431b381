from .tensor import (
    Tensor,
    TensorLike,
    Graph,
    Node,
    as_tensor,
    no_grad,
    is_grad_enabled,
    set_default_dtype,
    get_default_dtype,
    default_dtype,
)
from .ops import (
    conv2d,
    conv_transpose2d,
    depthwise_advect,
    softmax,
    relu,
    sigmoid,
    tanh,
    elementwise,
    concat,
    mse,
    clamp,
    tile_spatial,
)
from .module import Module, Parameter
from .layers import Conv2d, ConvTranspose2d, Linear
from .convlstm import ConvLSTMState, ConvLSTMCell, convlstm_cell
