import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from mmforesight.exceptions import (
    ConfigError,
    ContractError,
    DimensionError,
    GraphStateError,
    InputError,
)
from mmforesight.tensor import (
    Conv2d,
    ConvLSTMCell,
    ConvLSTMState,
    Linear,
    Tensor,
    clamp,
    concat,
    conv2d,
    conv_transpose2d,
    convlstm_cell,
    default_dtype,
    depthwise_advect,
    elementwise,
    get_default_dtype,
    mse,
    no_grad,
    relu,
    softmax,
    tile_spatial,
)


def test_conv2d_sums_window():
    out = conv2d(np.ones((1, 3, 3)), np.ones((1, 1, 2, 2)))
    assert out.shape == (1, 2, 2)
    np.testing.assert_allclose(out.data, 4.0)


def test_conv2d_identity_kernel(rng):
    x = rng.normal(size=(2, 1, 5, 7))
    out = conv2d(x, np.ones((1, 1, 1, 1)))
    np.testing.assert_allclose(out.data, x)


def test_conv2d_stride_padding_shape(rng):
    out = conv2d(rng.normal(size=(2, 3, 9, 9)), rng.normal(size=(4, 3, 3, 3)), stride=2, padding=1)
    assert out.shape == (2, 4, 5, 5)


def test_conv2d_channel_mismatch():
    with pytest.raises(DimensionError):
        conv2d(np.ones((2, 4, 4)), np.ones((1, 3, 2, 2)))


def test_conv2d_bias():
    out = conv2d(np.zeros((1, 3, 3)), np.zeros((2, 1, 1, 1)), bias=np.array([1.0, -2.0]))
    np.testing.assert_allclose(out.data[0], 1.0)
    np.testing.assert_allclose(out.data[1], -2.0)


def test_conv_transpose2d_single_pixel_spreads_kernel(rng):
    kernel = rng.normal(size=(1, 1, 3, 3))
    out = conv_transpose2d(np.ones((1, 1, 1)), kernel)
    assert out.shape == (1, 3, 3)
    np.testing.assert_allclose(out.data[0], kernel[0, 0])


def test_conv_transpose2d_matches_scatter_add(rng):
    x = rng.normal(size=(2, 2, 2))
    w = rng.normal(size=(2, 3, 2, 2))
    out = conv_transpose2d(x, w, stride=2)

    expected = np.zeros((3, 4, 4))
    for ci in range(2):
        for i in range(2):
            for j in range(2):
                expected[:, 2 * i : 2 * i + 2, 2 * j : 2 * j + 2] += x[ci, i, j] * w[ci]
    np.testing.assert_allclose(out.data, expected, rtol=1e-10)


def test_conv_transpose2d_is_adjoint_of_conv2d(rng):
    x = rng.normal(size=(1, 2, 6, 6))
    w = rng.normal(size=(3, 2, 3, 3))
    y = rng.normal(size=(1, 3, 6, 6))
    forward = conv2d(x, w, padding=1).data
    adjoint = conv_transpose2d(y, w, padding=1).data
    assert np.sum(forward * y) == pytest.approx(np.sum(x * adjoint), rel=1e-9)


def test_conv_transpose2d_rejects_empty_output():
    with pytest.raises(DimensionError):
        conv_transpose2d(np.ones((1, 1, 1)), np.ones((1, 1, 1, 1)), padding=1)


def test_depthwise_advect_delta_shifts_one_pixel(rng):
    frame = rng.uniform(size=(1, 3, 6, 6))
    kernels = np.zeros((1, 1, 3, 3))
    kernels[0, 0, 1, 2] = 1.0
    out = depthwise_advect(frame, kernels).data
    assert out.shape == (1, 1, 3, 6, 6)
    np.testing.assert_allclose(out[0, 0, :, :, 1:], frame[0, :, :, :-1])
    np.testing.assert_allclose(out[0, 0, :, :, 0], 0.0)


def test_depthwise_advect_keeps_uniform_interior(rng):
    frame = np.full((2, 3, 8, 8), 0.37)
    kernels = rng.uniform(size=(2, 4, 5, 5))
    kernels /= kernels.sum(axis=(2, 3), keepdims=True)
    out = depthwise_advect(frame, kernels).data
    np.testing.assert_allclose(out[..., 2:-2, 2:-2], 0.37, rtol=1e-12)


def test_depthwise_advect_rejects_large_kernel():
    with pytest.raises(DimensionError):
        depthwise_advect(np.ones((1, 1, 3, 3)), np.ones((1, 1, 5, 5)))


def test_softmax_constant_is_uniform():
    out = softmax(np.zeros((2, 3, 4)), axes=(1, 2))
    np.testing.assert_allclose(out.data, 1.0 / 12)


def test_softmax_two_values():
    out = softmax(np.array([0.0, np.log(3.0)]), axes=0)
    np.testing.assert_allclose(out.data, [0.25, 0.75])


def test_softmax_bad_axes():
    with pytest.raises(InputError):
        softmax(np.zeros((2, 2)), axes=())
    with pytest.raises(InputError):
        softmax(np.zeros((2, 2)), axes=(0, -2))
    with pytest.raises(InputError):
        softmax(np.zeros((2, 2)), axes=5)


@given(arrays(np.float64, (3, 4), elements=st.floats(-50, 50)))
def test_softmax_normalized(values):
    out = softmax(values, axes=1).data
    np.testing.assert_allclose(out.sum(axis=1), 1.0, atol=1e-12)
    assert np.all(out >= 0)


def test_concat_preserves_order(rng):
    a = rng.normal(size=(2, 3))
    b = rng.normal(size=(2, 5))
    out = concat([a, b], axis=1).data
    assert out.shape == (2, 8)
    np.testing.assert_array_equal(out[:, :3], a)
    np.testing.assert_array_equal(out[:, 3:], b)


def test_concat_shape_mismatch():
    with pytest.raises(DimensionError):
        concat([np.ones((2, 3)), np.ones((3, 3))], axis=1)
    with pytest.raises(ContractError):
        concat([])


def test_elementwise_unknown():
    with pytest.raises(InputError):
        elementwise(np.ones(3), "swish")


def test_elementwise_values():
    x = np.array([-1.0, 0.0, 2.0])
    np.testing.assert_allclose(relu(x).data, [0.0, 0.0, 2.0])
    np.testing.assert_allclose(elementwise(x, "sigmoid").data[1], 0.5)
    np.testing.assert_allclose(elementwise(x, "tanh").data, np.tanh(x))


def test_sum_backward_gives_ones(rng):
    x = Tensor(rng.normal(size=(3, 4)), requires_grad=True)
    x.sum().backward()
    np.testing.assert_array_equal(x.grad, np.ones((3, 4)))


def test_shared_leaf_accumulates():
    x = Tensor(np.array([1.0, -2.0, 3.0]), requires_grad=True)
    (x * x + x).sum().backward()
    np.testing.assert_allclose(x.grad, 2 * x.data + 1)


def test_second_backward_raises():
    x = Tensor(np.ones(2), requires_grad=True)
    loss = (x * 2.0).sum()
    loss.backward()
    with pytest.raises(GraphStateError):
        loss.backward()


def test_non_scalar_backward_raises():
    x = Tensor(np.ones(2), requires_grad=True)
    with pytest.raises(ContractError):
        (x * 2.0).backward()


def test_no_grad_records_nothing():
    x = Tensor(np.ones(2), requires_grad=True)
    with no_grad():
        y = (x * 3.0).sum()
    assert not y.requires_grad
    assert y.is_leaf


def test_mse_and_clamp_gradients():
    p = Tensor(np.array([0.5, 2.0]), requires_grad=True)
    loss = mse(clamp(p, 0.0, 1.0), np.array([0.0, 0.0]))
    loss.backward()
    assert loss.item() == pytest.approx((0.25 + 1.0) / 2)
    # the clamped entry passes no gradient
    np.testing.assert_allclose(p.grad, [0.5, 0.0])


def test_mse_shape_mismatch():
    with pytest.raises(DimensionError):
        mse(np.ones(3), np.ones(4))


def test_tile_spatial_is_constant_per_channel(rng):
    v = rng.normal(size=(2, 5))
    out = tile_spatial(v, 8, 8).data
    assert out.shape == (2, 5, 8, 8)
    np.testing.assert_array_equal(out, np.broadcast_to(v[:, :, None, None], out.shape))


def test_convlstm_zero_weights_give_zero():
    state = ConvLSTMState.zeros(2, 4, 5, 5)
    hidden, new_state = convlstm_cell(
        np.ones((2, 3, 5, 5)), state, np.zeros((16, 7, 3, 3)), np.zeros(16)
    )
    np.testing.assert_array_equal(hidden.data, 0.0)
    np.testing.assert_array_equal(new_state.cell.data, 0.0)


def test_convlstm_spatial_mismatch():
    state = ConvLSTMState.zeros(1, 4, 5, 5)
    with pytest.raises(DimensionError):
        convlstm_cell(np.ones((1, 3, 4, 4)), state, np.zeros((16, 7, 3, 3)), np.zeros(16))


def test_convlstm_cell_forget_bias(rng):
    cell = ConvLSTMCell(3, 4, 3, rng)
    np.testing.assert_array_equal(cell.bias.data[4:8], 1.0)
    np.testing.assert_array_equal(cell.bias.data[:4], 0.0)
    hidden, state = cell(Tensor(rng.normal(size=(2, 3, 6, 6))))
    assert hidden.shape == (2, 4, 6, 6)
    assert state.cell.shape == (2, 4, 6, 6)


def test_module_state_round_trip(rng):
    layer = Conv2d(2, 3, 3, rng, padding=1)
    other = Conv2d(2, 3, 3, np.random.default_rng(99), padding=1)
    other.load_state_dict(layer.state_dict())
    for (_, a), (_, b) in zip(layer.named_parameters(), other.named_parameters()):
        np.testing.assert_array_equal(a.data, b.data)
    assert [name for name, _ in layer.named_parameters()] == ["weight", "bias"]
    assert layer.num_parameters() == 3 * 2 * 9 + 3


def test_module_state_mismatch(rng):
    layer = Linear(4, 2, rng)
    with pytest.raises(ConfigError):
        layer.load_state_dict({"weight": np.zeros((4, 2))})
    with pytest.raises(DimensionError):
        layer.load_state_dict({"weight": np.zeros((2, 4)), "bias": np.zeros(2)})


def test_linear_forward(rng):
    layer = Linear(3, 2, rng)
    x = rng.normal(size=(5, 3)).astype(layer.weight.dtype)
    out = layer(Tensor(x))
    np.testing.assert_allclose(out.data, x @ layer.weight.data + layer.bias.data, rtol=1e-5)


def test_default_dtype_context():
    assert get_default_dtype() == np.float32
    with default_dtype(np.float64):
        assert Tensor([1.0, 2.0]).dtype == np.float64
    assert Tensor([1.0, 2.0]).dtype == np.float32


def _relative(actual, expected):
    return np.linalg.norm(actual - expected) / np.linalg.norm(expected)


@pytest.mark.parametrize("stride, padding", [(1, 0), (1, 1), (2, 1), (2, 2)])
def test_conv2d_matches_direct_sum(rng, stride, padding):
    x = rng.normal(size=(2, 3, 7, 6))
    w = rng.normal(size=(4, 3, 3, 3))
    out = conv2d(x, w, stride=stride, padding=padding).data

    xpad = np.pad(x, ((0, 0), (0, 0), (padding, padding), (padding, padding)))
    expected = np.zeros(out.shape)
    for n in range(out.shape[0]):
        for o in range(out.shape[1]):
            for y in range(out.shape[2]):
                for z in range(out.shape[3]):
                    for c in range(3):
                        for i in range(3):
                            for j in range(3):
                                expected[n, o, y, z] += w[o, c, i, j] * xpad[n, c, y * stride + i, z * stride + j]
    assert _relative(out, expected) <= 1e-12


@pytest.mark.parametrize("stride, padding", [(1, 0), (2, 0), (2, 1), (3, 1)])
def test_conv_transpose2d_matches_direct_sum(rng, stride, padding):
    x = rng.normal(size=(2, 3, 4, 5))
    w = rng.normal(size=(3, 2, 4, 4))
    out = conv_transpose2d(x, w, stride=stride, padding=padding).data

    full = np.zeros((2, 2, (4 - 1) * stride + 4, (5 - 1) * stride + 4))
    for n in range(2):
        for c in range(3):
            for y in range(4):
                for z in range(5):
                    for o in range(2):
                        for i in range(4):
                            for j in range(4):
                                full[n, o, y * stride + i, z * stride + j] += x[n, c, y, z] * w[c, o, i, j]
    expected = full[:, :, padding : full.shape[2] - padding, padding : full.shape[3] - padding]
    assert out.shape == expected.shape
    assert _relative(out, expected) <= 1e-12
