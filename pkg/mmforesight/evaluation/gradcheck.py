import logging
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from ..model import ModalityMask, ModelConfig, MultimodalPredictor, compose, rollout
from ..model.heads import AuxDecoder, CdnaHead, apply_cdna
from ..model.structures import FeatureMap
from ..sensors import FrameConfig, Modality, SampleQuadruple
from ..tensor import (
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
    mse,
    no_grad,
    relu,
    sigmoid,
    softmax,
    tanh,
    tile_spatial,
)
from ..training import LossWeights, loss_terms, weighted_sum

PRIMITIVE_TOLERANCE = 1e-4
PIPELINE_TOLERANCE = 1e-3
GRAD_FLOOR = 1e-6
# entries under this fraction of a tensor's largest gradient are compared on that scale
FLOOR_FRACTION = 1e-3
KINK_AGREEMENT = 0.5

Loss = Callable[[], Tensor]


class CheckResult:
    def __init__(
        self,
        suite: str,
        seed: int,
        error: float,
        tolerance: float,
        norm_error: float = float("nan"),
        skipped: int = 0,
    ) -> None:
        self.suite = suite
        self.seed = seed
        self.error = error
        self.tolerance = tolerance
        self.norm_error = norm_error
        self.skipped = skipped

    @property
    def passed(self) -> bool:
        return bool(np.isfinite(self.error) and self.error < self.tolerance)

    def __str__(self) -> str:
        return "CheckResult[{} seed={} error={:.3g} norm={:.3g} skipped={} {}]".format(
            self.suite,
            self.seed,
            self.error,
            self.norm_error,
            self.skipped,
            "ok" if self.passed else "FAILED",
        )


def relative_error(analytic: np.ndarray, numeric: np.ndarray, floor: float = GRAD_FLOOR) -> float:
    """
    Worst entry of |a - n| / max(|a|, |n|, floor)
    """
    analytic = np.ravel(analytic)
    numeric = np.ravel(numeric)
    if analytic.size == 0:
        return 0.0
    scale = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), floor)
    return float(np.max(np.abs(analytic - numeric) / scale))


def norm_relative_error(analytic: np.ndarray, numeric: np.ndarray, floor: float = GRAD_FLOOR) -> float:
    analytic = np.ravel(analytic)
    numeric = np.ravel(numeric)
    scale = max(np.linalg.norm(analytic) + np.linalg.norm(numeric), floor)
    return float(np.linalg.norm(analytic - numeric) / scale)


def numeric_grad(
    loss: Loss,
    tensor: Tensor,
    eps: float = 1e-4,
    entries: Optional[Sequence[Tuple[int, ...]]] = None,
) -> np.ndarray:
    """
    Central differences of `loss` with respect to the entries of `tensor`
    (all of them, or the given multi-indices), perturbing its data in place.
    """
    data = tensor.data
    indices = list(np.ndindex(data.shape)) if entries is None else list(entries)
    grads = np.zeros(len(indices))
    with no_grad():
        for k, index in enumerate(indices):
            saved = data[index]
            data[index] = saved + eps
            upper = loss().item()
            data[index] = saved - eps
            lower = loss().item()
            data[index] = saved
            grads[k] = (upper - lower) / (2.0 * eps)
    return grads if entries is not None else grads.reshape(data.shape)


def check(
    suite: str,
    loss: Loss,
    inputs: Sequence[Tensor],
    seed: int = 0,
    tolerance: float = PRIMITIVE_TOLERANCE,
    eps: float = 1e-4,
    samples: Optional[int] = None,
    kink_guard: bool = False,
) -> CheckResult:
    """
    Compares backward against central differences for every input tensor,
    or for `samples` random entries of each when given. The reported error
    is the worst entry over all inputs.

    With `kink_guard`, every entry is differenced again at eps/2. Entries
    where the two estimates disagree lie within eps of a ReLU or clamp kink;
    they are left out and counted in `skipped`.
    """
    for tensor in inputs:
        tensor.grad = None
    loss().backward()

    rng = np.random.default_rng(seed)
    worst = 0.0
    worst_norm = 0.0
    skipped = 0
    for tensor in inputs:
        analytic = tensor.grad if tensor.grad is not None else np.zeros_like(tensor.data)
        if samples is None:
            entries = None
        else:
            flat = rng.choice(tensor.size, size=min(samples, tensor.size), replace=False)
            entries = [np.unravel_index(int(i), tensor.shape) for i in flat]
            analytic = np.array([analytic[e] for e in entries])
        analytic = np.ravel(analytic)
        numeric = np.ravel(numeric_grad(loss, tensor, eps, entries))

        if kink_guard:
            fine = np.ravel(numeric_grad(loss, tensor, eps / 2.0, entries))
            limit = KINK_AGREEMENT * tolerance * np.maximum(np.abs(fine), GRAD_FLOOR)
            kink = np.abs(numeric - fine) > limit
            skipped += int(np.count_nonzero(kink))
            analytic, numeric = analytic[~kink], fine[~kink]

        largest = float(np.max(np.abs(numeric))) if numeric.size else 0.0
        floor = max(GRAD_FLOOR, FLOOR_FRACTION * largest) if np.isfinite(largest) else GRAD_FLOOR
        error = relative_error(analytic, numeric, floor)
        worst = max(worst, error) if np.isfinite(error) else float("inf")
        worst_norm = max(worst_norm, norm_relative_error(analytic, numeric))
    return CheckResult(suite, seed, worst, tolerance, worst_norm, skipped)


def _leaf(rng: np.random.Generator, *shape: int, low: float = -1.0, high: float = 1.0) -> Tensor:
    return Tensor(rng.uniform(low, high, size=shape), requires_grad=True, dtype=np.float64)


def _away_from_zero(rng: np.random.Generator, *shape: int) -> Tensor:
    magnitude = rng.uniform(0.1, 1.0, size=shape)
    sign = np.where(rng.random(shape) < 0.5, -1.0, 1.0)
    return Tensor(sign * magnitude, requires_grad=True, dtype=np.float64)


def _weighted(rng: np.random.Generator, shape: Tuple[int, ...]) -> Callable[[Tensor], Tensor]:
    """
    A random linear functional, so every output entry reaches the loss
    """
    weights = Tensor(rng.standard_normal(shape))
    return lambda out: (out * weights).sum()


def suite_arithmetic(seed: int) -> CheckResult:
    rng = np.random.default_rng(seed)
    a = _leaf(rng, 3, 4)
    b = _leaf(rng, 4, 2)
    c = _leaf(rng, 3, 4, low=0.5, high=2.0)
    bias = _leaf(rng, 4)
    reduce = _weighted(rng, (3, 2))

    def loss() -> Tensor:
        x = (a * c + bias) / c - a ** 2 + (-a).exp() * 0.5
        return reduce(x @ b) + x[1:, ::2].sum() + x.reshape(12).transpose(0).mean() * 3.0

    return check("arithmetic", loss, [a, b, c, bias], seed)


def suite_conv2d(seed: int) -> CheckResult:
    rng = np.random.default_rng(seed)
    stride = int(rng.integers(1, 3))
    padding = int(rng.integers(0, 2))
    x = _leaf(rng, 2, 3, 6, 6)
    w = _leaf(rng, 4, 3, 3, 3)
    b = _leaf(rng, 4)
    size = (6 + 2 * padding - 3) // stride + 1
    target = rng.standard_normal((2, 4, size, size))

    def loss() -> Tensor:
        return mse(conv2d(x, w, b, stride, padding), target)

    return check("conv2d", loss, [x, w, b], seed)


def suite_conv_transpose2d(seed: int) -> CheckResult:
    rng = np.random.default_rng(seed)
    stride = int(rng.integers(1, 3))
    padding = int(rng.integers(0, 2))
    size = int(rng.choice([3, 4]))
    x = _leaf(rng, 2, 3, 4, 4)
    w = _leaf(rng, 3, 2, size, size)
    b = _leaf(rng, 2)
    out = (4 - 1) * stride - 2 * padding + size
    reduce = _weighted(rng, (2, 2, out, out))

    def loss() -> Tensor:
        return reduce(conv_transpose2d(x, w, b, stride, padding))

    return check("conv_transpose2d", loss, [x, w, b], seed)


def suite_depthwise_advect(seed: int) -> CheckResult:
    rng = np.random.default_rng(seed)
    frame = _leaf(rng, 2, 3, 6, 6)
    kernels = _leaf(rng, 2, 4, 3, 3)
    reduce = _weighted(rng, (2, 4, 3, 6, 6))

    def loss() -> Tensor:
        return reduce(depthwise_advect(frame, kernels))

    return check("depthwise_advect", loss, [frame, kernels], seed)


def suite_softmax(seed: int) -> CheckResult:
    rng = np.random.default_rng(seed)
    logits = _leaf(rng, 2, 3, 4, 4, low=-3.0, high=3.0)
    spatial = _weighted(rng, (2, 3, 4, 4))
    channel = _weighted(rng, (2, 3, 4, 4))

    def loss() -> Tensor:
        return spatial(softmax(logits, axes=(2, 3))) + channel(softmax(logits, axes=1))

    return check("softmax", loss, [logits], seed)


def suite_activations(seed: int) -> CheckResult:
    rng = np.random.default_rng(seed)
    x = _away_from_zero(rng, 3, 5)
    y = _leaf(rng, 3, 5, low=-0.9, high=0.9)
    reduce = _weighted(rng, (3, 5))

    def loss() -> Tensor:
        return reduce(relu(x) + sigmoid(x) * tanh(y) + clamp(y, -1.0, 1.0))

    return check("activations", loss, [x, y], seed)


def suite_structure(seed: int) -> CheckResult:
    rng = np.random.default_rng(seed)
    a = _leaf(rng, 2, 3, 4, 4)
    b = _leaf(rng, 2, 2, 4, 4)
    v = _leaf(rng, 2, 5)
    reduce = _weighted(rng, (2, 10, 4, 4))
    target = rng.standard_normal((2, 10, 4, 4))

    def loss() -> Tensor:
        joined = concat([a, b, tile_spatial(v, 4, 4)], axis=1)
        return reduce(joined) + mse(joined, target)

    return check("concat_tile_mse", loss, [a, b, v], seed)


def suite_linear(seed: int) -> CheckResult:
    rng = np.random.default_rng(seed)
    with default_dtype(np.float64):
        layer = Linear(6, 4, rng)
    x = _leaf(rng, 3, 6)
    reduce = _weighted(rng, (3, 4))

    def loss() -> Tensor:
        return reduce(layer(x))

    return check("linear", loss, [x] + layer.parameters(), seed)


def suite_convlstm(seed: int) -> CheckResult:
    rng = np.random.default_rng(seed)
    x = _leaf(rng, 2, 3, 5, 5)
    hidden = _leaf(rng, 2, 4, 5, 5)
    cell = _leaf(rng, 2, 4, 5, 5)
    w = _leaf(rng, 16, 7, 3, 3, low=-0.3, high=0.3)
    b = _leaf(rng, 16)
    reduce_h = _weighted(rng, (2, 4, 5, 5))
    reduce_c = _weighted(rng, (2, 4, 5, 5))

    def loss() -> Tensor:
        h, state = convlstm_cell(x, ConvLSTMState(hidden, cell), w, b)
        return reduce_h(h) + reduce_c(state.cell)

    return check("convlstm_cell", loss, [x, hidden, cell, w, b], seed)


def suite_cdna(seed: int) -> CheckResult:
    """
    Dense kernel prediction, advection and mask compositing of one frame
    """
    rng = np.random.default_rng(seed)
    config = ModelConfig(n_kernels=3, kernel_size=3, grid=2)
    with default_dtype(np.float64):
        head = CdnaHead(config, rng)
    fused = _leaf(rng, 1, config.fusion_channels, 2, 2)
    # interior values keep the final clamp inactive
    frame = _leaf(rng, 1, 3, 6, 6, low=0.2, high=0.8)
    mask_logits = _leaf(rng, 1, config.mask_channels, 6, 6)
    target = rng.uniform(0.0, 1.0, size=(1, 3, 6, 6))

    def loss() -> Tensor:
        kernels = head(FeatureMap(fused))
        masks = softmax(mask_logits, axes=1)
        return mse(compose(apply_cdna(frame, kernels), masks), target)

    return check("cdna_compose", loss, [fused, frame, mask_logits] + head.parameters(), seed)


def suite_aux_decoder(seed: int) -> CheckResult:
    rng = np.random.default_rng(seed)
    config = ModelConfig(decoder_channels=4)
    frame = FrameConfig.default()
    modality = Modality.ALL[1 + seed % 3]
    with default_dtype(np.float64):
        decoder = AuxDecoder(modality, config, frame, rng)
    fused = _leaf(rng, 1, config.fusion_channels, config.grid, config.grid)
    target = rng.standard_normal((1,) + frame.frame_shape(modality))

    def loss() -> Tensor:
        return mse(decoder(FeatureMap(fused)), target)

    return check(
        f"aux_decoder_{modality}", loss, [fused] + decoder.parameters(), seed, samples=256, kink_guard=True
    )


def toy_sample(frame: FrameConfig, T: int, seed: int) -> SampleQuadruple:
    rng = np.random.default_rng(seed)
    shapes = {m: (T,) + frame.frame_shape(m) for m in Modality.ALL}
    return SampleQuadruple(
        vision=rng.uniform(0.2, 0.8, size=shapes[Modality.VISION]),
        haptic=rng.standard_normal(shapes[Modality.HAPTIC]),
        audio=rng.standard_normal(shapes[Modality.AUDIO]),
        vibro=rng.standard_normal(shapes[Modality.VIBRO]),
        behavior="push",
    )


def suite_pipeline(seed: int, samples: int = 2) -> CheckResult:
    """
    A three-frame rollout of the full predictor with every modality and
    every auxiliary head: two predicted steps, so the recurrent paths
    carry gradient too. Random entries of every parameter are checked.
    """
    frame = FrameConfig.default()
    with default_dtype(np.float64):
        model = MultimodalPredictor(ModelConfig(), ModalityMask.all(aux_training=True), frame, seed)
    sample = toy_sample(frame, 3, seed)
    weights = LossWeights(1.0, 1.0, 1.0, 1.0)

    def loss() -> Tensor:
        result = rollout(model, sample, K=1, teacher_forcing=False)
        return weighted_sum(loss_terms(result, sample), weights)

    return check(
        "pipeline",
        loss,
        model.parameters(),
        seed,
        tolerance=PIPELINE_TOLERANCE,
        eps=1e-6,
        samples=samples,
        kink_guard=True,
    )


PRIMITIVE_SUITES: Dict[str, Callable[[int], CheckResult]] = {
    "arithmetic": suite_arithmetic,
    "conv2d": suite_conv2d,
    "conv_transpose2d": suite_conv_transpose2d,
    "depthwise_advect": suite_depthwise_advect,
    "softmax": suite_softmax,
    "activations": suite_activations,
    "structure": suite_structure,
    "linear": suite_linear,
    "convlstm": suite_convlstm,
    "cdna": suite_cdna,
    "aux_decoder": suite_aux_decoder,
}


def run_gradcheck(
    seeds: int = 20,
    pipeline_seeds: int = 20,
    suites: Optional[Sequence[str]] = None,
) -> List[CheckResult]:
    """
    Runs every primitive suite over `seeds` seeds and the full pipeline over
    `pipeline_seeds` seeds, all at float64.
    """
    logger = logging.getLogger("mmforesight.py")
    names = list(suites) if suites is not None else list(PRIMITIVE_SUITES) + ["pipeline"]
    results = []
    with default_dtype(np.float64):
        for name in names:
            if name == "pipeline":
                runs = [suite_pipeline(seed) for seed in range(pipeline_seeds)]
            else:
                runs = [PRIMITIVE_SUITES[name](seed) for seed in range(seeds)]
            failed = [r for r in runs if not r.passed]
            worst = max(r.error for r in runs)
            norm = max(r.norm_error for r in runs)
            skipped = sum(r.skipped for r in runs)
            summary = f"worst {worst:.3g} (norm {norm:.3g}, {skipped} entries at kinks)"
            if failed:
                logger.error(f"Gradient check {name}: {len(failed)} of {len(runs)} seeds failed, {summary}")
            else:
                logger.info(f"Gradient check {name}: {len(runs)} seeds, {summary}")
            results += runs
    return results
