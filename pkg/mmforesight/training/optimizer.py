from typing import List, Optional, Sequence

import numpy as np

from ..exceptions import ContractError
from ..tensor import Parameter


class AdamState:
    def __init__(self, params: Sequence[Parameter]) -> None:
        self.m: List[np.ndarray] = [np.zeros_like(p.data) for p in params]
        self.v: List[np.ndarray] = [np.zeros_like(p.data) for p in params]
        self.step = 0

    def __str__(self) -> str:
        return "AdamState[step={}, buffers={}]".format(self.step, len(self.m))


def adam_step(
    params: Sequence[Parameter],
    grads: Sequence[Optional[np.ndarray]],
    state: AdamState,
    lr: float = 1e-3,
    beta1: float = 0.9,
    beta2: float = 0.999,
    eps: float = 1e-8,
) -> AdamState:
    """
    One bias-corrected Adam update, applied to the parameters in place
    """
    if len(params) != len(grads) or len(params) != len(state.m):
        raise ContractError("Parameters, gradients and moments disagree in count")
    for index, grad in enumerate(grads):
        if grad is None:
            raise ContractError(f"Parameter {index} has no gradient")

    state.step += 1
    correction1 = 1.0 - beta1**state.step
    correction2 = 1.0 - beta2**state.step
    for index, (param, grad) in enumerate(zip(params, grads)):
        state.m[index] = beta1 * state.m[index] + (1.0 - beta1) * grad
        state.v[index] = beta2 * state.v[index] + (1.0 - beta2) * grad * grad
        m_hat = state.m[index] / correction1
        v_hat = state.v[index] / correction2
        param.data -= (lr * m_hat / (np.sqrt(v_hat) + eps)).astype(param.dtype)
    return state


def global_norm(grads: Sequence[np.ndarray]) -> float:
    return float(np.sqrt(sum(float(np.sum(np.square(g, dtype=np.float64))) for g in grads)))


def clip_by_global_norm(grads: Sequence[np.ndarray], max_norm: float) -> List[np.ndarray]:
    norm = global_norm(grads)
    if norm <= max_norm or norm == 0.0:
        return list(grads)
    scale = max_norm / norm
    return [g * scale for g in grads]


class Adam:
    """
    Holds the parameter list and moment buffers of a model. Parameters that
    received no gradient this step (a head no loss term reached) are treated
    as having a zero gradient.
    """

    def __init__(
        self,
        params: Sequence[Parameter],
        lr: float = 1e-3,
        beta1: float = 0.9,
        beta2: float = 0.999,
        eps: float = 1e-8,
        clip_norm: Optional[float] = 5.0,
    ) -> None:
        self.params = list(params)
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.clip_norm = clip_norm
        self.state = AdamState(self.params)

    def zero_grad(self) -> None:
        for param in self.params:
            param.zero_grad()

    def step(self) -> float:
        """
        :return: the global gradient norm before clipping
        """
        grads = [p.grad if p.grad is not None else np.zeros_like(p.data) for p in self.params]
        norm = global_norm(grads)
        if self.clip_norm is not None:
            grads = clip_by_global_norm(grads, self.clip_norm)
        adam_step(self.params, grads, self.state, self.lr, self.beta1, self.beta2, self.eps)
        return norm

    def __str__(self) -> str:
        return "Adam[lr={}, clip_norm={}, {}]".format(self.lr, self.clip_norm, self.state)
