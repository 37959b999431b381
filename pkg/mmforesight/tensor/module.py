from collections import OrderedDict
from typing import Dict, Iterator, List, Tuple

import numpy as np

from ..exceptions import ConfigError, DimensionError
from .tensor import Tensor, get_default_dtype


class Parameter(Tensor):
    def __init__(self, data, dtype=None) -> None:
        super().__init__(
            np.array(data, dtype=dtype or get_default_dtype()), requires_grad=True
        )

    def __str__(self) -> str:
        return "Parameter[shape={}, dtype={}]".format(self.shape, self.dtype)


def uniform_fan_in(
    rng: np.random.Generator, shape: Tuple[int, ...], fan_in: int
) -> np.ndarray:
    bound = np.sqrt(1.0 / fan_in)
    return rng.uniform(-bound, bound, size=shape)


class Module:
    """
    Container of named parameters and sub-modules. Attribute order defines
    the parameter order, which in turn defines the checkpoint layout.
    """

    def forward(self, *args, **kwargs):
        raise NotImplementedError

    def __call__(self, *args, **kwargs):
        return self.forward(*args, **kwargs)

    def named_parameters(self, prefix: str = "") -> Iterator[Tuple[str, Parameter]]:
        for name, value in vars(self).items():
            if name.startswith("_"):
                continue
            full = f"{prefix}{name}"
            if isinstance(value, Parameter):
                yield full, value
            elif isinstance(value, Module):
                yield from value.named_parameters(full + ".")
            elif isinstance(value, (list, tuple)):
                for index, item in enumerate(value):
                    if isinstance(item, Module):
                        yield from item.named_parameters(f"{full}.{index}.")
            elif isinstance(value, dict):
                for key in sorted(value):
                    if isinstance(value[key], Module):
                        yield from value[key].named_parameters(f"{full}.{key}.")

    def parameters(self) -> List[Parameter]:
        return [parameter for _, parameter in self.named_parameters()]

    def num_parameters(self) -> int:
        return sum(parameter.size for parameter in self.parameters())

    def zero_grad(self) -> None:
        for parameter in self.parameters():
            parameter.zero_grad()

    def fill_(self, value: float = 0.0) -> "Module":
        for parameter in self.parameters():
            parameter.data[...] = value
        return self

    def state_dict(self) -> Dict[str, np.ndarray]:
        return OrderedDict(
            (name, parameter.data.copy()) for name, parameter in self.named_parameters()
        )

    def load_state_dict(self, state: Dict[str, np.ndarray], strict: bool = True) -> None:
        own = dict(self.named_parameters())
        missing = [name for name in own if name not in state]
        unexpected = [name for name in state if name not in own]
        if strict and (missing or unexpected):
            raise ConfigError(
                f"State does not match the module: missing={missing}, unexpected={unexpected}"
            )

        for name, parameter in own.items():
            if name not in state:
                continue
            value = np.asarray(state[name])
            if value.shape != parameter.shape:
                raise DimensionError(
                    f"{name} has shape {parameter.shape}, state has {value.shape}"
                )
            parameter.data[...] = value

    def astype(self, dtype) -> "Module":
        for parameter in self.parameters():
            parameter.data = parameter.data.astype(dtype)
        return self
