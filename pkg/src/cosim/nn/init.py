"""Parameter creation helpers."""

from __future__ import annotations

import numpy as np

from ..autodiff import Tensor, parameter


def uniform(rng: np.random.Generator, name: str, shape: tuple, fan_in: int) -> Tensor:
    bound = 1.0 / np.sqrt(fan_in)
    return parameter(rng.uniform(-bound, bound, size=shape), name)


def linear(rng, params: dict, prefix: str, d_in: int, d_out: int, bias: bool = True) -> None:
    params[f"{prefix}.w"] = uniform(rng, f"{prefix}.w", (d_in, d_out), d_in)
    if bias:
        params[f"{prefix}.b"] = uniform(rng, f"{prefix}.b", (1, d_out), d_in)
