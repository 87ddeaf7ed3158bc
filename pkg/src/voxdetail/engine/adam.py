"""Bias-corrected Adam over named parameter tensors."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import ShapeError
from .tensor import Tensor

ADAM_M_PREFIX = "adam.m/"
ADAM_V_PREFIX = "adam.v/"
ADAM_STEP_KEY = "adam.step"


@dataclass
class AdamConfig:
    lr: float = 1e-4
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8


@dataclass
class AdamState:
    """First/second moment accumulators plus the shared step counter."""

    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)
    step_count: int = 0

    @classmethod
    def for_params(cls, params: dict[str, Tensor]) -> "AdamState":
        return cls(
            m={k: np.zeros_like(p.data) for k, p in params.items()},
            v={k: np.zeros_like(p.data) for k, p in params.items()},
        )

    def state_tensors(self) -> dict[str, np.ndarray]:
        out = {ADAM_M_PREFIX + k: v for k, v in self.m.items()}
        out.update({ADAM_V_PREFIX + k: v for k, v in self.v.items()})
        out[ADAM_STEP_KEY] = np.array([self.step_count], np.float32)
        return out

    def load_state_tensors(self, tensors: dict[str, np.ndarray]) -> None:
        for key in self.m:
            self.m[key] = tensors[ADAM_M_PREFIX + key].copy()
            self.v[key] = tensors[ADAM_V_PREFIX + key].copy()
        self.step_count = int(tensors[ADAM_STEP_KEY][0])


def adam_step(params: dict[str, Tensor], state: AdamState, cfg: AdamConfig) -> None:
    """One update over all named params; missing gradients count as zero."""
    state.step_count += 1
    t = state.step_count
    c1 = 1.0 - cfg.beta1**t
    c2 = 1.0 - cfg.beta2**t
    for name, p in params.items():
        g = p.grad
        if g is None:
            g = np.zeros_like(p.data)
        elif g.shape != p.data.shape:
            raise ShapeError(f"grad shape {g.shape} != param shape {p.data.shape} for {name}")
        m = state.m[name]
        v = state.v[name]
        m *= cfg.beta1
        m += (1.0 - cfg.beta1) * g
        v *= cfg.beta2
        v += (1.0 - cfg.beta2) * np.square(g)
        update = (m / c1) / (np.sqrt(v / c2) + cfg.eps)
        p.data -= (cfg.lr * update).astype(np.float32)
