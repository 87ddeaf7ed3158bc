from .adam import ADAM_M_PREFIX, ADAM_STEP_KEY, ADAM_V_PREFIX, AdamConfig, AdamState, adam_step
from .checkpoint import load_checkpoint, save_checkpoint
from .tensor import (
    Tensor,
    add,
    as_tensor,
    backward,
    broadcast_scalar_channels,
    channel,
    concat_channels,
    conv3d,
    leaky_relu,
    masked_mse,
    mul,
    sigmoid,
    take_row,
    upsample_nearest2,
    zero_grads,
)

__all__ = [
    "ADAM_M_PREFIX",
    "ADAM_STEP_KEY",
    "ADAM_V_PREFIX",
    "AdamConfig",
    "AdamState",
    "Tensor",
    "adam_step",
    "add",
    "as_tensor",
    "backward",
    "broadcast_scalar_channels",
    "channel",
    "concat_channels",
    "conv3d",
    "leaky_relu",
    "load_checkpoint",
    "masked_mse",
    "mul",
    "save_checkpoint",
    "sigmoid",
    "take_row",
    "upsample_nearest2",
    "zero_grads",
]
