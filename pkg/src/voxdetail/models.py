"""Style-conditioned upsampling generator, branched patch discriminator,
and the learned per-exemplar style codebook.

The generator upsamples a coarse occupancy grid by exactly 4x, with the
8-D style code injected (broadcast + concat) at every resolution level.
The discriminator scores overlapping local patches at half the input
resolution with an 18^3 receptive field, and splits into N+1 output
branches: channel 0 is the all-styles branch, channel 1+s judges style s.
"""

from __future__ import annotations

import numpy as np

from . import engine as eng
from .errors import DimensionError, FormatError, ShapeError
from .masks import GeneratorMask
from .voxel import CONTINUOUS, VoxelGrid

CODE_DIM = 8
MIN_DISCRIMINATOR_DIM = 18

_GEN_CHANNELS = (32, 64, 64, 32)
_DIS_CHANNELS = (32, 64, 128)


class StyleCodebook:
    """One learnable 8-D code per detailed exemplar."""

    def __init__(self, ids: list[str], codes: np.ndarray):
        if codes.shape != (len(ids), CODE_DIM):
            raise ShapeError(f"codebook shape {codes.shape} != ({len(ids)}, {CODE_DIM})")
        if len(set(ids)) != len(ids):
            raise ValueError("exemplar ids must be unique")
        self.ids = list(ids)
        self.codes = eng.Tensor(codes, requires_grad=True)

    def __len__(self):
        return len(self.ids)

    def index_of(self, exemplar_id: str) -> int:
        return self.ids.index(exemplar_id)

    def code(self, idx: int) -> eng.Tensor:
        return eng.take_row(self.codes, idx)

    def code_value(self, idx: int) -> np.ndarray:
        return self.codes.data[idx].copy()

    def named_parameters(self) -> dict[str, eng.Tensor]:
        return {"style_codes": self.codes}

    def export_tensors(self) -> dict[str, np.ndarray]:
        return {f"style_code/{sid}": self.codes.data[i].copy() for i, sid in enumerate(self.ids)}

    @classmethod
    def from_tensors(cls, tensors: dict[str, np.ndarray]) -> "StyleCodebook":
        ids = sorted(k.split("/", 1)[1] for k in tensors if k.startswith("style_code/"))
        if not ids:
            raise FormatError("checkpoint holds no style codes")
        codes = np.stack([tensors[f"style_code/{sid}"] for sid in ids])
        return cls(ids, codes)


class Generator:
    """4x refinement network; kernel 5 normally, 3 for 32^3-input variants."""

    def __init__(self, params: dict[str, eng.Tensor], kernel_size: int = 5):
        if kernel_size not in (3, 5):
            raise ShapeError(f"generator kernel size must be 3 or 5, got {kernel_size}")
        self.kernel_size = kernel_size
        self.params = params

    def named_parameters(self) -> dict[str, eng.Tensor]:
        return self.params

    def forward_tape(self, content: np.ndarray, code: eng.Tensor) -> eng.Tensor:
        """Raw occupancy field in (0,1) at 4x resolution, on the tape."""
        if content.ndim != 3:
            raise ShapeError(f"content must be [D,H,W], got {content.shape}")
        if min(content.shape) < 4:
            raise DimensionError(f"content dims must be >= 4, got {content.shape}")
        if code.shape != (CODE_DIM,):
            raise ShapeError(f"style code must have {CODE_DIM} entries, got {code.shape}")
        p = self.params
        pad = self.kernel_size // 2
        x = eng.Tensor(content[None].astype(np.float32))
        h = eng.concat_channels(x, eng.broadcast_scalar_channels(code, content.shape))
        h = eng.leaky_relu(eng.conv3d(h, p["gen/conv1.w"], p["gen/conv1.b"], pad=pad))
        h = eng.leaky_relu(eng.conv3d(h, p["gen/conv2.w"], p["gen/conv2.b"], pad=pad))
        h = eng.upsample_nearest2(h)
        h = eng.concat_channels(h, eng.broadcast_scalar_channels(code, h.shape[1:]))
        h = eng.leaky_relu(eng.conv3d(h, p["gen/conv3.w"], p["gen/conv3.b"], pad=pad))
        h = eng.upsample_nearest2(h)
        h = eng.concat_channels(h, eng.broadcast_scalar_channels(code, h.shape[1:]))
        h = eng.leaky_relu(eng.conv3d(h, p["gen/conv4.w"], p["gen/conv4.b"], pad=pad))
        return eng.sigmoid(eng.conv3d(h, p["gen/conv5.w"], p["gen/conv5.b"], pad=0))


class Discriminator:
    """Patch scorer: [1,D,H,W] -> [N+1, D/2, H/2, W/2], scores in (0,1)."""

    def __init__(self, params: dict[str, eng.Tensor], n_styles: int):
        self.n_styles = n_styles
        self.params = params

    def named_parameters(self) -> dict[str, eng.Tensor]:
        return self.params

    def forward_tape(self, field: eng.Tensor) -> eng.Tensor:
        if field.data.ndim != 4 or field.shape[0] != 1:
            raise ShapeError(f"discriminator wants [1,D,H,W], got {field.shape}")
        dims = field.shape[1:]
        if any(d % 2 for d in dims) or min(dims) < MIN_DISCRIMINATOR_DIM:
            raise DimensionError(
                f"discriminator input dims must be even and >= {MIN_DISCRIMINATOR_DIM}, got {dims}"
            )
        p = self.params
        h = eng.leaky_relu(eng.conv3d(field, p["dis/conv1.w"], p["dis/conv1.b"], stride=2, pad=1))
        h = eng.leaky_relu(eng.conv3d(h, p["dis/conv2.w"], p["dis/conv2.b"], pad=1))
        h = eng.leaky_relu(eng.conv3d(h, p["dis/conv3.w"], p["dis/conv3.b"], pad=1))
        return eng.sigmoid(eng.conv3d(h, p["dis/conv4.w"], p["dis/conv4.b"], pad=(1, 2)))


def _conv_init(rng, cout, cin, k) -> np.ndarray:
    return rng.normal(0.0, 0.02, size=(cout, cin, k, k, k)).astype(np.float32)


def init_parameters(
    seed: int, style_ids: list[str], kernel_size: int = 5
) -> tuple[Generator, Discriminator, StyleCodebook]:
    """Reproducible initialization: same seed gives identical parameters."""
    rng = np.random.default_rng(seed)
    k = kernel_size
    c1, c2, c3, c4 = _GEN_CHANNELS
    gen_params: dict[str, eng.Tensor] = {}
    gen_spec = [
        ("gen/conv1", 1 + CODE_DIM, c1, k),
        ("gen/conv2", c1, c2, k),
        ("gen/conv3", c2 + CODE_DIM, c3, k),
        ("gen/conv4", c3 + CODE_DIM, c4, k),
        ("gen/conv5", c4, 1, 1),
    ]
    for name, cin, cout, kk in gen_spec:
        gen_params[name + ".w"] = eng.Tensor(_conv_init(rng, cout, cin, kk), requires_grad=True)
        gen_params[name + ".b"] = eng.Tensor(np.zeros(cout, np.float32), requires_grad=True)

    n = len(style_ids)
    d1, d2, d3 = _DIS_CHANNELS
    dis_spec = [
        ("dis/conv1", 1, d1, 4),
        ("dis/conv2", d1, d2, 3),
        ("dis/conv3", d2, d3, 3),
        ("dis/conv4", d3, n + 1, 4),
    ]
    dis_params: dict[str, eng.Tensor] = {}
    for name, cin, cout, kk in dis_spec:
        dis_params[name + ".w"] = eng.Tensor(_conv_init(rng, cout, cin, kk), requires_grad=True)
        dis_params[name + ".b"] = eng.Tensor(np.zeros(cout, np.float32), requires_grad=True)

    codes = rng.normal(0.0, 0.1, size=(n, CODE_DIM)).astype(np.float32)
    return (
        Generator(gen_params, kernel_size),
        Discriminator(dis_params, n),
        StyleCodebook(style_ids, codes),
    )


def load_into(params: dict[str, eng.Tensor], tensors: dict[str, np.ndarray], prefix: str) -> None:
    """Copy checkpoint tensors into an existing parameter dict, strictly."""
    relevant = {k: v for k, v in tensors.items() if k.startswith(prefix)}
    for name in relevant:
        if name not in params:
            raise FormatError(f"unknown tensor name {name!r} in checkpoint")
    for name, p in params.items():
        if name not in relevant:
            raise FormatError(f"checkpoint is missing tensor {name!r}")
        if relevant[name].shape != p.data.shape:
            raise FormatError(
                f"tensor {name!r} shape {relevant[name].shape} != expected {p.data.shape}"
            )
        p.data = relevant[name].astype(np.float32).copy()


# ---------------------------------------------------------------------------
# Grid-level entry points


def generator_forward(gen: Generator, content: VoxelGrid, code: np.ndarray) -> VoxelGrid:
    """Raw (unmasked) refinement of a coarse grid under one style code."""
    out = gen.forward_tape(content.values.astype(np.float32), eng.Tensor(code))
    return VoxelGrid(out.data[0], CONTINUOUS)


def apply_generator_mask(raw: VoxelGrid, mask: GeneratorMask) -> VoxelGrid:
    if raw.dims != mask.grid.dims:
        raise DimensionError(f"mask dims {mask.grid.dims} != field dims {raw.dims}")
    return VoxelGrid(raw.values * mask.grid.values, CONTINUOUS)


def discriminator_forward(dis: Discriminator, field: VoxelGrid) -> np.ndarray:
    """Score field [N+1, D/2, H/2, W/2] for a continuous occupancy grid."""
    out = dis.forward_tape(eng.Tensor(field.values.astype(np.float32)[None]))
    return out.data
