"""Generator and discriminator masks enforcing coarse-fine consistency.

The generator mask zeroes output voxels outside the (optionally dilated)
content region; the discriminator mask selects which half-resolution score
cells contribute to each loss term.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .errors import DimensionError, KindError
from .voxel import BINARY, VoxelGrid, dilate, upsample_nearest

STRICT = "strict"
LOOSE = "loose"


@dataclass(frozen=True)
class GeneratorMask:
    """Binary mask at output (4x) resolution; loose mode covers a 1-voxel dilation."""

    grid: VoxelGrid
    mode: str


@dataclass(frozen=True)
class DiscriminatorMask:
    """Binary mask at half the detailed resolution."""

    grid: VoxelGrid


def generator_mask(content: VoxelGrid, factor: int = 4, mode: str = LOOSE) -> GeneratorMask:
    """Upsampled content occupancy; loose mode dilates the content by 1 first."""
    if content.kind != BINARY:
        raise KindError("generator mask requires binary content")
    if mode == STRICT:
        grid = upsample_nearest(content, factor)
    elif mode == LOOSE:
        grid = upsample_nearest(dilate(content, 1) if content.values.any() else content, factor)
    else:
        raise ValueError(f"unknown generator mask mode {mode!r}")
    return GeneratorMask(grid, mode)


def discriminator_mask_real(detailed: VoxelGrid) -> DiscriminatorMask:
    """Half-res mask: cell (i,j,k) is on iff the centered 4^3 window holds a voxel.

    The window for cell i spans fine voxels [2i-1, 2i+2], clamped at borders.
    """
    if detailed.kind != BINARY:
        raise KindError("real discriminator mask requires a binary grid")
    if any(d % 2 for d in detailed.dims):
        raise DimensionError(f"detailed dims must be even, got {detailed.dims}")
    v = detailed.values
    padded = np.pad(v, 1, mode="constant")
    # window for half-res cell i starts at padded index 2i and spans 4 voxels
    win = sliding_window_view(padded, (4, 4, 4))[::2, ::2, ::2]
    mask = win.max(axis=(3, 4, 5))
    return DiscriminatorMask(VoxelGrid(mask, BINARY))


def discriminator_mask_fake(content: VoxelGrid) -> DiscriminatorMask:
    """Content occupancy upsampled to half the output resolution (factor 2)."""
    if content.kind != BINARY:
        raise KindError("fake discriminator mask requires binary content")
    return DiscriminatorMask(upsample_nearest(content, 2))


def mask_cache_name(inputs: VoxelGrid, tag: str) -> str:
    """Deterministic cache filename keyed by input content and mask flavor."""
    h = hashlib.sha256()
    h.update(np.asarray(inputs.dims, np.uint32).tobytes())
    h.update(inputs.values.tobytes())
    h.update(tag.encode())
    return f"mask_{tag}_{h.hexdigest()[:16]}.vxb"
