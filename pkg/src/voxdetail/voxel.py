"""Voxel grid data model, bit-exact IO, and grid-level preprocessing.

Grids are indexed [x, y, z]. On disk the flattened order is x-fastest
(Fortran ravel of the array), which pins the bit-exact layout of the
native VXB1 format.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy import ndimage

from .errors import (
    DimensionError,
    EmptyShapeError,
    FormatError,
    KindError,
    ParameterError,
)

BINARY = "binary"
CONTINUOUS = "continuous"

_VXB1_MAGIC = b"VXB1"
_VXB1_HEADER = struct.Struct("<4sIIIB3x")  # magic, dx, dy, dz, encoding, pad -> 20 bytes


@dataclass(frozen=True)
class VoxelGrid:
    """Dense scalar field over a 3-D lattice.

    values: uint8 in {0,1} for kind="binary", float32 in [0,1] for
    kind="continuous"; shape (dx, dy, dz).
    """

    values: np.ndarray
    kind: str = BINARY

    def __post_init__(self):
        v = self.values
        if v.ndim != 3 or min(v.shape) < 1:
            raise DimensionError(f"grid needs three positive dims, got {v.shape}")
        if self.kind == BINARY:
            if v.dtype != np.uint8:
                object.__setattr__(self, "values", v.astype(np.uint8))
            if not np.isin(self.values, (0, 1)).all():
                raise KindError("binary grid has values outside {0, 1}")
        elif self.kind == CONTINUOUS:
            if v.dtype != np.float32:
                object.__setattr__(self, "values", v.astype(np.float32))
            if self.values.min() < 0.0 or self.values.max() > 1.0:
                raise KindError("continuous grid has values outside [0, 1]")
        else:
            raise KindError(f"unknown grid kind {self.kind!r}")
        self.values.setflags(write=False)

    @property
    def dims(self) -> tuple[int, int, int]:
        return self.values.shape

    def is_empty(self) -> bool:
        return not bool(self.values.any())

    def occupancy(self) -> np.ndarray:
        """Binary occupancy view; continuous grids threshold at 0.5."""
        if self.kind == BINARY:
            return self.values
        return (self.values > 0.5).astype(np.uint8)

    def as_continuous(self) -> "VoxelGrid":
        if self.kind == CONTINUOUS:
            return self
        return VoxelGrid(self.values.astype(np.float32), CONTINUOUS)


@dataclass(frozen=True)
class CropRegion:
    """Axis-aligned box; high-res regions are low-res regions scaled exactly."""

    origin: tuple[int, int, int]
    extent: tuple[int, int, int]
    scale_factor: int = 1

    def __post_init__(self):
        if min(self.extent) < 1 or min(self.origin) < 0 or self.scale_factor < 1:
            raise ParameterError(f"bad crop region {self}")

    def scaled(self, factor: int) -> "CropRegion":
        return CropRegion(
            tuple(o * factor for o in self.origin),
            tuple(e * factor for e in self.extent),
            self.scale_factor * factor,
        )

    def slices(self) -> tuple[slice, slice, slice]:
        return tuple(slice(o, o + e) for o, e in zip(self.origin, self.extent))


def crop(grid: VoxelGrid, region: CropRegion) -> VoxelGrid:
    """Extract the subgrid covered by `region`."""
    for o, e, d in zip(region.origin, region.extent, grid.dims):
        if o + e > d:
            raise DimensionError(f"crop region {region} exceeds grid dims {grid.dims}")
    return VoxelGrid(grid.values[region.slices()].copy(), grid.kind)


def paste(grid: VoxelGrid, full_dims, origin) -> VoxelGrid:
    """Place a (cropped) grid into an otherwise-empty canvas of `full_dims`."""
    for o, e, d in zip(origin, grid.dims, full_dims):
        if o < 0 or o + e > d:
            raise DimensionError(f"cannot paste {grid.dims} at {origin} into {full_dims}")
    canvas = np.zeros(full_dims, grid.values.dtype)
    canvas[tuple(slice(o, o + e) for o, e in zip(origin, grid.dims))] = grid.values
    return VoxelGrid(canvas, grid.kind)


# ---------------------------------------------------------------------------
# IO


def save_voxels(grid: VoxelGrid, path) -> None:
    """Write a grid in the native VXB1 format (bit-exact round trip)."""
    dx, dy, dz = grid.dims
    flat = grid.values.ravel(order="F")  # x fastest
    if grid.kind == BINARY:
        enc = 0
        payload = np.packbits(flat, bitorder="little").tobytes()
    else:
        enc = 1
        payload = flat.astype("<f4").tobytes()
    with open(path, "wb") as f:
        f.write(_VXB1_HEADER.pack(_VXB1_MAGIC, dx, dy, dz, enc))
        f.write(payload)


def load_voxels(path) -> VoxelGrid:
    """Load a VXB1 or binvox file (binvox is read-only ingestion)."""
    with open(path, "rb") as f:
        head = f.read(len(_VXB1_MAGIC))
        if head == _VXB1_MAGIC:
            rest = f.read(_VXB1_HEADER.size - len(_VXB1_MAGIC))
            if len(rest) < _VXB1_HEADER.size - len(_VXB1_MAGIC):
                raise FormatError("VXB1 header truncated")
            _, dx, dy, dz, enc = _VXB1_HEADER.unpack(head + rest)
            if min(dx, dy, dz) < 1:
                raise FormatError(f"VXB1 dims must be positive, got {(dx, dy, dz)}")
            n = dx * dy * dz
            payload = f.read()
            if enc == 0:
                need = (n + 7) // 8
                if len(payload) != need:
                    raise IOError(f"VXB1 payload: expected {need} bytes, got {len(payload)}")
                bits = np.unpackbits(np.frombuffer(payload, np.uint8), bitorder="little")[:n]
                return VoxelGrid(bits.reshape((dx, dy, dz), order="F"), BINARY)
            if enc == 1:
                if len(payload) != 4 * n:
                    raise IOError(f"VXB1 payload: expected {4 * n} bytes, got {len(payload)}")
                vals = np.frombuffer(payload, "<f4").astype(np.float32)
                return VoxelGrid(vals.reshape((dx, dy, dz), order="F"), CONTINUOUS)
            raise FormatError(f"VXB1 unknown encoding {enc}")
        if head == b"#bin":
            return _load_binvox(head + f.read())
    raise FormatError(f"unrecognized voxel file magic in {path}")


def _load_binvox(blob: bytes) -> VoxelGrid:
    """Parse a standard binvox blob: RLE payload, y fastest, then z, then x."""
    header, _, data = blob.partition(b"data\n")
    lines = header.split(b"\n")
    if not lines or not lines[0].startswith(b"#binvox"):
        raise FormatError("not a binvox file")
    dims = None
    for line in lines[1:]:
        if line.startswith(b"dim"):
            dims = [int(t) for t in line.split()[1:4]]
    if dims is None or len(dims) != 3 or min(dims) < 1:
        raise FormatError(f"binvox header missing valid dims, got {dims}")
    raw = np.frombuffer(data, np.uint8)
    if raw.size % 2 != 0:
        raise IOError("binvox RLE payload truncated")
    values, counts = raw[0::2], raw[1::2]
    flat = np.repeat(values, counts)
    n = dims[0] * dims[1] * dims[2]
    if flat.size != n:
        raise IOError(f"binvox payload holds {flat.size} voxels, dims say {n}")
    arr = flat.reshape((dims[0], dims[2], dims[1]))  # [x, z, y]
    return VoxelGrid(np.ascontiguousarray(arr.transpose(0, 2, 1)), BINARY)


# ---------------------------------------------------------------------------
# Resampling and morphology


def downsample_max(grid: VoxelGrid, factor: int) -> VoxelGrid:
    """Max-pool by `factor` along every axis."""
    if factor < 1:
        raise ParameterError("factor must be >= 1")
    dx, dy, dz = grid.dims
    if dx % factor or dy % factor or dz % factor:
        raise DimensionError(f"dims {grid.dims} not divisible by {factor}")
    v = grid.values.reshape(dx // factor, factor, dy // factor, factor, dz // factor, factor)
    return VoxelGrid(v.max(axis=(1, 3, 5)), grid.kind)


def upsample_nearest(grid: VoxelGrid, factor: int) -> VoxelGrid:
    """Nearest-neighbor upsampling: out[v] = in[v // factor]."""
    if factor < 1:
        raise ParameterError("factor must be >= 1")
    v = grid.values
    for axis in range(3):
        v = np.repeat(v, factor, axis=axis)
    return VoxelGrid(v, grid.kind)


def dilate(grid: VoxelGrid, radius: int) -> VoxelGrid:
    """Binary dilation with a (2r+1)^3 cube (Chebyshev ball, 26-connected)."""
    if grid.kind != BINARY:
        raise KindError("dilate requires a binary grid")
    if radius < 1:
        raise ParameterError("radius must be >= 1")
    out = ndimage.maximum_filter(grid.values, size=2 * radius + 1, mode="constant", cval=0)
    return VoxelGrid(out, BINARY)


def gaussian_blur(grid: VoxelGrid, sigma: float) -> VoxelGrid:
    """Separable Gaussian with truncation radius ceil(3*sigma), zero-padded.

    The kernel is normalized to sum 1; sigma=0 returns the input cast to
    continuous.
    """
    if sigma < 0:
        raise ParameterError("sigma must be >= 0")
    if sigma == 0:
        return grid.as_continuous()
    radius = int(np.ceil(3.0 * sigma))
    offsets = np.arange(-radius, radius + 1, dtype=np.float64)
    kernel = np.exp(-0.5 * (offsets / sigma) ** 2)
    kernel /= kernel.sum()
    out = grid.values.astype(np.float64)
    for axis in range(3):
        out = ndimage.correlate1d(out, kernel, axis=axis, mode="constant", cval=0.0)
    return VoxelGrid(np.clip(out, 0.0, 1.0).astype(np.float32), CONTINUOUS)


def occupied_bbox(grid: VoxelGrid) -> CropRegion:
    """Tight bounding box of occupied voxels."""
    occ = grid.occupancy()
    if not occ.any():
        raise EmptyShapeError("grid has no occupied voxels")
    coords = np.argwhere(occ)
    lo = coords.min(axis=0)
    hi = coords.max(axis=0) + 1
    return CropRegion(tuple(int(v) for v in lo), tuple(int(v) for v in hi - lo))


def crop_to_dilated_bbox(content: VoxelGrid, factor: int) -> tuple[CropRegion, CropRegion]:
    """Dilated-by-1 bounding box of the content, plus its scaled twin.

    Cropping is driven by the low-res content; the high-res region is the
    same box scaled by `factor` exactly.
    """
    box = occupied_bbox(content)
    lo = np.maximum(np.array(box.origin) - 1, 0)
    hi = np.minimum(np.array(box.origin) + np.array(box.extent) + 1, content.dims)
    low = CropRegion(tuple(int(v) for v in lo), tuple(int(v) for v in hi - lo))
    return low, low.scaled(factor)


def halve_symmetric(grid: VoxelGrid) -> VoxelGrid:
    """Keep the lower-x half of a bilaterally symmetric grid."""
    dx = grid.dims[0]
    if dx % 2 != 0:
        raise DimensionError(f"x dim must be even to halve, got {dx}")
    return VoxelGrid(grid.values[: dx // 2].copy(), grid.kind)


def mirror_symmetric(half: VoxelGrid) -> VoxelGrid:
    """Reflect a lower-x half back into a full bilaterally symmetric grid."""
    v = half.values
    return VoxelGrid(np.concatenate([v, v[::-1]], axis=0), half.kind)


def keep_components_touching(raw: VoxelGrid, reference: VoxelGrid) -> VoxelGrid:
    """Keep 6-connected components of `raw` that intersect `reference`."""
    if raw.kind != BINARY or reference.kind != BINARY:
        raise KindError("component filtering requires binary grids")
    if raw.dims != reference.dims:
        raise DimensionError(f"dims differ: {raw.dims} vs {reference.dims}")
    labels, count = ndimage.label(raw.values)
    if count == 0:
        return raw
    touched = np.unique(labels[(reference.values > 0) & (labels > 0)])
    out = np.isin(labels, touched) & (raw.values > 0)
    return VoxelGrid(out.astype(np.uint8), BINARY)
