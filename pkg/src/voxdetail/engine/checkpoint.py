"""DGCK checkpoint format: named float32 tensors, bit-exact round trip.

Layout: magic "DGCK", u32 tensor count; per tensor (sorted by name):
u16 name length, UTF-8 name, u8 rank, u32 dims, f32 LE payload.
"""

from __future__ import annotations

import struct

import numpy as np

from ..errors import FormatError

_MAGIC = b"DGCK"


def save_checkpoint(tensors: dict[str, np.ndarray], path) -> None:
    with open(path, "wb") as f:
        f.write(_MAGIC)
        f.write(struct.pack("<I", len(tensors)))
        for name in sorted(tensors):
            arr = np.ascontiguousarray(tensors[name], dtype="<f4")
            encoded = name.encode("utf-8")
            f.write(struct.pack("<H", len(encoded)))
            f.write(encoded)
            f.write(struct.pack("<B", arr.ndim))
            f.write(struct.pack(f"<{arr.ndim}I", *arr.shape))
            f.write(arr.tobytes())


def load_checkpoint(path) -> dict[str, np.ndarray]:
    with open(path, "rb") as f:
        blob = f.read()
    if blob[:4] != _MAGIC:
        raise FormatError(f"bad checkpoint magic {blob[:4]!r}")
    try:
        (count,) = struct.unpack_from("<I", blob, 4)
        offset = 8
        out: dict[str, np.ndarray] = {}
        for _ in range(count):
            (name_len,) = struct.unpack_from("<H", blob, offset)
            offset += 2
            name = blob[offset : offset + name_len].decode("utf-8")
            offset += name_len
            (rank,) = struct.unpack_from("<B", blob, offset)
            offset += 1
            shape = struct.unpack_from(f"<{rank}I", blob, offset)
            offset += 4 * rank
            n = int(np.prod(shape)) if rank else 1
            end = offset + 4 * n
            if end > len(blob):
                raise IOError(f"checkpoint truncated while reading {name!r}")
            arr = np.frombuffer(blob[offset:end], "<f4").reshape(shape).copy()
            offset = end
            out[name] = arr
    except struct.error as exc:
        raise IOError(f"checkpoint truncated: {exc}") from exc
    return out
