"""Isosurface extraction and mesh output.

Fields are implicitly zero-padded by one voxel layer before extraction so
shapes touching the grid boundary still produce closed surfaces. Vertex
coordinates stay in the unpadded voxel frame.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from skimage import measure

from .errors import DimensionError, FormatError, ParameterError
from .voxel import VoxelGrid


@dataclass
class TriangleMesh:
    vertices: np.ndarray  # [V, 3] float32, voxel coordinates
    triangles: np.ndarray  # [T, 3] int32

    def __post_init__(self):
        self.vertices = np.asarray(self.vertices, np.float32).reshape(-1, 3)
        self.triangles = np.asarray(self.triangles, np.int32).reshape(-1, 3)
        if len(self.triangles) and (
            self.triangles.min() < 0 or self.triangles.max() >= len(self.vertices)
        ):
            raise FormatError("triangle indices out of range")

    def is_empty(self) -> bool:
        return len(self.triangles) == 0


def marching_cubes(field: VoxelGrid, iso: float = 0.5) -> TriangleMesh:
    """Extract the iso-surface of a scalar voxel field as a triangle mesh."""
    if not 0.0 < iso < 1.0:
        raise ParameterError(f"iso level must be in (0,1), got {iso}")
    if min(field.dims) < 2:
        raise DimensionError(f"field dims must be >= 2 per axis, got {field.dims}")
    vol = np.pad(field.values.astype(np.float32), 1, mode="constant")
    if vol.max() <= iso or vol.min() >= iso:
        return TriangleMesh(np.zeros((0, 3), np.float32), np.zeros((0, 3), np.int32))
    verts, faces, _, _ = measure.marching_cubes(vol, level=iso, allow_degenerate=False)
    verts = verts - 1.0  # undo padding offset
    mesh = TriangleMesh(verts, faces)
    if signed_volume(mesh) < 0:
        mesh.triangles = mesh.triangles[:, ::-1].copy()
    return mesh


def signed_volume(mesh: TriangleMesh) -> float:
    """Sum of signed tetrahedron volumes; positive for outward orientation."""
    v = mesh.vertices.astype(np.float64)
    t = mesh.triangles
    if len(t) == 0:
        return 0.0
    a, b, c = v[t[:, 0]], v[t[:, 1]], v[t[:, 2]]
    return float(np.einsum("ij,ij->i", a, np.cross(b, c)).sum() / 6.0)


def edge_use_counts(mesh: TriangleMesh) -> dict:
    """Undirected edge -> number of triangles using it."""
    counts: dict = {}
    for tri in mesh.triangles:
        for e0, e1 in ((tri[0], tri[1]), (tri[1], tri[2]), (tri[2], tri[0])):
            key = (int(min(e0, e1)), int(max(e0, e1)))
            counts[key] = counts.get(key, 0) + 1
    return counts


def is_watertight(mesh: TriangleMesh) -> bool:
    if mesh.is_empty():
        return True
    return all(n == 2 for n in edge_use_counts(mesh).values())


def euler_characteristic(mesh: TriangleMesh) -> int:
    used = np.unique(mesh.triangles)
    return int(len(used) - len(edge_use_counts(mesh)) + len(mesh.triangles))


def save_obj(mesh: TriangleMesh, path) -> None:
    """Standard OBJ: `v x y z` then 1-based `f a b c`, deterministic order."""
    lines = []
    for x, y, z in mesh.vertices:
        lines.append(f"v {float(x)!r} {float(y)!r} {float(z)!r}")
    for a, b, c in mesh.triangles:
        lines.append(f"f {a + 1} {b + 1} {c + 1}")
    Path(path).write_text("\n".join(lines) + ("\n" if lines else ""))


def load_obj(path) -> TriangleMesh:
    verts, faces = [], []
    for lineno, line in enumerate(Path(path).read_text().splitlines(), 1):
        tokens = line.split()
        if not tokens or tokens[0] not in ("v", "f"):
            continue
        if tokens[0] == "v":
            if len(tokens) < 4:
                raise FormatError(f"{path}:{lineno}: bad vertex line")
            verts.append([float(t) for t in tokens[1:4]])
        else:
            if len(tokens) < 4:
                raise FormatError(f"{path}:{lineno}: bad face line")
            faces.append([int(t.split("/")[0]) - 1 for t in tokens[1:4]])
    return TriangleMesh(
        np.array(verts, np.float32).reshape(-1, 3),
        np.array(faces, np.int32).reshape(-1, 3),
    )


def mesh_to_blob(mesh: TriangleMesh) -> bytes:
    """Binary wire format: u32 counts, f32 vertices, u32 indices (LE)."""
    head = struct.pack("<II", len(mesh.vertices), len(mesh.triangles))
    return (
        head
        + mesh.vertices.astype("<f4").tobytes()
        + mesh.triangles.astype("<u4").tobytes()
    )


def blob_to_mesh(blob: bytes) -> TriangleMesh:
    if len(blob) < 8:
        raise FormatError("mesh blob truncated")
    nv, nt = struct.unpack_from("<II", blob, 0)
    need = 8 + 12 * nv + 12 * nt
    if len(blob) != need:
        raise FormatError(f"mesh blob size {len(blob)} != expected {need}")
    verts = np.frombuffer(blob, "<f4", count=3 * nv, offset=8).reshape(nv, 3)
    tris = np.frombuffer(blob, "<u4", count=3 * nt, offset=8 + 12 * nv).reshape(nt, 3)
    return TriangleMesh(verts.copy(), tris.astype(np.int32))
