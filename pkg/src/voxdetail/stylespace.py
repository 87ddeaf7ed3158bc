"""Continuous style exploration: 2-D embedding of the learned codes,
Delaunay triangulation, and barycentric interpolation back to 8-D.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.spatial import Delaunay, QhullError

from .errors import ConfigError, DegeneracyError

EPS = 1e-9


def embed_2d(codes: np.ndarray) -> np.ndarray:
    """Centered PCA projection of the N x 8 codes to two dimensions.

    Precomputed coordinates may be used instead anywhere an embedding is
    built; this is the default when none are supplied.
    """
    codes = np.asarray(codes, np.float64)
    if codes.ndim != 2 or codes.shape[0] < 3:
        raise ConfigError(f"embedding needs at least 3 codes, got {codes.shape}")
    centered = codes - codes.mean(axis=0)
    _, _, vt = np.linalg.svd(centered, full_matrices=False)
    basis = vt[:2]
    # deterministic sign: largest-magnitude coefficient of each axis positive
    for row in range(basis.shape[0]):
        lead = np.argmax(np.abs(basis[row]))
        if basis[row, lead] < 0:
            basis[row] = -basis[row]
    return centered @ basis.T


def delaunay(points: np.ndarray) -> np.ndarray:
    """Delaunay triangles of 2-D points (indices into the point list)."""
    points = np.asarray(points, np.float64)
    if points.ndim != 2 or points.shape[1] != 2 or len(points) < 3:
        raise DegeneracyError(f"triangulation needs >= 3 planar points, got {points.shape}")
    spread = points - points.mean(axis=0)
    if np.linalg.matrix_rank(spread, tol=1e-12) < 2:
        raise DegeneracyError("points are collinear")
    try:
        tri = Delaunay(points)
    except QhullError as exc:
        raise DegeneracyError(f"triangulation failed: {exc}") from exc
    return tri.simplices.astype(np.int32)


@dataclass
class StyleEmbedding:
    points: np.ndarray  # [N, 2]
    triangles: np.ndarray  # [T, 3]
    codes: np.ndarray  # [N, 8]
    ids: list

    def to_json(self) -> str:
        return json.dumps(
            {
                "ids": list(self.ids),
                "points": np.asarray(self.points, float).tolist(),
                "triangles": np.asarray(self.triangles, int).tolist(),
                "codes": np.asarray(self.codes, float).tolist(),
            },
            sort_keys=True,
        )

    @classmethod
    def from_json(cls, text: str) -> "StyleEmbedding":
        d = json.loads(text)
        return cls(
            points=np.array(d["points"], np.float64),
            triangles=np.array(d["triangles"], np.int32),
            codes=np.array(d["codes"], np.float32),
            ids=list(d["ids"]),
        )

    def save(self, path) -> None:
        Path(path).write_text(self.to_json() + "\n")

    @classmethod
    def load(cls, path) -> "StyleEmbedding":
        return cls.from_json(Path(path).read_text())


def build_embedding(codes: np.ndarray, ids, points: np.ndarray | None = None) -> StyleEmbedding:
    """Embed codes (PCA by default, or precomputed points) and triangulate."""
    codes = np.asarray(codes, np.float32)
    if len(ids) != len(codes):
        raise ConfigError("one id per code required")
    pts = embed_2d(codes) if points is None else np.asarray(points, np.float64)
    return StyleEmbedding(pts, delaunay(pts), codes, list(ids))


def _barycentric(p, a, b, c):
    den = (b[1] - c[1]) * (a[0] - c[0]) + (c[0] - b[0]) * (a[1] - c[1])
    if den == 0:
        return None
    w0 = ((b[1] - c[1]) * (p[0] - c[0]) + (c[0] - b[0]) * (p[1] - c[1])) / den
    w1 = ((c[1] - a[1]) * (p[0] - c[0]) + (a[0] - c[0]) * (p[1] - c[1])) / den
    return np.array([w0, w1, 1.0 - w0 - w1])


def _boundary_edges(triangles) -> list:
    seen: dict = {}
    for tri in triangles:
        for e0, e1 in ((tri[0], tri[1]), (tri[1], tri[2]), (tri[2], tri[0])):
            key = (int(min(e0, e1)), int(max(e0, e1)))
            seen[key] = seen.get(key, 0) + 1
    return [e for e, n in seen.items() if n == 1]


def clamp_to_hull(embedding: StyleEmbedding, query) -> np.ndarray:
    """Nearest point on the triangulation boundary to an outside query."""
    p = np.asarray(query, np.float64)
    best, best_d = None, np.inf
    for i0, i1 in _boundary_edges(embedding.triangles):
        a, b = embedding.points[i0], embedding.points[i1]
        ab = b - a
        denom = float(ab @ ab)
        t = 0.0 if denom == 0 else float(np.clip((p - a) @ ab / denom, 0.0, 1.0))
        cand = a + t * ab
        d = float(np.hypot(*(p - cand)))
        if d < best_d:
            best, best_d = cand, d
    return best


def interpolate_in_triangle(embedding: StyleEmbedding, tri, query) -> np.ndarray | None:
    """Float64 barycentric blend of the codes of one triangle, or None if the
    query lies outside it (beyond the epsilon tolerance)."""
    p = np.asarray(query, np.float64)
    w = _barycentric(p, *(embedding.points[i] for i in tri))
    if w is None:
        return None
    scale = max(float(np.abs(embedding.points).max()), 1.0)
    if w.min() < -EPS * scale:
        return None
    w = np.clip(w, 0.0, None)
    w = w / w.sum()
    return (w[:, None] * embedding.codes[tri].astype(np.float64)).sum(axis=0)


def interpolate_code(embedding: StyleEmbedding, query) -> np.ndarray:
    """Barycentric blend of the 8-D codes at a 2-D style-space point.

    Queries outside the hull are clamped to the nearest hull point first.
    """
    if len(embedding.points) == 0:
        raise ConfigError("empty embedding")
    p = np.asarray(query, np.float64)
    # exact vertex queries return the stored code bit-for-bit
    exact = np.flatnonzero((embedding.points[:, 0] == p[0]) & (embedding.points[:, 1] == p[1]))
    if len(exact):
        return embedding.codes[exact[0]].copy()
    for tri in embedding.triangles:
        blend = interpolate_in_triangle(embedding, tri, p)
        if blend is not None:
            return blend.astype(np.float32)
    clamped = clamp_to_hull(embedding, p)
    if clamped is None:
        raise ConfigError("embedding has no boundary edges")
    if not np.array_equal(clamped, p):
        return interpolate_code(embedding, clamped)
    raise ConfigError(f"query {query} cannot be located in the embedding")
