"""Evaluation metrics: content preservation, local plausibility, diversity.

Patch similarity search is the hot path: sampled 12^3 surface patches from
each output are matched against every integer-offset patch of every
exemplar. The fast path packs patches into 64-bit words and prunes
candidates with occupancy-count bounds before exact popcount
verification; `naive_patch_hits` is the independent brute-force reference
the fast path is tested against.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from scipy import ndimage

from .errors import ConfigError, DimensionError, UndefinedMetricError
from .voxel import VoxelGrid, downsample_max, load_voxels

PATCH_SIZE = 12
SIM_THRESHOLD = 0.95
FSCORE_DISTANCE = 1
DOWNSCALE = 4


def _occ(grid) -> np.ndarray:
    if isinstance(grid, VoxelGrid):
        return grid.occupancy()
    return np.asarray(grid, np.uint8)


def binary_iou(a: np.ndarray, b: np.ndarray) -> float:
    inter = int(np.logical_and(a, b).sum())
    union = int(np.logical_or(a, b).sum())
    return inter / union if union else 1.0


def strict_iou(output: VoxelGrid, content: VoxelGrid) -> float:
    """IOU between the max-pool-downsampled output and the input content."""
    if tuple(d * DOWNSCALE for d in content.dims) != output.dims:
        raise DimensionError(f"output dims {output.dims} != 4x content dims {content.dims}")
    down = downsample_max(VoxelGrid(_occ(output)), DOWNSCALE)
    return binary_iou(down.values, _occ(content))


def loose_iou(output: VoxelGrid, content: VoxelGrid) -> float:
    """Fraction of occupied input voxels also occupied in the downsampled output."""
    if tuple(d * DOWNSCALE for d in content.dims) != output.dims:
        raise DimensionError(f"output dims {output.dims} != 4x content dims {content.dims}")
    cin = _occ(content)
    n_in = int(cin.sum())
    if n_in == 0:
        raise UndefinedMetricError("loose IOU undefined for empty input")
    down = downsample_max(VoxelGrid(_occ(output)), DOWNSCALE)
    return int(np.logical_and(down.values, cin).sum()) / n_in


def patch_iou(a, b) -> float:
    a, b = _occ(a), _occ(b)
    if a.shape != b.shape:
        raise DimensionError(f"patch dims differ: {a.shape} vs {b.shape}")
    return binary_iou(a, b)


def patch_fscore(a, b, dist_threshold: int = FSCORE_DISTANCE) -> float:
    """F-score under Chebyshev voxel matching within `dist_threshold`."""
    a, b = _occ(a), _occ(b)
    if a.shape != b.shape:
        raise DimensionError(f"patch dims differ: {a.shape} vs {b.shape}")
    na, nb = int(a.sum()), int(b.sum())
    if na == 0 and nb == 0:
        return 1.0
    if na == 0 or nb == 0:
        return 0.0
    size = 2 * dist_threshold + 1
    da = ndimage.maximum_filter(a, size=size, mode="constant", cval=0)
    db = ndimage.maximum_filter(b, size=size, mode="constant", cval=0)
    precision = int(np.logical_and(a, db).sum()) / na
    recall = int(np.logical_and(b, da).sum()) / nb
    if precision + recall == 0:
        return 0.0
    return 2.0 * precision * recall / (precision + recall)


# ---------------------------------------------------------------------------
# Patch sampling


@dataclass(frozen=True)
class PatchSampleSet:
    """Sampled patch origins within one grid."""

    positions: np.ndarray  # [m, 3] int64
    patch_size: int = PATCH_SIZE

    def __len__(self):
        return len(self.positions)


def _valid_surface_positions(occ: np.ndarray, patch_size: int) -> np.ndarray:
    """Origins whose center 2^3 area holds >=1 occupied and >=1 empty voxel."""
    c0 = patch_size // 2 - 1
    centers = sliding_window_view(occ, (2, 2, 2))[c0 : occ.shape[0] - patch_size + 1 + c0,
                                                  c0 : occ.shape[1] - patch_size + 1 + c0,
                                                  c0 : occ.shape[2] - patch_size + 1 + c0]
    sums = centers.sum(axis=(3, 4, 5))
    return np.argwhere((sums > 0) & (sums < 8))


def sample_surface_patches(grid, n: int = 1000, seed: int = 0, patch_size: int = PATCH_SIZE) -> PatchSampleSet:
    """Uniform sample (without replacement) of valid surface patch origins."""
    occ = _occ(grid)
    if min(occ.shape) < patch_size:
        raise DimensionError(f"grid {occ.shape} smaller than patch size {patch_size}")
    valid = _valid_surface_positions(occ, patch_size)
    if len(valid) <= n:
        return PatchSampleSet(valid, patch_size)
    rng = np.random.default_rng(seed)
    idx = rng.choice(len(valid), size=n, replace=False)
    return PatchSampleSet(valid[idx], patch_size)


# ---------------------------------------------------------------------------
# Fast exemplar search


def _pack_bits(flat_patches: np.ndarray) -> np.ndarray:
    """[m, patch_voxels] uint8 -> [m, words] uint64 (little-endian bit order)."""
    packed = np.packbits(flat_patches, axis=1, bitorder="little")
    if packed.shape[1] % 8:
        pad = 8 - packed.shape[1] % 8
        packed = np.pad(packed, ((0, 0), (0, pad)))
    return np.ascontiguousarray(packed).view(np.uint64)


class ExemplarIndex:
    """All integer-offset patches of one exemplar, packed for fast matching."""

    def __init__(self, grid, patch_size: int = PATCH_SIZE):
        occ = _occ(grid)
        if min(occ.shape) < patch_size:
            raise DimensionError(f"exemplar {occ.shape} smaller than patch {patch_size}")
        self.occ = occ
        self.patch_size = patch_size
        p = patch_size
        wins = sliding_window_view(occ, (p, p, p))
        self.grid_positions = wins.shape[:3]
        m = wins.shape[0] * wins.shape[1] * wins.shape[2]
        self.counts = wins.sum(axis=(3, 4, 5), dtype=np.int64).reshape(m)
        # pack in slabs to bound the intermediate copy
        packed_rows = []
        slab = max(1, (1 << 22) // max(1, wins.shape[1] * wins.shape[2] * p**3))
        for z0 in range(0, wins.shape[0], slab):
            blk = wins[z0 : z0 + slab].reshape(-1, p**3)
            packed_rows.append(_pack_bits(blk))
        self.packed = np.concatenate(packed_rows, axis=0)
        self.dilated = ndimage.maximum_filter(
            occ, size=2 * FSCORE_DISTANCE + 1, mode="constant", cval=0
        )

    def pack_query(self, patch: np.ndarray) -> tuple[np.ndarray, int]:
        flat = np.asarray(patch, np.uint8).reshape(1, -1)
        return _pack_bits(flat)[0], int(flat.sum())

    def any_iou_above(self, patch: np.ndarray, threshold: float) -> bool:
        """True if some exemplar patch has IOU > threshold with `patch`."""
        qbits, na = self.pack_query(patch)
        nb = self.counts
        cand = np.minimum(na, nb) >= threshold * np.maximum(na, nb) - 1.0
        if not cand.any():
            return False
        inter = np.bitwise_count(self.packed[cand] & qbits[None, :]).sum(axis=1, dtype=np.int64)
        nb_c = nb[cand]
        union = na + nb_c - inter
        hits = np.where(union > 0, inter > threshold * union, True)
        return bool(hits.any())

    def any_fscore_above(self, patch: np.ndarray, threshold: float) -> bool:
        """True if some exemplar patch has F-score > threshold with `patch`."""
        p = self.patch_size
        a = np.asarray(patch, np.uint8)
        na = int(a.sum())
        if na == 0:
            return bool((self.counts == 0).any())
        da = ndimage.maximum_filter(a, size=2 * FSCORE_DISTANCE + 1, mode="constant", cval=0)
        da_bits, nda = self.pack_query(da)
        r_min = threshold / (2.0 - threshold)
        nb = self.counts
        # admissible count bounds: recall needs nda, precision needs 27*nb
        cand = (nda >= r_min * nb - 1.0) & (27.0 * nb >= r_min * na - 1.0) & (nb > 0)
        if not cand.any():
            return False
        cand_idx = np.flatnonzero(cand)
        m2 = np.bitwise_count(self.packed[cand_idx] & da_bits[None, :]).sum(axis=1, dtype=np.int64)
        nb_c = nb[cand_idx]
        keep = m2 * (2.0 - threshold) >= threshold * nb_c - 1e-9
        cand_idx = cand_idx[keep]
        if len(cand_idx) == 0:
            return False
        m2 = m2[keep]
        nb_c = nb_c[keep]
        order = np.argsort(-(m2 / nb_c))
        gp = self.grid_positions
        for row in order:
            flat = int(cand_idx[row])
            z, rem = divmod(flat, gp[1] * gp[2])
            y, x = divmod(rem, gp[2])
            b = self.occ[z : z + p, y : y + p, x : x + p]
            recall = int(m2[row]) / int(nb_c[row])
            db = ndimage.maximum_filter(b, size=2 * FSCORE_DISTANCE + 1, mode="constant", cval=0)
            precision = int(np.logical_and(a, db).sum()) / na
            if precision + recall == 0:
                continue
            f = 2.0 * precision * recall / (precision + recall)
            if f > threshold:
                return True
        return False


def fast_patch_hits(output_grid, sample: PatchSampleSet, index: ExemplarIndex,
                    sim: str, threshold: float = SIM_THRESHOLD) -> np.ndarray:
    """Per sampled patch: does any exemplar patch exceed the threshold."""
    occ = _occ(output_grid)
    p = sample.patch_size
    hits = np.zeros(len(sample), bool)
    for i, (z, y, x) in enumerate(sample.positions):
        patch = occ[z : z + p, y : y + p, x : x + p]
        if sim == "iou":
            hits[i] = index.any_iou_above(patch, threshold)
        elif sim == "fscore":
            hits[i] = index.any_fscore_above(patch, threshold)
        else:
            raise ConfigError(f"unknown similarity {sim!r}")
    return hits


def naive_patch_hits(output_grid, sample: PatchSampleSet, exemplar_grid,
                     sim: str, threshold: float = SIM_THRESHOLD) -> np.ndarray:
    """Brute-force reference: scan every exemplar offset for every patch."""
    occ = _occ(output_grid)
    ex = _occ(exemplar_grid)
    p = sample.patch_size
    fn = patch_iou if sim == "iou" else patch_fscore
    hits = np.zeros(len(sample), bool)
    for i, (z, y, x) in enumerate(sample.positions):
        patch = occ[z : z + p, y : y + p, x : x + p]
        found = False
        for bz in range(ex.shape[0] - p + 1):
            for by in range(ex.shape[1] - p + 1):
                for bx in range(ex.shape[2] - p + 1):
                    if fn(patch, ex[bz : bz + p, by : by + p, bx : bx + p]) > threshold:
                        found = True
                        break
                if found:
                    break
            if found:
                break
        hits[i] = found
    return hits


# ---------------------------------------------------------------------------
# LP / Div


@dataclass
class MetricTally:
    """counts[i, j, k]: patches of output (content i, style j) matched in exemplar k."""

    counts: np.ndarray
    samples_per_output: np.ndarray  # [I, J] number of sampled patches

    def bias_corrected(self) -> np.ndarray:
        n_ik = self.counts.mean(axis=1)  # mean over styles j
        return self.counts - n_ik[:, None, :]


def lp_and_tally(outputs, exemplars, sim: str = "iou", threshold: float = SIM_THRESHOLD,
                 n_patches: int = 1000, seed: int = 0,
                 patch_size: int = PATCH_SIZE) -> tuple[float, MetricTally]:
    """outputs: list of (content_idx, style_idx, grid); exemplars: list of grids.

    LP is the fraction of sampled patches similar to at least one patch in
    any exemplar; the tally counts per-exemplar hits for diversity.
    """
    if not exemplars:
        raise ConfigError("LP needs at least one exemplar")
    n_i = 1 + max(i for i, _, _ in outputs)
    n_j = 1 + max(j for _, j, _ in outputs)
    indices = [ExemplarIndex(g, patch_size) for g in exemplars]
    counts = np.zeros((n_i, n_j, len(exemplars)), np.int64)
    samples = np.zeros((n_i, n_j), np.int64)
    total_patches = 0
    total_hits = 0
    for i, j, grid in outputs:
        sample = sample_surface_patches(grid, n_patches, seed=seed, patch_size=patch_size)
        samples[i, j] = len(sample)
        if len(sample) == 0:
            continue
        any_hit = np.zeros(len(sample), bool)
        for k, index in enumerate(indices):
            hits = fast_patch_hits(grid, sample, index, sim, threshold)
            counts[i, j, k] = int(hits.sum())
            any_hit |= hits
        total_patches += len(sample)
        total_hits += int(any_hit.sum())
    lp = total_hits / total_patches if total_patches else 0.0
    return lp, MetricTally(counts, samples)


def diversity(tally: MetricTally) -> float:
    """Fraction of outputs whose bias-corrected best exemplar is their own style.

    A tied argmax never counts as consistent.
    """
    counts = tally.counts
    if counts.size == 0 or counts.shape[1] < 1:
        raise UndefinedMetricError("diversity needs a non-empty tally")
    adj = tally.bias_corrected()
    n_i, n_j, _ = adj.shape
    hits = 0
    for i in range(n_i):
        for j in range(n_j):
            row = adj[i, j]
            best = row.max()
            winners = np.flatnonzero(row == best)
            if len(winners) == 1 and winners[0] == j:
                hits += 1
    return hits / (n_i * n_j)


# ---------------------------------------------------------------------------
# Whole-run evaluation


@dataclass
class EvalManifest:
    """Exemplar grids plus (content, style, output) triples to score."""

    exemplars: list  # (style_id, path)
    outputs: list  # (content_path, style_id, output_path)

    @classmethod
    def parse(cls, path) -> "EvalManifest":
        exemplars, outputs = [], []
        for lineno, line in enumerate(Path(path).read_text().splitlines(), 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            tokens = line.split()
            if tokens[0] == "exemplar" and len(tokens) == 3:
                exemplars.append((tokens[1], tokens[2]))
            elif tokens[0] == "output" and len(tokens) == 4:
                outputs.append((tokens[1], tokens[2], tokens[3]))
            elif len(tokens) == 3:
                outputs.append((tokens[0], tokens[1], tokens[2]))
            else:
                raise ConfigError(f"{path}:{lineno}: unparseable manifest line {line!r}")
        return cls(exemplars, outputs)

    def write(self, path) -> None:
        lines = [f"exemplar {sid} {p}" for sid, p in self.exemplars]
        lines += [f"output {c} {sid} {o}" for c, sid, o in self.outputs]
        Path(path).write_text("\n".join(lines) + "\n")


def evaluate(manifest: EvalManifest, seed: int = 0, n_patches: int = 1000,
             div_styles: int = 16, threshold: float = SIM_THRESHOLD) -> dict:
    """Compute the full metric suite for a set of generated outputs."""
    if not manifest.outputs:
        raise ConfigError("manifest lists no outputs")
    missing = [str(p) for _, _, p in manifest.outputs if not Path(p).exists()]
    missing += [str(p) for _, p in manifest.exemplars if not Path(p).exists()]
    if missing:
        raise IOError("missing evaluation inputs: " + ", ".join(sorted(set(missing))))

    style_order = [sid for sid, _ in manifest.exemplars]
    exemplar_grids = [load_voxels(p) for _, p in manifest.exemplars]
    content_ids = sorted({c for c, _, _ in manifest.outputs})
    content_grids = {c: load_voxels(c) for c in content_ids}

    strict_vals, loose_vals = [], []
    triples = []  # (content_idx, style_idx, output grid)
    for c_path, sid, o_path in manifest.outputs:
        if sid not in style_order:
            raise ConfigError(f"output references unknown style {sid!r}")
        out_grid = load_voxels(o_path)
        content = content_grids[c_path]
        strict_vals.append(strict_iou(out_grid, content))
        loose_vals.append(loose_iou(out_grid, content))
        triples.append((content_ids.index(c_path), style_order.index(sid), out_grid))

    report = {
        "strict_iou": float(np.mean(strict_vals)),
        "loose_iou": float(np.mean(loose_vals)),
    }
    counts_used = {}
    n_div = min(div_styles, len(style_order))
    for sim in ("iou", "fscore"):
        lp, tally = lp_and_tally(
            triples, exemplar_grids, sim=sim, threshold=threshold,
            n_patches=n_patches, seed=seed,
        )
        div_triples = [(i, j, g) for i, j, g in triples if j < n_div]
        if div_triples and len(style_order) > 0:
            div_tally = MetricTally(
                tally.counts[:, :n_div, :], tally.samples_per_output[:, :n_div]
            )
            div = diversity(div_tally)
        else:
            div = 0.0
        report[f"lp_{sim}"] = float(lp)
        report[f"div_{sim}"] = float(div)
        counts_used[sim] = tally.counts.tolist()

    report["provenance"] = {
        "seed": seed,
        "n_patches": n_patches,
        "similarity_threshold": threshold,
        "fscore_distance": FSCORE_DISTANCE,
        "patch_size": PATCH_SIZE,
        "n_outputs": len(manifest.outputs),
        "n_exemplars": len(manifest.exemplars),
        "div_styles": n_div,
        "tallies": counts_used,
    }
    return report


def write_report(report: dict, path) -> None:
    Path(path).write_text(json.dumps(report, indent=2, sort_keys=True) + "\n")
