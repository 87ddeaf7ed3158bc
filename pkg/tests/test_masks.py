import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from voxdetail.errors import DimensionError, KindError
from voxdetail.masks import (
    LOOSE,
    STRICT,
    discriminator_mask_fake,
    discriminator_mask_real,
    generator_mask,
    mask_cache_name,
)
from voxdetail.voxel import CONTINUOUS, VoxelGrid, dilate, downsample_max, upsample_nearest


def random_binary(rng, dims, p=0.3):
    return VoxelGrid((rng.random(dims) < p).astype(np.uint8))


def window_scan_real_mask(detailed):
    """Oracle: per half-res cell, scan the clamped [2i-1, 2i+2] window."""
    v = detailed.values
    out = np.zeros(tuple(d // 2 for d in v.shape), np.uint8)
    for i in range(out.shape[0]):
        for j in range(out.shape[1]):
            for k in range(out.shape[2]):
                win = v[
                    max(0, 2 * i - 1) : min(v.shape[0], 2 * i + 3),
                    max(0, 2 * j - 1) : min(v.shape[1], 2 * j + 3),
                    max(0, 2 * k - 1) : min(v.shape[2], 2 * k + 3),
                ]
                out[i, j, k] = 1 if win.any() else 0
    return out


def test_strict_mask_single_voxel():
    v = np.zeros((4, 4, 4), np.uint8)
    v[1, 1, 1] = 1
    m = generator_mask(VoxelGrid(v), 4, STRICT)
    expect = np.zeros((16, 16, 16), np.uint8)
    expect[4:8, 4:8, 4:8] = 1
    assert m.mode == STRICT
    assert np.array_equal(m.grid.values, expect)


def test_loose_mask_single_voxel_is_dilated_block():
    v = np.zeros((4, 4, 4), np.uint8)
    v[1, 1, 1] = 1
    g = VoxelGrid(v)
    m = generator_mask(g, 4, LOOSE)
    oracle = upsample_nearest(dilate(g, 1), 4)
    assert np.array_equal(m.grid.values, oracle.values)
    assert m.grid.values[0:12, 0:12, 0:12].all()


def test_masks_empty_content():
    g = VoxelGrid(np.zeros((4, 4, 4), np.uint8))
    for mode in (STRICT, LOOSE):
        m = generator_mask(g, 4, mode)
        assert not m.grid.values.any()


def test_generator_mask_rejects_continuous():
    with pytest.raises(KindError):
        generator_mask(VoxelGrid(np.zeros((4, 4, 4), np.float32), CONTINUOUS), 4, LOOSE)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_loose_contains_strict(seed):
    rng = np.random.default_rng(seed)
    g = random_binary(rng, tuple(rng.integers(2, 6, 3)))
    loose = generator_mask(g, 4, LOOSE).grid.values
    strict = generator_mask(g, 4, STRICT).grid.values
    assert np.all(strict <= loose)


def test_real_mask_all_occupied():
    g = VoxelGrid(np.ones((8, 8, 8), np.uint8))
    m = discriminator_mask_real(g)
    assert m.grid.dims == (4, 4, 4)
    assert m.grid.values.all()


def test_real_mask_empty():
    g = VoxelGrid(np.zeros((8, 8, 8), np.uint8))
    assert not discriminator_mask_real(g).grid.values.any()


def test_real_mask_single_origin_voxel_matches_window_scan():
    v = np.zeros((8, 8, 8), np.uint8)
    v[0, 0, 0] = 1
    g = VoxelGrid(v)
    m = discriminator_mask_real(g)
    assert np.array_equal(m.grid.values, window_scan_real_mask(g))
    # origin voxel is inside the clamped windows of cells 0 and 1 per axis
    assert m.grid.values[0, 0, 0] == 1 and m.grid.values[1, 0, 0] == 0


def test_real_mask_matches_window_scan_random():
    rng = np.random.default_rng(1)
    for _ in range(10):
        g = random_binary(rng, tuple(2 * rng.integers(2, 7, 3)), p=0.08)
        assert np.array_equal(discriminator_mask_real(g).grid.values, window_scan_real_mask(g))


def test_real_mask_odd_dims_error():
    with pytest.raises(DimensionError):
        discriminator_mask_real(VoxelGrid(np.zeros((7, 8, 8), np.uint8)))


def test_fake_mask_oracle():
    rng = np.random.default_rng(2)
    one = VoxelGrid(np.ones((1, 1, 1), np.uint8))
    assert discriminator_mask_fake(one).grid.dims == (2, 2, 2)
    assert discriminator_mask_fake(one).grid.values.all()
    checker = VoxelGrid((np.indices((2, 2, 2)).sum(0) % 2).astype(np.uint8))
    m = discriminator_mask_fake(checker)
    assert np.array_equal(m.grid.values, upsample_nearest(checker, 2).values)
    for _ in range(5):
        g = random_binary(rng, tuple(rng.integers(1, 6, 3)))
        assert np.array_equal(
            discriminator_mask_fake(g).grid.values, upsample_nearest(g, 2).values
        )


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_real_fake_mask_consistency_on_ground_truth(seed):
    """Wherever the fake mask of s_down is on (interior windows with occupied
    centers), the real mask of s is on too."""
    rng = np.random.default_rng(seed)
    s = random_binary(rng, (8, 8, 8), p=0.2)
    real = discriminator_mask_real(s).grid.values
    fake = discriminator_mask_fake(downsample_max(s, 4)).grid.values
    # fake cell (i,j,k) on means coarse cell (i//2...) occupied: some voxel in
    # the corresponding 4^3 block is occupied. For interior cells the real
    # window [2i-1, 2i+2] covers that block's center 2^3; restrict to cells
    # whose own center 2^3 holds a voxel.
    for i, j, k in np.argwhere(fake):
        centre = s.values[2 * i : 2 * i + 2, 2 * j : 2 * j + 2, 2 * k : 2 * k + 2]
        if centre.any():
            assert real[i, j, k] == 1


def test_mask_cache_name_is_content_hash():
    g1 = VoxelGrid(np.ones((2, 2, 2), np.uint8))
    g2 = VoxelGrid(np.zeros((2, 2, 2), np.uint8))
    a = mask_cache_name(g1, "gen_loose")
    assert a == mask_cache_name(g1, "gen_loose")
    assert a != mask_cache_name(g2, "gen_loose")
    assert a != mask_cache_name(g1, "gen_strict")
    assert a.endswith(".vxb")
