import numpy as np
import pytest

from voxdetail import engine as eng
from voxdetail.errors import DimensionError, FormatError, ShapeError
from voxdetail.masks import LOOSE, generator_mask
from voxdetail.models import (
    StyleCodebook,
    apply_generator_mask,
    discriminator_forward,
    generator_forward,
    init_parameters,
    load_into,
)
from voxdetail.voxel import CONTINUOUS, VoxelGrid

import oracles


@pytest.fixture(scope="module")
def trio():
    return init_parameters(42, ["a", "b", "c"])


def test_generator_output_is_4x(trio):
    gen, _, book = trio
    rng = np.random.default_rng(0)
    for dims in [(4, 4, 4), (5, 8, 6), (8, 5, 7)]:
        content = (rng.random(dims) < 0.4).astype(np.float32)
        out = gen.forward_tape(content, book.code(0))
        assert out.shape == (1,) + tuple(4 * d for d in dims)
        assert 0.0 < out.data.min() and out.data.max() < 1.0


def test_generator_code_injection_changes_output(trio):
    gen, _, book = trio
    content = np.zeros((4, 4, 4), np.float32)
    content[1:3, 1:3, 1:3] = 1.0
    out0 = gen.forward_tape(content, book.code(0)).data
    out1 = gen.forward_tape(content, book.code(1)).data
    assert np.abs(out0 - out1).max() > 0.0


def test_generator_rejects_bad_code(trio):
    gen, _, _ = trio
    with pytest.raises(ShapeError):
        gen.forward_tape(np.zeros((4, 4, 4), np.float32), eng.Tensor(np.zeros(5, np.float32)))


def test_generator_rejects_tiny_content(trio):
    gen, _, book = trio
    with pytest.raises(DimensionError):
        gen.forward_tape(np.zeros((3, 4, 4), np.float32), book.code(0))


def test_zero_content_zeroed_by_mask(trio):
    gen, _, book = trio
    empty = VoxelGrid(np.zeros((4, 4, 4), np.uint8))
    raw = generator_forward(gen, empty, book.code_value(0))
    masked = apply_generator_mask(raw, generator_mask(empty, 4, LOOSE))
    assert not masked.values.any()


def test_generator_matches_f64_oracle(trio):
    gen, _, book = trio
    rng = np.random.default_rng(1)
    content = (rng.random((4, 5, 4)) < 0.5).astype(np.float32)
    got = gen.forward_tape(content, book.code(2)).data
    params = {k: t.data for k, t in gen.params.items()}
    want = oracles.generator_forward_f64(params, content, book.code_value(2), gen.kernel_size)
    assert np.abs(got - want).max() < 1e-4


def test_discriminator_matches_f64_oracle(trio):
    _, dis, _ = trio
    rng = np.random.default_rng(2)
    field = rng.random((18, 18, 20)).astype(np.float32)
    got = dis.forward_tape(eng.Tensor(field[None])).data
    params = {k: t.data for k, t in dis.params.items()}
    want = oracles.discriminator_forward_f64(params, field)
    assert got.shape == want.shape == (4, 9, 9, 10)
    assert np.abs(got - want).max() < 1e-4


def test_discriminator_output_shape_and_range(trio):
    _, dis, _ = trio
    rng = np.random.default_rng(3)
    field = VoxelGrid(rng.random((24, 24, 24)).astype(np.float32), CONTINUOUS)
    scores = discriminator_forward(dis, field)
    assert scores.shape == (4, 12, 12, 12)
    assert 0.0 < scores.min() and scores.max() < 1.0


def test_discriminator_rejects_small_or_odd(trio):
    _, dis, _ = trio
    with pytest.raises(DimensionError):
        dis.forward_tape(eng.Tensor(np.zeros((1, 16, 18, 18), np.float32)))
    with pytest.raises(DimensionError):
        dis.forward_tape(eng.Tensor(np.zeros((1, 19, 20, 20), np.float32)))


def test_discriminator_receptive_field_18(trio):
    """Perturbing a voxel >= 10 cells from a score cell's center leaves the
    score unchanged; a perturbation at the center changes it."""
    _, dis, _ = trio
    rng = np.random.default_rng(4)
    field = rng.random((24, 24, 24)).astype(np.float32)
    base = dis.forward_tape(eng.Tensor(field[None])).data
    cell = (6, 6, 6)  # score cell; center in input coords ~ (13, 13, 13)
    center = tuple(2 * c + 1 for c in cell)
    far = field.copy()
    far[center[0] - 11, center[1], center[2]] = 1.0 - far[center[0] - 11, center[1], center[2]]
    far_scores = dis.forward_tape(eng.Tensor(far[None])).data
    assert far_scores[:, cell[0], cell[1], cell[2]] == pytest.approx(
        base[:, cell[0], cell[1], cell[2]], abs=0.0
    )
    near = field.copy()
    near[center] = 1.0 - near[center]
    near_scores = dis.forward_tape(eng.Tensor(near[None])).data
    assert np.abs(near_scores[:, cell[0], cell[1], cell[2]] - base[:, cell[0], cell[1], cell[2]]).max() > 0


def test_style_branch_selection_zero_grad_elsewhere(trio):
    """Only channels 0 and 1+s receive gradient when the loss reads them."""
    _, dis, _ = trio
    rng = np.random.default_rng(5)
    field = eng.Tensor(rng.random((1, 20, 20, 20)).astype(np.float32), requires_grad=True)
    scores = dis.forward_tape(field)
    s = 1
    mask = np.ones((1,) + scores.shape[1:], np.float32)
    loss = eng.add(
        eng.masked_mse(eng.channel(scores, 0), np.ones_like(mask), mask, float(mask.sum())),
        eng.masked_mse(eng.channel(scores, 1 + s), np.ones_like(mask), mask, float(mask.sum())),
    )
    eng.backward(loss)
    assert scores.grad is not None
    assert np.abs(scores.grad[0]).max() > 0
    assert np.abs(scores.grad[1 + s]).max() > 0
    for other in range(scores.shape[0]):
        if other not in (0, 1 + s):
            assert not scores.grad[other].any()


def test_init_determinism_and_seed_sensitivity(tmp_path):
    a1 = init_parameters(7, ["x", "y"])
    a2 = init_parameters(7, ["x", "y"])
    b = init_parameters(8, ["x", "y"])
    for m1, m2 in ((a1[0], a2[0]), (a1[1], a2[1])):
        for k in m1.named_parameters():
            assert np.array_equal(m1.named_parameters()[k].data, m2.named_parameters()[k].data)
    assert np.array_equal(a1[2].codes.data, a2[2].codes.data)
    assert not np.array_equal(a1[0].params["gen/conv1.w"].data, b[0].params["gen/conv1.w"].data)


def test_codebook_norms_in_expected_band():
    for seed in (0, 1, 2, 3):
        _, _, book = init_parameters(seed, [f"s{i}" for i in range(16)])
        norms = np.linalg.norm(book.codes.data, axis=1)
        assert norms.min() >= 0.05 and norms.max() <= 0.5


def test_codebook_round_trip_and_strict_load():
    _, _, book = init_parameters(9, ["u", "v"])
    tensors = book.export_tensors()
    assert set(tensors) == {"style_code/u", "style_code/v"}
    back = StyleCodebook.from_tensors(tensors)
    assert back.ids == ["u", "v"]
    assert np.array_equal(back.codes.data, book.codes.data)

    gen, _, _ = init_parameters(10, ["u"])
    good = {k: t.data for k, t in gen.params.items()}
    bad = dict(good)
    bad["gen/conv9.w"] = np.zeros(3, np.float32)
    with pytest.raises(FormatError):
        load_into(gen.params, bad, "gen/")
    incomplete = dict(good)
    incomplete.pop("gen/conv1.w")
    with pytest.raises(FormatError):
        load_into(gen.params, incomplete, "gen/")


def test_kernel3_variant_output_dims():
    gen, _, book = init_parameters(11, ["a"], kernel_size=3)
    content = np.zeros((5, 5, 5), np.float32)
    content[2, 2, 2] = 1.0
    out = gen.forward_tape(content, book.code(0))
    assert out.shape == (1, 20, 20, 20)
