"""Adversarial training: masked least-squares GAN plus reconstruction loss.

Per iteration one exemplar s and one content c are sampled uniformly and
independently; the discriminator takes one update on (real s, fake
G(c,z_s)), then the generator takes one update on the GAN loss plus the
reconstruction pair (s downsampled, z_s). All loss terms are masked MSEs
normalized by mask mass (volume for the reconstruction term).
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import engine as eng
from .engine.adam import AdamConfig, AdamState, adam_step
from .errors import ConfigError, DegenerateSampleError, DimensionError
from .masks import LOOSE, STRICT, discriminator_mask_fake, discriminator_mask_real, generator_mask
from .models import Discriminator, Generator, StyleCodebook, init_parameters, load_into
from .voxel import (
    BINARY,
    CONTINUOUS,
    VoxelGrid,
    crop,
    crop_to_dilated_bbox,
    downsample_max,
    gaussian_blur,
    keep_components_touching,
    upsample_nearest,
)

MASK_MODES = ("loose", "strict", "none-with-penalty")
OUTSIDE_MASK_PENALTY = 10.0
UPSCALE = 4


@dataclass
class TrainConfig:
    """Every training hyperparameter plus the ablation switches."""

    alpha: float = 0.2
    beta: float = 10.0
    sigma: float = 1.0
    epochs: int = 20
    batch: int = 1
    lr: float = 1e-4
    beta1: float = 0.9
    beta2: float = 0.999
    n_styles: int = 0  # 0 = however many exemplars the dataset holds
    gen_mask_mode: str = "loose"
    dis_mask: bool = True
    recon_only: bool = False
    seed: int = 0
    kernel_size: int = 5
    iters_per_epoch: int = 0  # 0 = len(contents) * len(styles)

    def validate(self) -> None:
        if self.alpha < 0 or self.beta < 0 or self.sigma < 0:
            raise ConfigError("alpha, beta and sigma must be non-negative")
        if self.epochs < 1 or self.batch != 1:
            raise ConfigError("epochs must be >= 1 and batch size is fixed at 1")
        if self.gen_mask_mode not in MASK_MODES:
            raise ConfigError(f"gen_mask_mode must be one of {MASK_MODES}")
        if self.kernel_size not in (3, 5):
            raise ConfigError("kernel_size must be 3 or 5")
        if self.lr <= 0:
            raise ConfigError("lr must be positive")


_BOOL_WORDS = {"true": True, "on": True, "1": True, "false": False, "off": False, "0": False}


def load_config(path) -> TrainConfig:
    """Parse a key=value config file ('#' starts a comment)."""
    values = {}
    fields = {f.name: f for f in dataclasses.fields(TrainConfig)}
    for lineno, line in enumerate(Path(path).read_text().splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected key=value, got {line!r}")
        key, _, raw = line.partition("=")
        key, raw = key.strip(), raw.strip()
        if key not in fields:
            raise ConfigError(f"{path}:{lineno}: unknown config key {key!r}")
        ftype = fields[key].type
        if ftype == "bool":
            if raw.lower() not in _BOOL_WORDS:
                raise ConfigError(f"{path}:{lineno}: bad boolean {raw!r}")
            values[key] = _BOOL_WORDS[raw.lower()]
        elif ftype == "int":
            values[key] = int(raw)
        elif ftype == "float":
            values[key] = float(raw)
        else:
            values[key] = raw
    cfg = TrainConfig(**values)
    cfg.validate()
    return cfg


def save_config(cfg: TrainConfig, path) -> None:
    lines = []
    for f in dataclasses.fields(TrainConfig):
        v = getattr(cfg, f.name)
        if isinstance(v, bool):
            v = "on" if v else "off"
        lines.append(f"{f.name}={v}")
    Path(path).write_text("\n".join(lines) + "\n")


# ---------------------------------------------------------------------------
# Dataset


@dataclass
class StyleSample:
    sid: str
    detailed: VoxelGrid  # cropped binary exemplar
    blurred: np.ndarray  # [1,D,H,W] float32 training target / real input
    coarse: VoxelGrid  # cropped downsampled exemplar
    gen_masks: dict  # mode -> [1,4D,4H,4W] float32
    dis_real: np.ndarray  # [1,D/2,H/2,W/2] float32
    volume: float  # full voxel count of the cropped exemplar
    region: object = None  # low-res CropRegion within the source grid


@dataclass
class ContentSample:
    cid: str
    grid: VoxelGrid  # cropped binary content
    gen_masks: dict
    dis_fake: np.ndarray  # [1,2D,2H,2W] float32
    region: object = None  # low-res CropRegion within the source grid


@dataclass
class TrainDataset:
    styles: list
    contents: list
    sigma: float

    @property
    def style_ids(self):
        return [s.sid for s in self.styles]


def _expand_region(region, dims, min_extent):
    """Grow a crop region to a minimum per-axis extent, clipped to the grid."""
    origin, extent = list(region.origin), list(region.extent)
    for a in range(3):
        while extent[a] < min(min_extent, dims[a]):
            if origin[a] + extent[a] < dims[a]:
                extent[a] += 1
            elif origin[a] > 0:
                origin[a] -= 1
                extent[a] += 1
    return type(region)(tuple(origin), tuple(extent), region.scale_factor)


def _gen_mask_pair(content: VoxelGrid) -> dict:
    return {
        LOOSE: generator_mask(content, UPSCALE, LOOSE).grid.values.astype(np.float32)[None],
        STRICT: generator_mask(content, UPSCALE, STRICT).grid.values.astype(np.float32)[None],
    }


def prepare_content(cid: str, grid: VoxelGrid, min_extent: int = 5) -> ContentSample:
    low, _ = crop_to_dilated_bbox(grid, UPSCALE)
    low = _expand_region(low, grid.dims, min_extent)
    c = crop(grid, low)
    return ContentSample(
        cid=cid,
        grid=c,
        gen_masks=_gen_mask_pair(c),
        dis_fake=discriminator_mask_fake(c).grid.values.astype(np.float32)[None],
        region=low,
    )


def prepare_style(sid: str, detailed: VoxelGrid, sigma: float, min_extent: int = 5) -> StyleSample:
    if any(d % UPSCALE for d in detailed.dims):
        raise DimensionError(f"exemplar dims {detailed.dims} not divisible by {UPSCALE}")
    coarse_full = downsample_max(detailed, UPSCALE)
    low, _ = crop_to_dilated_bbox(coarse_full, UPSCALE)
    low = _expand_region(low, coarse_full.dims, min_extent)
    high = low.scaled(UPSCALE)
    coarse = crop(coarse_full, low)
    det = crop(detailed, high)
    return StyleSample(
        sid=sid,
        detailed=det,
        blurred=gaussian_blur(det, sigma).values[None],
        coarse=coarse,
        gen_masks=_gen_mask_pair(coarse),
        dis_real=discriminator_mask_real(det).grid.values.astype(np.float32)[None],
        volume=float(np.prod(det.dims)),
        region=low,
    )


def build_dataset(contents, exemplars, sigma: float, min_extent: int = 5) -> TrainDataset:
    """contents/exemplars: iterables of (id, binary VoxelGrid)."""
    return TrainDataset(
        styles=[prepare_style(sid, g, sigma, min_extent) for sid, g in exemplars],
        contents=[prepare_content(cid, g, min_extent) for cid, g in contents],
        sigma=sigma,
    )


# ---------------------------------------------------------------------------
# Loss terms


def _mask_norm(mask: np.ndarray) -> float:
    n = float(mask.sum(dtype=np.float64))
    if n <= 0:
        raise DegenerateSampleError("all-zero discriminator mask")
    return n


def loss_discriminator(d_real, d_fake, mask_real, mask_fake, style_idx: int):
    """Masked LSGAN discriminator loss: global and style branch, real+fake."""
    n_real = _mask_norm(mask_real)
    n_fake = _mask_norm(mask_fake)
    ones_r = np.ones_like(mask_real)
    zeros_f = np.zeros_like(mask_fake)
    ch = 1 + style_idx
    term = eng.masked_mse(eng.channel(d_real, 0), ones_r, mask_real, n_real)
    term = eng.add(term, eng.masked_mse(eng.channel(d_real, ch), ones_r, mask_real, n_real))
    term = eng.add(term, eng.masked_mse(eng.channel(d_fake, 0), zeros_f, mask_fake, n_fake))
    return eng.add(term, eng.masked_mse(eng.channel(d_fake, ch), zeros_f, mask_fake, n_fake))


def loss_generator_gan(d_fake, mask_fake, style_idx: int, alpha: float):
    """Masked LSGAN generator loss: global branch plus alpha * style branch."""
    n = _mask_norm(mask_fake)
    ones = np.ones_like(mask_fake)
    glob = eng.masked_mse(eng.channel(d_fake, 0), ones, mask_fake, n)
    style = eng.masked_mse(eng.channel(d_fake, 1 + style_idx), ones, mask_fake, n)
    return eng.add(glob, eng.mul(style, alpha))


def loss_reconstruction(masked_output, blurred_target: np.ndarray, volume: float):
    """||G(s_down, z_s) * M - blur(s)||^2 / volume(s)."""
    return eng.masked_mse(masked_output, blurred_target, np.ones_like(blurred_target), volume)


def loss_generator_total(gan_term, recon_term, beta: float):
    return eng.add(gan_term, eng.mul(recon_term, beta))


def penalty_outside_mask(raw, loose_mask: np.ndarray, lam: float = OUTSIDE_MASK_PENALTY):
    """Punish voxels generated outside the loose mask (mask-free ablation)."""
    outside = 1.0 - loose_mask
    return eng.mul(eng.masked_mse(raw, np.zeros_like(loose_mask), outside, float(raw.data.size)), lam)


# ---------------------------------------------------------------------------
# Training loop


@dataclass
class TrainResult:
    checkpoint_path: Path
    loss_log_path: Path
    iterations: int
    skipped: int
    checkpoints: list = field(default_factory=list)


def save_models(path, gen: Generator, dis: Discriminator, book: StyleCodebook, g_state=None, d_state=None):
    tensors = {k: p.data for k, p in gen.named_parameters().items()}
    tensors.update({k: p.data for k, p in dis.named_parameters().items()})
    tensors.update(book.export_tensors())
    if g_state is not None:
        tensors.update({"g." + k: v for k, v in g_state.state_tensors().items()})
    if d_state is not None:
        tensors.update({"d." + k: v for k, v in d_state.state_tensors().items()})
    eng.save_checkpoint(tensors, path)


def load_models(path) -> tuple[Generator, Discriminator, StyleCodebook]:
    tensors = eng.load_checkpoint(path)
    book = StyleCodebook.from_tensors(tensors)
    n = len(book)
    kernel_size = int(tensors["gen/conv1.w"].shape[2])
    gen, dis, _ = init_parameters(0, book.ids, kernel_size)
    if dis.params["dis/conv4.w"].data.shape[0] != tensors["dis/conv4.w"].shape[0]:
        raise ConfigError(f"checkpoint discriminator branches do not match {n} styles")
    load_into(gen.params, {k: v for k, v in tensors.items() if k.startswith("gen/")}, "gen/")
    load_into(dis.params, {k: v for k, v in tensors.items() if k.startswith("dis/")}, "dis/")
    return gen, dis, book


def _mask_key(mode: str) -> str:
    return STRICT if mode == STRICT else LOOSE


def train(config: TrainConfig, dataset: TrainDataset, out_dir) -> TrainResult:
    """Run the full alternating optimization; returns checkpoint + log paths."""
    config.validate()
    if not dataset.styles or not dataset.contents:
        raise ConfigError("dataset needs at least one content and one exemplar")
    if config.n_styles and config.n_styles != len(dataset.styles):
        raise ConfigError(
            f"config names {config.n_styles} styles, dataset holds {len(dataset.styles)}"
        )
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    gen, dis, book = init_parameters(config.seed, dataset.style_ids, config.kernel_size)
    g_params = dict(gen.named_parameters())
    g_params.update(book.named_parameters())
    d_params = dict(dis.named_parameters())
    adam_cfg = AdamConfig(lr=config.lr, beta1=config.beta1, beta2=config.beta2)
    g_state = AdamState.for_params(g_params)
    d_state = AdamState.for_params(d_params)

    rng = np.random.default_rng(config.seed)
    iters_per_epoch = config.iters_per_epoch or len(dataset.contents) * len(dataset.styles)
    mask_key = _mask_key(config.gen_mask_mode)
    penalized = config.gen_mask_mode == "none-with-penalty"

    log_path = out_dir / "loss_log.csv"
    log_lines = ["iter,loss_d,loss_g_gan,loss_recon,loss_total"]
    skipped = 0
    it = 0
    checkpoints = []

    for epoch in range(config.epochs):
        for _ in range(iters_per_epoch):
            it += 1
            s_idx = int(rng.integers(len(dataset.styles)))
            s = dataset.styles[s_idx]
            c = dataset.contents[int(rng.integers(len(dataset.contents)))]
            code = book.code(s_idx)

            try:
                loss_d_val = 0.0
                fake_field = None
                if not config.recon_only:
                    raw_c = gen.forward_tape(c.grid.values.astype(np.float32), code)
                    if penalized:
                        fake_field = raw_c
                    else:
                        fake_field = eng.mul(raw_c, eng.Tensor(c.gen_masks[mask_key]))
                    mask_real = s.dis_real if config.dis_mask else np.ones_like(s.dis_real)
                    mask_fake = c.dis_fake if config.dis_mask else np.ones_like(c.dis_fake)

                    d_real = dis.forward_tape(eng.Tensor(s.blurred))
                    d_fake = dis.forward_tape(eng.Tensor(fake_field.data))
                    l_d = loss_discriminator(d_real, d_fake, mask_real, mask_fake, s_idx)
                    eng.zero_grads(d_params.values())
                    eng.backward(l_d)
                    adam_step(d_params, d_state, adam_cfg)
                    loss_d_val = float(l_d.data)

                # generator step: GAN term on (c, z_s), recon term on (s_down, z_s)
                gan_val = 0.0
                total = None
                if not config.recon_only:
                    for p in d_params.values():
                        p.requires_grad = False
                    d_fake2 = dis.forward_tape(fake_field)
                    l_gan = loss_generator_gan(d_fake2, mask_fake, s_idx, config.alpha)
                    total = l_gan

                raw_s = gen.forward_tape(s.coarse.values.astype(np.float32), code)
                if penalized:
                    recon_pred = raw_s
                else:
                    recon_pred = eng.mul(raw_s, eng.Tensor(s.gen_masks[mask_key]))
                l_recon = loss_reconstruction(recon_pred, s.blurred, s.volume)
                recon_term = eng.mul(l_recon, config.beta)
                total = recon_term if total is None else eng.add(total, recon_term)
                if penalized:
                    total = eng.add(total, penalty_outside_mask(raw_s, s.gen_masks[LOOSE]))
                    if not config.recon_only:
                        total = eng.add(total, penalty_outside_mask(raw_c, c.gen_masks[LOOSE]))

                eng.zero_grads(g_params.values())
                eng.backward(total)
                adam_step(g_params, g_state, adam_cfg)
                if not config.recon_only:
                    gan_val = float(l_gan.data)
                    for p in d_params.values():
                        p.requires_grad = True
            except DegenerateSampleError:
                skipped += 1
                for p in d_params.values():
                    p.requires_grad = True
                continue

            log_lines.append(
                f"{it},{loss_d_val!r},{gan_val!r},{float(l_recon.data)!r},{float(total.data)!r}"
            )
        ckpt = out_dir / f"checkpoint_epoch_{epoch + 1:03d}.dgck"
        save_models(ckpt, gen, dis, book, g_state, d_state)
        checkpoints.append(ckpt)

    log_path.write_text("\n".join(log_lines) + "\n")
    return TrainResult(
        checkpoint_path=checkpoints[-1],
        loss_log_path=log_path,
        iterations=it,
        skipped=skipped,
        checkpoints=checkpoints,
    )


# ---------------------------------------------------------------------------
# Inference


def detailize(
    gen: Generator,
    content: VoxelGrid,
    code: np.ndarray,
    mask_mode: str = LOOSE,
    postprocess: str = "none",
) -> tuple[VoxelGrid, VoxelGrid]:
    """Refine a coarse grid: returns (binary shape, masked continuous field)."""
    if content.kind != BINARY:
        content = VoxelGrid(content.occupancy(), BINARY)
    if postprocess not in ("none", "components"):
        raise ConfigError(f"unknown postprocess {postprocess!r}")
    raw = gen.forward_tape(content.values.astype(np.float32), eng.Tensor(code))
    mode = _mask_key(mask_mode)
    gmask = generator_mask(content, UPSCALE, mode)
    masked = raw.data[0] * gmask.grid.values
    binary = VoxelGrid((masked > 0.5).astype(np.uint8), BINARY)
    if postprocess == "components" and binary.values.any():
        strict_region = upsample_nearest(content, UPSCALE)
        binary = keep_components_touching(binary, strict_region)
    return binary, VoxelGrid(masked, CONTINUOUS)
