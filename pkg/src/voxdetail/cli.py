"""Command-line entry points: preprocess, train, detailize, evaluate,
embed, serve."""

from __future__ import annotations

import os
import sys
from pathlib import Path

import click
import numpy as np

from . import metrics as met
from . import training as tr
from .errors import VoxdetailError
from .masks import LOOSE, STRICT, discriminator_mask_real, generator_mask, mask_cache_name
from .mesh import marching_cubes, save_obj
from .stylespace import StyleEmbedding, build_embedding, interpolate_code
from .voxel import (
    BINARY,
    CONTINUOUS,
    VoxelGrid,
    crop,
    crop_to_dilated_bbox,
    downsample_max,
    gaussian_blur,
    halve_symmetric,
    load_voxels,
    mirror_symmetric,
    save_voxels,
)

GRID_SUFFIXES = (".vxb", ".binvox")


def _grid_files(directory: Path) -> list[Path]:
    return sorted(p for p in directory.iterdir() if p.suffix in GRID_SUFFIXES)


def _load_dir(directory) -> list[tuple[str, VoxelGrid]]:
    directory = Path(directory)
    files = _grid_files(directory)
    if not files:
        raise click.ClickException(f"no voxel files in {directory}")
    return [(p.stem, load_voxels(p)) for p in files]


def _wrap_errors(fn):
    import functools

    @functools.wraps(fn)
    def inner(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except VoxdetailError as exc:
            raise click.ClickException(str(exc)) from exc
        except OSError as exc:
            raise click.ClickException(str(exc)) from exc

    return inner


@click.group()
def main():
    """Voxel shape detailization engine."""


@main.command()
@click.option("--contents", type=click.Path(exists=True, file_okay=False), required=True)
@click.option("--exemplars", type=click.Path(exists=True, file_okay=False), required=True)
@click.option("--out", type=click.Path(file_okay=False), required=True)
@click.option("--sigma", default=1.0, show_default=True)
@click.option("--symmetric", is_flag=True, help="keep only the lower-x half of every shape")
@_wrap_errors
def preprocess(contents, exemplars, out, sigma, symmetric):
    """Crop, optionally halve, blur, and cache masks for a dataset."""
    out = Path(out)
    for sub in ("contents", "exemplars", "coarse", "blurred", "masks"):
        (out / sub).mkdir(parents=True, exist_ok=True)

    def maybe_halve(grid):
        return halve_symmetric(grid) if symmetric else grid

    for cid, grid in _load_dir(contents):
        low, _ = crop_to_dilated_bbox(grid, tr.UPSCALE)
        low = tr._expand_region(low, grid.dims, 5)
        cropped = maybe_halve(crop(grid, low))
        save_voxels(cropped, out / "contents" / f"{cid}.vxb")
        for mode in (LOOSE, STRICT):
            m = generator_mask(cropped, tr.UPSCALE, mode)
            save_voxels(m.grid, out / "masks" / mask_cache_name(cropped, f"gen_{mode}"))
    for sid, grid in _load_dir(exemplars):
        coarse_full = downsample_max(grid, tr.UPSCALE)
        low, _ = crop_to_dilated_bbox(coarse_full, tr.UPSCALE)
        low = tr._expand_region(low, coarse_full.dims, 5)
        high = low.scaled(tr.UPSCALE)
        det = maybe_halve(crop(grid, high))
        coarse = maybe_halve(crop(coarse_full, low))
        save_voxels(det, out / "exemplars" / f"{sid}.vxb")
        save_voxels(coarse, out / "coarse" / f"{sid}.vxb")
        save_voxels(gaussian_blur(det, sigma), out / "blurred" / f"{sid}.vxb")
        save_voxels(
            discriminator_mask_real(det).grid, out / "masks" / mask_cache_name(det, "dis_real")
        )
    click.echo(f"preprocessed dataset written to {out}")


@main.command()
@click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--contents", type=click.Path(exists=True, file_okay=False), required=True)
@click.option("--exemplars", type=click.Path(exists=True, file_okay=False), required=True)
@click.option("--out", type=click.Path(file_okay=False), required=True)
@_wrap_errors
def train(config_path, contents, exemplars, out):
    """Train generator, discriminator, and style codebook."""
    cfg = tr.load_config(config_path)
    dataset = tr.build_dataset(_load_dir(contents), _load_dir(exemplars), cfg.sigma)
    result = tr.train(cfg, dataset, out)
    click.echo(f"final checkpoint: {result.checkpoint_path}")
    click.echo(f"loss log: {result.loss_log_path} ({result.iterations} iterations)")


def _parse_style(style: str, book, embedding: StyleEmbedding | None):
    if "," in style:
        x, y = (float(t) for t in style.split(","))
        if embedding is None:
            raise click.ClickException("point-valued --style needs --embedding")
        return interpolate_code(embedding, (x, y))
    if style not in book.ids:
        raise click.ClickException(f"unknown style id {style!r}")
    return book.code_value(book.index_of(style))


@main.command()
@click.option("--content", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--style", required=True, help="style id, or 'x,y' point in the embedding")
@click.option("--checkpoint", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--out", type=click.Path(dir_okay=False), required=True)
@click.option("--embedding", "embedding_path", type=click.Path(exists=True, dir_okay=False))
@click.option("--postprocess", type=click.Choice(["none", "components"]), default="none")
@click.option("--mask-mode", type=click.Choice([LOOSE, STRICT]), default=LOOSE)
@click.option("--symmetric", is_flag=True, help="halve the content, generate, then mirror")
@_wrap_errors
def detailize(content, style, checkpoint, out, embedding_path, postprocess, mask_mode, symmetric):
    """Refine a coarse voxel grid under a style code."""
    gen, _, book = tr.load_models(checkpoint)
    emb = StyleEmbedding.load(embedding_path) if embedding_path else None
    code = _parse_style(style, book, emb)
    grid = load_voxels(content)
    if symmetric:
        grid = halve_symmetric(grid)
    binary, fld = tr.detailize(gen, grid, code, mask_mode=mask_mode, postprocess=postprocess)
    if symmetric:
        binary = mirror_symmetric(binary)
        fld = mirror_symmetric(fld)
    out = Path(out)
    if out.suffix == ".obj":
        source = VoxelGrid(binary.values.astype(np.float32), CONTINUOUS) if postprocess == "components" else fld
        save_obj(marching_cubes(source, 0.5), out)
    else:
        save_voxels(binary, out)
    click.echo(f"wrote {out}")


@main.command()
@click.option("--manifest", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--out", type=click.Path(dir_okay=False), required=True)
@click.option("--seed", default=0, show_default=True)
@click.option("--patches", default=1000, show_default=True)
@_wrap_errors
def evaluate(manifest, out, seed, patches):
    """Score generated outputs against their contents and exemplars."""
    m = met.EvalManifest.parse(manifest)
    report = met.evaluate(m, seed=seed, n_patches=patches)
    met.write_report(report, out)
    keys = ("strict_iou", "loose_iou", "lp_iou", "lp_fscore", "div_iou", "div_fscore")
    click.echo("  ".join(f"{k}={report[k]:.4f}" for k in keys))


@main.command()
@click.option("--checkpoint", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--out", type=click.Path(dir_okay=False), required=True)
@click.option("--points", "points_path", type=click.Path(exists=True, dir_okay=False),
              help="optional JSON [[x,y],...] overriding the PCA projection")
@_wrap_errors
def embed(checkpoint, out, points_path):
    """Project the learned style codes to 2-D and triangulate them."""
    import json

    _, _, book = tr.load_models(checkpoint)
    points = None
    if points_path:
        points = np.array(json.loads(Path(points_path).read_text()), np.float64)
    emb = build_embedding(book.codes.data, book.ids, points)
    emb.save(out)
    click.echo(f"wrote embedding of {len(book.ids)} styles to {out}")


@main.command()
@click.option("--checkpoint", type=click.Path(exists=True, dir_okay=False),
              default=lambda: os.environ.get("DECOR_CHECKPOINT"), required=False)
@click.option("--port", type=int, default=lambda: int(os.environ.get("DECOR_PORT", "8711")))
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--contents", type=click.Path(exists=True, file_okay=False), required=True)
@click.option("--embedding", "embedding_path", type=click.Path(exists=True, dir_okay=False))
@click.option("--max-dim", default=64, show_default=True)
@_wrap_errors
def serve(checkpoint, port, host, contents, embedding_path, max_dim):
    """Serve the style explorer HTTP API."""
    import uvicorn

    from .server import ServiceState, create_app

    if not checkpoint:
        raise click.ClickException("--checkpoint or DECOR_CHECKPOINT required")
    gen, _, book = tr.load_models(checkpoint)
    emb = (
        StyleEmbedding.load(embedding_path)
        if embedding_path
        else build_embedding(book.codes.data, book.ids)
    )
    state = ServiceState(
        generator=gen,
        codebook=book,
        embedding=emb,
        contents=dict(_load_dir(contents)),
        max_content_dim=max_dim,
    )
    uvicorn.run(create_app(state), host=host, port=port, log_level="warning")


if __name__ == "__main__":
    sys.exit(main())
