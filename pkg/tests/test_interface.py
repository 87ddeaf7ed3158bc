import json
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np
import pytest
from click.testing import CliRunner
from fastapi.testclient import TestClient

from voxdetail.cli import main
from voxdetail.mesh import blob_to_mesh, load_obj
from voxdetail.server import ServiceState, create_app
from voxdetail.stylespace import StyleEmbedding, build_embedding
from voxdetail.training import load_models
from voxdetail.voxel import VoxelGrid, downsample_max, load_voxels, save_voxels


def box(dims, lo, hi, notch=False):
    v = np.zeros(dims, np.uint8)
    v[lo[0]:hi[0], lo[1]:hi[1], lo[2]:hi[2]] = 1
    if notch:
        v[lo[0]:hi[0]:3, hi[1] - 2 : hi[1], lo[2]:hi[2]] = 0
    return VoxelGrid(v)


@pytest.fixture(scope="module")
def workdir(tmp_path_factory):
    """Raw dataset + a briefly trained checkpoint + embedding, shared."""
    root = tmp_path_factory.mktemp("iface")
    contents = root / "contents"
    exemplars = root / "exemplars"
    contents.mkdir()
    exemplars.mkdir()
    shapes = [
        box((32, 32, 32), (8, 8, 8), (24, 26, 24)),
        box((32, 32, 32), (8, 8, 8), (24, 26, 24), notch=True),
        box((32, 32, 32), (10, 6, 10), (22, 28, 22)),
    ]
    for i, s in enumerate(shapes):
        save_voxels(s, exemplars / f"ex{i}.vxb")
        save_voxels(downsample_max(s, 4), contents / f"c{i}.vxb")

    cfg = root / "train.cfg"
    cfg.write_text(
        "alpha=0.5\nbeta=10.0\nsigma=1.0\nepochs=1\niters_per_epoch=45\n"
        "recon_only=on\nseed=7\nn_styles=3\n"
    )
    runner = CliRunner()
    res = runner.invoke(main, [
        "train", "--config", str(cfg), "--contents", str(contents),
        "--exemplars", str(exemplars), "--out", str(root / "run"),
    ])
    assert res.exit_code == 0, res.output
    ckpt = root / "run" / "checkpoint_epoch_001.dgck"
    assert ckpt.exists()

    res = runner.invoke(main, ["embed", "--checkpoint", str(ckpt), "--out", str(root / "emb.json")])
    assert res.exit_code == 0, res.output
    return root


@pytest.fixture(scope="module")
def client(workdir):
    gen, _, book = load_models(workdir / "run" / "checkpoint_epoch_001.dgck")
    emb = StyleEmbedding.load(workdir / "emb.json")
    contents = {
        p.stem: load_voxels(p) for p in sorted((workdir / "contents").iterdir())
    }
    contents["too_big"] = VoxelGrid(np.ones((80, 8, 8), np.uint8))
    state = ServiceState(generator=gen, codebook=book, embedding=emb, contents=contents)
    return TestClient(create_app(state))


# ---------------------------------------------------------------------------
# CLI


def test_cli_unknown_flag_exits_2():
    res = CliRunner().invoke(main, ["detailize", "--bogus"])
    assert res.exit_code == 2


def test_cli_preprocess(workdir, tmp_path):
    out = tmp_path / "prep"
    res = CliRunner().invoke(main, [
        "preprocess", "--contents", str(workdir / "contents"),
        "--exemplars", str(workdir / "exemplars"), "--out", str(out), "--sigma", "1.0",
    ])
    assert res.exit_code == 0, res.output
    for sub in ("contents", "exemplars", "coarse", "blurred", "masks"):
        assert any((out / sub).iterdir()), sub
    # cropped exemplar parses and is 4x its coarse twin
    ex = load_voxels(next((out / "exemplars").glob("*.vxb")))
    co = load_voxels(next((out / "coarse").glob("*.vxb")))
    assert ex.dims == tuple(4 * d for d in co.dims)


def test_cli_preprocess_symmetric(workdir, tmp_path):
    out = tmp_path / "prep_sym"
    res = CliRunner().invoke(main, [
        "preprocess", "--contents", str(workdir / "contents"),
        "--exemplars", str(workdir / "exemplars"), "--out", str(out), "--symmetric",
    ])
    assert res.exit_code == 0, res.output


def test_cli_detailize_obj_and_vxb(workdir, tmp_path):
    ckpt = workdir / "run" / "checkpoint_epoch_001.dgck"
    content = next((workdir / "contents").glob("*.vxb"))
    obj_path = tmp_path / "out.obj"
    res = CliRunner().invoke(main, [
        "detailize", "--content", str(content), "--style", "ex0",
        "--checkpoint", str(ckpt), "--out", str(obj_path),
    ])
    assert res.exit_code == 0, res.output
    mesh = load_obj(obj_path)
    assert len(mesh.triangles) > 0

    vxb_path = tmp_path / "out.vxb"
    res = CliRunner().invoke(main, [
        "detailize", "--content", str(content), "--style", "ex0",
        "--checkpoint", str(ckpt), "--out", str(vxb_path), "--postprocess", "components",
    ])
    assert res.exit_code == 0, res.output
    out = load_voxels(vxb_path)
    assert out.dims == tuple(4 * d for d in load_voxels(content).dims)


def test_cli_detailize_by_point(workdir, tmp_path):
    ckpt = workdir / "run" / "checkpoint_epoch_001.dgck"
    content = next((workdir / "contents").glob("*.vxb"))
    emb = StyleEmbedding.load(workdir / "emb.json")
    x, y = emb.points[0]
    p1, p2 = tmp_path / "a.vxb", tmp_path / "b.vxb"
    for style, path in ((f"{x},{y}", p1), ("ex0", p2)):
        res = CliRunner().invoke(main, [
            "detailize", "--content", str(content), "--style", style,
            "--checkpoint", str(ckpt), "--out", str(path),
            "--embedding", str(workdir / "emb.json"),
        ])
        assert res.exit_code == 0, res.output
    assert p1.read_bytes() == p2.read_bytes()


def test_cli_evaluate_ground_truth(workdir, tmp_path):
    manifest = tmp_path / "manifest.txt"
    lines = []
    for i in range(3):
        ex = workdir / "exemplars" / f"ex{i}.vxb"
        co = tmp_path / f"co{i}.vxb"
        save_voxels(downsample_max(load_voxels(ex), 4), co)
        lines.append(f"exemplar ex{i} {ex}")
        lines.append(f"output {co} ex{i} {ex}")
    manifest.write_text("\n".join(lines) + "\n")
    report_path = tmp_path / "report.json"
    res = CliRunner().invoke(main, [
        "evaluate", "--manifest", str(manifest), "--out", str(report_path),
        "--patches", "40",
    ])
    assert res.exit_code == 0, res.output
    report = json.loads(report_path.read_text())
    assert report["strict_iou"] == 1.0
    assert report["loose_iou"] == 1.0


def test_cli_train_determinism(workdir, tmp_path):
    cfg = tmp_path / "train.cfg"
    cfg.write_text("epochs=1\niters_per_epoch=2\nrecon_only=on\nseed=7\n")
    runner = CliRunner()
    outs = []
    for name in ("r1", "r2"):
        res = runner.invoke(main, [
            "train", "--config", str(cfg), "--contents", str(workdir / "contents"),
            "--exemplars", str(workdir / "exemplars"), "--out", str(tmp_path / name),
        ])
        assert res.exit_code == 0, res.output
        outs.append(tmp_path / name)
    a, b = (sorted(o.glob("*.dgck"))[-1] for o in outs)
    assert a.read_bytes() == b.read_bytes()
    assert (outs[0] / "loss_log.csv").read_text() == (outs[1] / "loss_log.csv").read_text()


def test_cli_runtime_error_exits_1(tmp_path):
    res = CliRunner().invoke(main, [
        "evaluate", "--manifest", str(tmp_path / "nope.txt"), "--out", str(tmp_path / "r.json"),
    ])
    assert res.exit_code == 2  # nonexistent path rejected by click validation
    bad = tmp_path / "manifest.txt"
    bad.write_text("output a b c d e\n")
    res = CliRunner().invoke(main, [
        "evaluate", "--manifest", str(bad), "--out", str(tmp_path / "r.json"),
    ])
    assert res.exit_code == 1
    assert res.output.strip() != ""


# ---------------------------------------------------------------------------
# HTTP API


def test_http_health(client):
    r = client.get("/api/health")
    assert r.status_code == 200 and r.json() == {"status": "ok"}


def test_http_styles_and_embedding(client):
    styles = client.get("/api/styles").json()
    assert {s["id"] for s in styles} == {"ex0", "ex1", "ex2"}
    assert all(len(s["point"]) == 2 for s in styles)
    emb = client.get("/api/embedding").json()
    assert set(emb) >= {"ids", "points", "triangles", "codes"}


def test_http_contents(client):
    contents = client.get("/api/contents").json()
    ids = {c["id"] for c in contents}
    assert {"c0", "c1", "c2"} <= ids
    assert all(len(c["dims"]) == 3 for c in contents)


def test_http_detailize_blob_and_echo(client):
    req = {"content_id": "c0", "style": {"id": "ex0"}, "postprocess": "none"}
    r = client.post("/api/detailize", json=req)
    assert r.status_code == 200
    assert r.headers["content-type"].startswith("application/octet-stream")
    echo = json.loads(r.headers["X-Detailize-Request"])
    assert echo["content_id"] == "c0"
    mesh = blob_to_mesh(r.content)
    assert len(mesh.triangles) > 0


def test_http_detailize_obj_fallback(client):
    req = {"content_id": "c0", "style": {"id": "ex0"}}
    r = client.post("/api/detailize", json=req, headers={"Accept": "model/obj"})
    assert r.status_code == 200
    assert r.text.startswith("v ")


def test_http_vertex_point_equals_style_id(client):
    emb = client.get("/api/embedding").json()
    idx = emb["ids"].index("ex1")
    point = emb["points"][idx]
    r_id = client.post("/api/detailize", json={"content_id": "c1", "style": {"id": "ex1"}})
    r_pt = client.post("/api/detailize", json={"content_id": "c1", "style": {"point": point}})
    assert r_id.status_code == r_pt.status_code == 200
    assert r_id.content == r_pt.content


def test_http_interpolated_point(client):
    emb = client.get("/api/embedding").json()
    pts = np.array(emb["points"])
    centroid = pts.mean(axis=0).tolist()
    r = client.post("/api/detailize", json={"content_id": "c0", "style": {"point": centroid}})
    assert r.status_code == 200
    assert len(blob_to_mesh(r.content).triangles) > 0


def test_http_errors(client):
    assert client.post("/api/detailize", json={"content_id": "nope", "style": {"id": "ex0"}}).status_code == 404
    assert client.post("/api/detailize", json={"content_id": "c0", "style": {"id": "nope"}}).status_code == 404
    r = client.post("/api/detailize", json={"style": {"id": "ex0"}})
    assert r.status_code == 400
    assert "error" in r.json()
    assert client.post("/api/detailize", json={"content_id": "c0", "style": {}}).status_code == 400
    assert client.post("/api/detailize", json={"content_id": "too_big", "style": {"id": "ex0"}}).status_code == 413


def test_http_concurrent_equals_serial(client):
    reqs = [
        {"content_id": f"c{i % 3}", "style": {"id": f"ex{(i + 1) % 3}"}} for i in range(6)
    ]
    serial = [client.post("/api/detailize", json=r).content for r in reqs]
    with ThreadPoolExecutor(max_workers=4) as pool:
        concurrent = list(pool.map(lambda r: client.post("/api/detailize", json=r).content, reqs))
    assert serial == concurrent
