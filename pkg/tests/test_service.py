import io
import json
import time
from pathlib import Path

import numpy as np
import pytest
from fastapi.testclient import TestClient

from chromalign.cli import main as cli_main
from chromalign.masks import aoi_to_text, mask_to_text, read_aoi, read_mask
from chromalign.service import create_app


@pytest.fixture(scope="module")
def synth_dir(tmp_path_factory):
    d = tmp_path_factory.mktemp("svc_synth")
    assert cli_main(
        ["synth", "--seed", "9", "--peaks", "100", "--shape", "100x150",
         "--out-dir", str(d)]
    ) == 0
    return d


@pytest.fixture()
def client(tmp_path):
    app = create_app(tmp_path / "data")
    with TestClient(app) as c:
        yield c


def upload_files(synth_dir, with_mask=True):
    files = {
        "reference": ("reference.csv", (synth_dir / "reference.csv").read_bytes()),
        "target": ("target.csv", (synth_dir / "target.csv").read_bytes()),
        "reference_meta": (
            "reference.csv.meta.json",
            (synth_dir / "reference.csv.meta.json").read_bytes(),
        ),
        "target_meta": (
            "target.csv.meta.json",
            (synth_dir / "target.csv.meta.json").read_bytes(),
        ),
    }
    if with_mask:
        files["mask"] = ("mask.mask", (synth_dir / "mask.mask").read_bytes())
    return files


def create_session(client, synth_dir, with_mask=True):
    resp = client.post("/sessions", files=upload_files(synth_dir, with_mask))
    assert resp.status_code == 200, resp.text
    return resp.json()["session_id"]


def wait_for(client, job_id, timeout=120.0):
    t0 = time.time()
    while time.time() - t0 < timeout:
        doc = client.get(f"/jobs/{job_id}").json()
        if doc["status"] in ("done", "error"):
            return doc
        time.sleep(0.05)
    raise TimeoutError("job did not finish")


def test_unknown_job_404(client):
    assert client.get("/jobs/doesnotexist").status_code == 404


def test_unknown_session_404(client):
    assert client.get("/sessions/nope/artifacts/scores").status_code == 404
    assert client.put("/sessions/nope/mask", content=b"x").status_code == 404


def test_artifact_before_job_409(client, synth_dir):
    sid = create_session(client, synth_dir)
    resp = client.get(f"/sessions/{sid}/artifacts/scores")
    assert resp.status_code == 409


def test_invalid_aoi_422(client, synth_dir):
    sid = create_session(client, synth_dir)
    resp = client.put(f"/sessions/{sid}/aoi/ref", content=b"chromalign-aoi 1\npolygon\t0,0 1,1 1,0 0,1\n")
    assert resp.status_code == 422


def test_invalid_config_422(client, synth_dir):
    sid = create_session(client, synth_dir)
    resp = client.post(f"/sessions/{sid}/register", json={"w": 1.5, "h": 40})
    assert resp.status_code == 422


def test_full_session_with_status_monotone(client, synth_dir):
    sid = create_session(client, synth_dir)
    for which in ("ref", "target"):
        resp = client.put(
            f"/sessions/{sid}/aoi/{which}",
            content=(synth_dir / f"aoi_{which}.aoi").read_bytes(),
        )
        assert resp.status_code == 200
    resp = client.post(
        f"/sessions/{sid}/register",
        json={"w": 0.25, "h": 40.0, "max_iter": 120},
    )
    assert resp.status_code == 200
    job_id = resp.json()["job_id"]

    seen = []
    t0 = time.time()
    while time.time() - t0 < 120:
        doc = client.get(f"/jobs/{job_id}").json()
        if not seen or doc["status"] != seen[-1]:
            seen.append(doc["status"])
        if doc["status"] in ("done", "error"):
            break
        time.sleep(0.02)
    assert seen[-1] == "done", doc
    order = {"pending": 0, "running": 1, "done": 2, "error": 2}
    ranks = [order[s] for s in seen]
    assert ranks == sorted(ranks), f"status regressed: {seen}"

    for kind in ("peaks-ref", "peaks-target", "warped-mask", "aligned-image",
                 "scores", "quant"):
        resp = client.get(f"/sessions/{sid}/artifacts/{kind}")
        assert resp.status_code == 200, kind
    scores = json.loads(client.get(f"/sessions/{sid}/artifacts/scores").content)
    assert "after" in scores


def test_artifacts_match_cli_outputs(client, synth_dir, tmp_path):
    sid = create_session(client, synth_dir)
    for which in ("ref", "target"):
        client.put(
            f"/sessions/{sid}/aoi/{which}",
            content=(synth_dir / f"aoi_{which}.aoi").read_bytes(),
        )
    job = client.post(
        f"/sessions/{sid}/register", json={"w": 0.3, "h": 40.0}
    ).json()
    doc = wait_for(client, job["job_id"])
    assert doc["status"] == "done"

    cli_out = tmp_path / "cli_out"
    assert cli_main([
        "run-all",
        "--reference", str(synth_dir / "reference.csv"),
        "--target", str(synth_dir / "target.csv"),
        "--mask", str(synth_dir / "mask.mask"),
        "--aoi-ref", str(synth_dir / "aoi_ref.aoi"),
        "--aoi-target", str(synth_dir / "aoi_target.aoi"),
        "--h", "40", "--w", "0.3",
        "--out-dir", str(cli_out),
    ]) == 0

    pairs = {
        "peaks-ref": "peaks_ref.csv",
        "peaks-target": "peaks_target.csv",
        "warped-mask": "warped_mask.mask",
        "aligned-image": "aligned.png",
        "scores": "scores.json",
        "quant": "quant_target.csv",
    }
    for kind, fname in pairs.items():
        service_bytes = client.get(f"/sessions/{sid}/artifacts/{kind}").content
        cli_bytes = (cli_out / fname).read_bytes()
        assert service_bytes == cli_bytes, f"{kind} differs from CLI output"


def test_mask_manual_adjustment_round_trip(client, synth_dir):
    sid = create_session(client, synth_dir)
    mask = read_mask(synth_dir / "mask.mask")
    # nudge one vertex of one blob, as the UI's vertex drag would
    blob = mask.blobs[0]
    verts = blob.polygon.vertices.copy()
    verts[0, 0] += 0.05
    from chromalign.geometry import Polygon
    from chromalign.masks import Blob, TemplateMask

    edited = TemplateMask(
        (Blob(blob.name, blob.family, Polygon(verts)),) + mask.blobs[1:]
    )
    resp = client.put(f"/sessions/{sid}/mask", content=mask_to_text(edited).encode())
    assert resp.status_code == 200
    stored = client.get(f"/sessions/{sid}/mask").text
    assert stored == mask_to_text(edited)


def test_geometry_and_render_endpoints(client, synth_dir):
    sid = create_session(client, synth_dir)
    geo = client.get(f"/sessions/{sid}/geometry/reference").json()
    assert geo["rows"] == 100 and geo["cols"] == 150
    png = client.get(f"/sessions/{sid}/render/reference")
    assert png.status_code == 200
    assert png.content[:8] == b"\x89PNG\r\n\x1a\n"


def test_job_error_state_carries_category(client, synth_dir):
    sid = create_session(client, synth_dir)
    resp = client.post(f"/sessions/{sid}/register", json={"h": 1e9})
    job_id = resp.json()["job_id"]
    doc = wait_for(client, job_id)
    assert doc["status"] == "error"
    assert doc["category"] == "empty-peaks"
    assert doc["stage"] == "extract-reference"
    # the failed job leaves no scores artifact behind
    assert client.get(f"/sessions/{sid}/artifacts/scores").status_code == 409


def test_pool_of_two_runs_both_jobs(tmp_path, synth_dir):
    app = create_app(tmp_path / "pool", pool_size=2)
    with TestClient(app) as c:
        sid1 = create_session(c, synth_dir)
        sid2 = create_session(c, synth_dir)
        j1 = c.post(f"/sessions/{sid1}/register", json={"h": 40.0, "w": 0.3}).json()
        j2 = c.post(f"/sessions/{sid2}/register", json={"h": 40.0, "w": 0.3}).json()
        d1 = wait_for(c, j1["job_id"])
        d2 = wait_for(c, j2["job_id"])
        assert d1["status"] == "done" and d2["status"] == "done"


def test_unknown_artifact_kind_404(client, synth_dir):
    sid = create_session(client, synth_dir)
    assert client.get(f"/sessions/{sid}/artifacts/nonsense").status_code == 404


def test_session_persists_on_disk(tmp_path, synth_dir):
    app = create_app(tmp_path / "data")
    with TestClient(app) as c:
        sid = create_session(c, synth_dir)
    sdir = tmp_path / "data" / "sessions" / sid
    assert (sdir / "inputs" / "reference.csv").exists()
    # a fresh app over the same data dir can resume the session
    app2 = create_app(tmp_path / "data")
    with TestClient(app2) as c2:
        geo = c2.get(f"/sessions/{sid}/geometry/reference")
        assert geo.status_code == 200
