"""HTTP facade over the pipeline for the browser companion.

Sessions live in a directory-per-session layout under the service data
directory, so a restarted service (or a returning browser tab) finds
everything on disk:

    sessions/<id>/inputs/   uploaded grids, mask, AOIs
    sessions/<id>/out/      artifacts produced by the last registration job
    sessions/<id>/jobs/     one JSON status document per job

Registration jobs are queued into a small worker pool (one worker by
default: registration is CPU-bound, so jobs serialize rather than
interleave). Job state moves pending -> running -> done|error and never
regresses. All artifacts come from the same pipeline code the CLI drives,
so a service run and a CLI run with identical inputs produce byte-identical
files.
"""

from __future__ import annotations

import json
import threading
import uuid
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np
from fastapi import FastAPI, HTTPException, Request, UploadFile
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import FileResponse, PlainTextResponse, Response

from .errors import ChromalignError, ValidationError
from .grids import SIDECAR_SUFFIX, load_grid
from .masks import aoi_from_text, mask_from_text
from .pipeline import PipelineConfig, run_all
from .registration import RegistrationConfig

_GRID_SUFFIXES = (".png", ".bmp", ".csv")
_ARTIFACTS = {
    "peaks-ref": ("peaks_ref.csv", "text/csv"),
    "peaks-target": ("peaks_target.csv", "text/csv"),
    "warped-mask": ("warped_mask.mask", "text/plain"),
    "aligned-image": ("aligned.png", "image/png"),
    "scores": ("scores.json", "application/json"),
    "quant": ("quant_target.csv", "text/csv"),
}
_STATE_ORDER = {"pending": 0, "running": 1, "done": 2, "error": 2}


class JobRegistry:
    """Thread-safe job table with monotone state transitions, mirrored to disk."""

    def __init__(self):
        self._lock = threading.Lock()
        self._jobs: dict[str, dict] = {}

    def create(self, job_id: str, session_id: str, path: Path) -> None:
        with self._lock:
            self._jobs[job_id] = {
                "job_id": job_id,
                "session_id": session_id,
                "status": "pending",
                "path": str(path),
            }
            self._persist(job_id)

    def advance(self, job_id: str, status: str, **extra) -> None:
        with self._lock:
            job = self._jobs[job_id]
            if _STATE_ORDER[status] < _STATE_ORDER[job["status"]]:
                raise ValidationError(
                    f"job state may not regress: {job['status']} -> {status}"
                )
            job["status"] = status
            job.update(extra)
            self._persist(job_id)

    def get(self, job_id: str) -> dict | None:
        with self._lock:
            job = self._jobs.get(job_id)
            return dict(job) if job else None

    def restore(self, path: Path) -> None:
        doc = json.loads(path.read_text())
        # An interrupted run can never resume; report it honestly.
        if doc.get("status") in ("pending", "running"):
            doc["status"] = "error"
            doc["error"] = "service restarted while the job was in flight"
        with self._lock:
            self._jobs[doc["job_id"]] = doc

    def _persist(self, job_id: str) -> None:
        job = self._jobs[job_id]
        payload = {k: v for k, v in job.items() if k != "path"}
        Path(job["path"]).write_text(json.dumps(payload, sort_keys=True, indent=2))


def _registration_from_payload(payload: dict) -> tuple[RegistrationConfig, float, float]:
    h_common = payload.get("h", 50.0)
    reg = RegistrationConfig(
        w=float(payload.get("w", 0.3)),
        beta=float(payload.get("beta", 2.0)),
        lam=float(payload.get("lambda", payload.get("lam", 2.0))),
        mode=payload.get("mode", "hybrid"),
        kernel=payload.get("kernel", "as-printed"),
        max_iter=int(payload.get("max_iter", 150)),
        swap_axes=bool(payload.get("swap_axes", False)),
    )
    h_ref = float(payload.get("h_ref", h_common))
    h_target = float(payload.get("h_target", h_common))
    if not (h_ref > 0 and h_target > 0):
        raise ValidationError("h thresholds must be positive")
    return reg, h_ref, h_target


def create_app(data_dir, pool_size: int = 1, cors_origins=("*",)) -> FastAPI:
    data_dir = Path(data_dir)
    sessions_root = data_dir / "sessions"
    sessions_root.mkdir(parents=True, exist_ok=True)
    jobs = JobRegistry()
    for status_file in sessions_root.glob("*/jobs/*.json"):
        jobs.restore(status_file)
    executor = ThreadPoolExecutor(max_workers=pool_size)

    app = FastAPI(title="chromalign service")
    app.add_middleware(
        CORSMiddleware,
        allow_origins=list(cors_origins),
        allow_methods=["*"],
        allow_headers=["*"],
    )
    app.state.executor = executor

    def session_dir(session_id: str, must_exist: bool = True) -> Path:
        sdir = sessions_root / session_id
        if must_exist and not sdir.is_dir():
            raise HTTPException(404, f"unknown session {session_id!r}")
        return sdir

    def stored_grid_path(sdir: Path, which: str) -> Path:
        for suffix in _GRID_SUFFIXES:
            p = sdir / "inputs" / f"{which}{suffix}"
            if p.exists():
                return p
        raise HTTPException(409, f"session has no {which} grid")

    async def save_upload(
        upload: UploadFile,
        dest_dir: Path,
        stem: str,
        meta: UploadFile | None = None,
    ) -> Path:
        suffix = Path(upload.filename or "").suffix.lower()
        if suffix not in _GRID_SUFFIXES:
            raise HTTPException(422, f"unsupported grid container {suffix!r}")
        dest = dest_dir / f"{stem}{suffix}"
        dest.write_bytes(await upload.read())
        if meta is not None:
            sidecar = dest_dir / f"{stem}{suffix}{SIDECAR_SUFFIX}"
            sidecar.write_bytes(await meta.read())
        try:
            load_grid(dest)  # reject undecodable uploads immediately
        except ChromalignError as exc:
            dest.unlink(missing_ok=True)
            raise HTTPException(422, str(exc)) from exc
        return dest

    @app.post("/sessions")
    async def create_session(
        reference: UploadFile,
        target: UploadFile,
        mask: UploadFile | None = None,
        reference_meta: UploadFile | None = None,
        target_meta: UploadFile | None = None,
    ):
        session_id = uuid.uuid4().hex[:12]
        sdir = session_dir(session_id, must_exist=False)
        (sdir / "inputs").mkdir(parents=True)
        (sdir / "jobs").mkdir()
        await save_upload(reference, sdir / "inputs", "reference", reference_meta)
        await save_upload(target, sdir / "inputs", "target", target_meta)
        if mask is not None:
            text = (await mask.read()).decode()
            try:
                mask_from_text(text)
            except ChromalignError as exc:
                raise HTTPException(422, str(exc)) from exc
            (sdir / "inputs" / "mask.mask").write_text(text)
        return {"session_id": session_id}

    @app.put("/sessions/{session_id}/aoi/{which}")
    async def put_aoi(session_id: str, which: str, request: Request):
        if which not in ("ref", "target"):
            raise HTTPException(404, "AOI side must be 'ref' or 'target'")
        sdir = session_dir(session_id)
        text = (await request.body()).decode()
        try:
            aoi_from_text(text)
        except ChromalignError as exc:
            raise HTTPException(422, str(exc)) from exc
        (sdir / "inputs" / f"aoi_{which}.aoi").write_text(text)
        return {"stored": f"aoi_{which}"}

    @app.get("/sessions/{session_id}/aoi/{which}")
    def get_aoi(session_id: str, which: str):
        sdir = session_dir(session_id)
        p = sdir / "inputs" / f"aoi_{which}.aoi"
        if not p.exists():
            raise HTTPException(409, f"no {which} AOI stored yet")
        return PlainTextResponse(p.read_text())

    @app.put("/sessions/{session_id}/mask")
    async def put_mask(session_id: str, request: Request):
        sdir = session_dir(session_id)
        text = (await request.body()).decode()
        try:
            mask_from_text(text)
        except ChromalignError as exc:
            raise HTTPException(422, str(exc)) from exc
        (sdir / "inputs" / "mask.mask").write_text(text)
        return {"stored": "mask"}

    @app.get("/sessions/{session_id}/mask")
    def get_mask(session_id: str):
        sdir = session_dir(session_id)
        p = sdir / "inputs" / "mask.mask"
        if not p.exists():
            raise HTTPException(409, "no mask stored")
        return PlainTextResponse(p.read_text())

    @app.post("/sessions/{session_id}/register")
    def submit_register(session_id: str, payload: dict):
        sdir = session_dir(session_id)
        try:
            reg, h_ref, h_target = _registration_from_payload(payload)
        except (ChromalignError, TypeError, ValueError) as exc:
            raise HTTPException(422, f"invalid registration config: {exc}") from exc
        cfg = PipelineConfig(
            reference=str(stored_grid_path(sdir, "reference")),
            target=str(stored_grid_path(sdir, "target")),
            out_dir=str(sdir / "out"),
            mask=(
                str(sdir / "inputs" / "mask.mask")
                if (sdir / "inputs" / "mask.mask").exists()
                else None
            ),
            aoi_ref=(
                str(sdir / "inputs" / "aoi_ref.aoi")
                if (sdir / "inputs" / "aoi_ref.aoi").exists()
                else None
            ),
            aoi_target=(
                str(sdir / "inputs" / "aoi_target.aoi")
                if (sdir / "inputs" / "aoi_target.aoi").exists()
                else None
            ),
            h_ref=h_ref,
            h_target=h_target,
            registration=reg,
        )
        job_id = uuid.uuid4().hex[:12]
        jobs.create(job_id, session_id, sdir / "jobs" / f"{job_id}.json")

        def work():
            jobs.advance(job_id, "running")
            try:
                summary = run_all(cfg)
            except ChromalignError as exc:
                stage = getattr(exc, "stage", None)
                jobs.advance(
                    job_id,
                    "error",
                    error=str(exc),
                    category=exc.category,
                    stage=stage,
                )
            except Exception as exc:  # surface, never hang the job
                jobs.advance(job_id, "error", error=repr(exc), category="internal")
            else:
                jobs.advance(job_id, "done", summary=summary)

        executor.submit(work)
        return {"job_id": job_id}

    @app.get("/jobs/{job_id}")
    def job_status(job_id: str):
        job = jobs.get(job_id)
        if job is None:
            raise HTTPException(404, f"unknown job {job_id!r}")
        return {k: v for k, v in job.items() if k != "path"}

    @app.get("/sessions/{session_id}/artifacts/{kind}")
    def artifact(session_id: str, kind: str):
        sdir = session_dir(session_id)
        if kind not in _ARTIFACTS:
            raise HTTPException(404, f"unknown artifact kind {kind!r}")
        filename, media_type = _ARTIFACTS[kind]
        path = sdir / "out" / filename
        if not path.exists():
            raise HTTPException(409, f"artifact {kind!r} not produced yet")
        return FileResponse(path, media_type=media_type)

    @app.get("/sessions/{session_id}/render/{which}")
    def render(session_id: str, which: str):
        """8-bit PNG rendering of a stored grid, for canvas display."""
        sdir = session_dir(session_id)
        if which in ("reference", "target"):
            path = stored_grid_path(sdir, which)
        elif which == "aligned":
            path = sdir / "out" / "aligned.csv"
            if not path.exists():
                raise HTTPException(409, "no aligned grid yet")
        else:
            raise HTTPException(404, f"unknown render target {which!r}")
        grid = load_grid(path)
        return Response(_render_png(grid), media_type="image/png")

    @app.get("/sessions/{session_id}/geometry/{which}")
    def geometry(session_id: str, which: str):
        """Shape and axis calibration, so the client can map pixels to units."""
        sdir = session_dir(session_id)
        if which not in ("reference", "target"):
            raise HTTPException(404, f"unknown grid {which!r}")
        grid = load_grid(stored_grid_path(sdir, which))
        nr, nc = grid.shape
        return {
            "rows": nr,
            "cols": nc,
            "axis1_origin": grid.axis1_origin,
            "axis1_step": grid.axis1_step,
            "axis2_origin": grid.axis2_origin,
            "axis2_step": grid.axis2_step,
        }

    return app


def _render_png(grid) -> bytes:
    import io

    from PIL import Image

    v = grid.values
    span = v.max() - v.min()
    scaled = (v - v.min()) / span * 255.0 if span > 0 else np.zeros_like(v)
    buf = io.BytesIO()
    Image.fromarray(scaled.astype(np.uint8)).save(buf, format="PNG")
    return buf.getvalue()


def main(argv=None) -> int:
    import argparse

    import uvicorn

    parser = argparse.ArgumentParser(prog="chromalign-service")
    parser.add_argument("--data-dir", default="./chromalign-data")
    parser.add_argument("--host", default="127.0.0.1")
    parser.add_argument("--port", type=int, default=8077)
    parser.add_argument("--pool-size", type=int, default=1)
    parser.add_argument("--cors-origin", action="append", default=None)
    args = parser.parse_args(argv)
    app = create_app(
        args.data_dir,
        pool_size=args.pool_size,
        cors_origins=args.cors_origin or ["*"],
    )
    uvicorn.run(app, host=args.host, port=args.port, log_level="warning")
    return 0


if __name__ == "__main__":
    import sys

    sys.exit(main())
