"""HTTP job service: submit generation jobs, poll, fetch artifacts, iterate.

Jobs run on a bounded thread pool.  Every finished job leaves four
artifacts on disk (density.json, preview.png, model.stl, metrics.json)
plus an append-only JSONL history, so the store can be rebuilt after a
restart and iteration lineage keeps working across processes.
"""

from __future__ import annotations

import base64
import binascii
import io
import json
import os
import threading
import time
import uuid
from dataclasses import dataclass, field
from pathlib import Path
from concurrent.futures import ThreadPoolExecutor
from typing import Optional

import numpy as np
from fastapi import FastAPI, Request
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse, Response

from . import __version__, klm
from ._kernels import backend_name
from .artifacts import metrics_payload, result_files
from .backends import BackendKind, generate
from .model import (
    DensityField,
    GridDims,
    ProblemSpec,
    spec_from_dict,
    spec_to_dict,
    validate_problem,
)
from .sketch import DegenerateArrow, EmptyShape, parse_sketch_file

QUEUED = "QUEUED"
RUNNING = "RUNNING"
DONE = "DONE"
FAILED = "FAILED"

ARTIFACT_KINDS = ("density.json", "preview.png", "model.stl", "metrics.json")

ENV_PORT = "TOPOSTUDIO_PORT"
ENV_HOST = "TOPOSTUDIO_HOST"
ENV_DATA_DIR = "TOPOSTUDIO_DATA_DIR"
ENV_WORKERS = "TOPOSTUDIO_WORKERS"
ENV_REMOTE_URL = "TOPOSTUDIO_REMOTE_URL"


@dataclass
class ServiceConfig:
    host: str = "127.0.0.1"
    port: int = 8765
    data_dir: str = "topostudio_data"
    workers: int = 0  # 0 means one per CPU
    remote_url: Optional[str] = None
    max_image_pixels: int = 4096 * 4096
    cors_origins: tuple = ("*",)

    @classmethod
    def from_env(cls, **overrides) -> "ServiceConfig":
        cfg = {}
        if os.environ.get(ENV_HOST):
            cfg["host"] = os.environ[ENV_HOST]
        if os.environ.get(ENV_PORT):
            cfg["port"] = int(os.environ[ENV_PORT])
        if os.environ.get(ENV_DATA_DIR):
            cfg["data_dir"] = os.environ[ENV_DATA_DIR]
        if os.environ.get(ENV_WORKERS):
            cfg["workers"] = int(os.environ[ENV_WORKERS])
        if os.environ.get(ENV_REMOTE_URL):
            cfg["remote_url"] = os.environ[ENV_REMOTE_URL]
        cfg.update({k: v for k, v in overrides.items() if v is not None})
        return cls(**cfg)


@dataclass
class JobRecord:
    id: str
    state: str
    spec: ProblemSpec
    backend: BackendKind
    height: float
    parent_id: Optional[str]
    created_at: float
    finished_at: Optional[float] = None
    error: Optional[str] = None
    metrics: Optional[dict] = None
    density: Optional[DensityField] = field(default=None, repr=False)

    def summary(self) -> dict:
        return {
            "id": self.id,
            "state": self.state,
            "backend": self.backend.name,
            "parent_id": self.parent_id,
            "created_at": self.created_at,
            "finished_at": self.finished_at,
            "error": self.error,
            "metrics": self.metrics,
        }


class JobStore:
    """Thread-safe job registry backed by a JSONL history file."""

    def __init__(self, data_dir):
        self.data_dir = Path(data_dir)
        self.data_dir.mkdir(parents=True, exist_ok=True)
        self.log_path = self.data_dir / "jobs.jsonl"
        self._lock = threading.RLock()
        self._jobs: dict = {}
        self._replay()

    def _replay(self):
        if not self.log_path.exists():
            return
        with open(self.log_path, "r", encoding="utf-8") as fh:
            for line in fh:
                line = line.strip()
                if not line:
                    continue
                entry = json.loads(line)
                if entry["event"] == "submitted":
                    record = JobRecord(
                        id=entry["id"],
                        state=QUEUED,
                        spec=spec_from_dict(entry["spec"]),
                        backend=BackendKind(entry["backend"], entry.get("url")),
                        height=entry.get("height", 10.0),
                        parent_id=entry.get("parent_id"),
                        created_at=entry["ts"],
                    )
                    self._jobs[record.id] = record
                elif entry["event"] == "finished":
                    record = self._jobs.get(entry["id"])
                    if record is None:
                        continue
                    record.state = entry["state"]
                    record.finished_at = entry["ts"]
                    record.error = entry.get("error")
                    record.metrics = entry.get("metrics")
        # anything still pending belonged to a previous process
        for record in self._jobs.values():
            if record.state in (QUEUED, RUNNING):
                record.state = FAILED
                record.error = "interrupted by service restart"

    def _append(self, entry: dict):
        with open(self.log_path, "a", encoding="utf-8") as fh:
            fh.write(json.dumps(entry, sort_keys=True) + "\n")

    def artifact_dir(self, job_id: str) -> Path:
        return self.data_dir / "artifacts" / job_id

    def add(self, record: JobRecord):
        with self._lock:
            self._jobs[record.id] = record
            self._append(
                {
                    "event": "submitted",
                    "id": record.id,
                    "ts": record.created_at,
                    "spec": spec_to_dict(record.spec),
                    "backend": record.backend.name,
                    "url": record.backend.url,
                    "height": record.height,
                    "parent_id": record.parent_id,
                }
            )

    def get(self, job_id: str) -> Optional[JobRecord]:
        with self._lock:
            return self._jobs.get(job_id)

    def mark_running(self, job_id: str):
        with self._lock:
            self._jobs[job_id].state = RUNNING

    def mark_done(self, job_id: str, metrics: dict, density: DensityField):
        with self._lock:
            record = self._jobs[job_id]
            record.state = DONE
            record.metrics = metrics
            record.density = density
            record.finished_at = time.time()
            self._append(
                {
                    "event": "finished",
                    "id": job_id,
                    "ts": record.finished_at,
                    "state": DONE,
                    "metrics": metrics,
                }
            )

    def mark_failed(self, job_id: str, error: str):
        with self._lock:
            record = self._jobs[job_id]
            record.state = FAILED
            record.error = error
            record.finished_at = time.time()
            self._append(
                {
                    "event": "finished",
                    "id": job_id,
                    "ts": record.finished_at,
                    "state": FAILED,
                    "error": error,
                }
            )

    def result_density(self, job_id: str) -> DensityField:
        """Density of a DONE job, reloaded from disk when not in memory."""
        record = self.get(job_id)
        if record is None or record.state != DONE:
            raise KeyError(job_id)
        if record.density is not None:
            return record.density
        path = self.artifact_dir(job_id) / "density.json"
        data = json.loads(path.read_text())
        dims = GridDims(data["dims"]["nelx"], data["dims"]["nely"])
        density = DensityField(dims, np.asarray(data["values"], dtype=float))
        with self._lock:
            record.density = density
        return density


class JobService:
    def __init__(self, config: Optional[ServiceConfig] = None):
        self.config = config or ServiceConfig()
        self.store = JobStore(self.config.data_dir)
        workers = self.config.workers or os.cpu_count() or 2
        self.pool = ThreadPoolExecutor(max_workers=workers)

    def close(self):
        self.pool.shutdown(wait=True)

    def submit(
        self,
        spec: ProblemSpec,
        backend: BackendKind,
        height: float = 10.0,
        parent_id: Optional[str] = None,
        base: Optional[DensityField] = None,
    ) -> JobRecord:
        record = JobRecord(
            id=uuid.uuid4().hex[:16],
            state=QUEUED,
            spec=spec,
            backend=backend,
            height=height,
            parent_id=parent_id,
            created_at=time.time(),
        )
        self.store.add(record)
        self.pool.submit(self._run, record.id, base)
        return record

    def _run(self, job_id: str, base: Optional[DensityField]):
        record = self.store.get(job_id)
        self.store.mark_running(job_id)
        try:
            result = generate(
                record.spec,
                record.backend,
                base=base,
                timeout=60.0,
            )
            metrics = metrics_payload(result, record.backend.name)
            self._write_artifacts(record, result.density, metrics)
            self.store.mark_done(job_id, metrics, result.density)
        except Exception as exc:  # noqa: BLE001 - job must record any failure
            self.store.mark_failed(job_id, f"{type(exc).__name__}: {exc}")

    def _write_artifacts(self, record: JobRecord, density: DensityField, metrics: dict):
        directory = self.store.artifact_dir(record.id)
        directory.mkdir(parents=True, exist_ok=True)
        files = result_files(record.spec, density, metrics, record.height)
        for name, payload in files.items():
            tmp = directory / (name + ".tmp")
            tmp.write_bytes(payload)
            os.replace(tmp, directory / name)


def _error(status: int, message: str) -> JSONResponse:
    return JSONResponse(status_code=status, content={"error": message})


def _issues(issues: list) -> JSONResponse:
    return JSONResponse(status_code=422, content={"issues": issues})


def _decode_sketch_payload(payload: dict, config: ServiceConfig):
    """base64 PNG + params -> (spec, issues) or an error response."""
    try:
        raw = base64.b64decode(payload["sketch"], validate=True)
    except (binascii.Error, TypeError, ValueError):
        return _error(400, "sketch is not valid base64")
    from PIL import Image

    try:
        with Image.open(io.BytesIO(raw)) as img:
            width, height = img.size
    except Exception:
        return _error(400, "sketch is not a decodable image")
    if width * height > config.max_image_pixels:
        return _error(413, f"image exceeds {config.max_image_pixels} pixels")
    if "volfrac" not in payload:
        return _error(400, "volfrac is required with a sketch")
    dims_raw = payload.get("dims") or {}
    try:
        dims = GridDims(int(dims_raw.get("nelx", 64)), int(dims_raw.get("nely", 64)))
        return parse_sketch_file(
            raw,
            dims,
            float(payload["volfrac"]),
            strength=float(payload.get("strength", 0.8)),
            seed=int(payload.get("seed", 0)),
            arrow_point=str(payload.get("arrow_point", "tail")),
        )
    except EmptyShape:
        return _issues(["empty shape"])
    except DegenerateArrow as exc:
        return _issues([str(exc)])
    except ValueError as exc:
        return _error(400, str(exc))


def _pick_backend(payload: dict, config: ServiceConfig):
    name = payload.get("backend", "stochastic")
    if name == "deterministic":
        return BackendKind.deterministic()
    if name == "stochastic":
        return BackendKind.stochastic()
    if name == "remote":
        url = payload.get("remote_url") or config.remote_url
        if not url:
            return _error(400, "remote backend requested but no remote URL configured")
        return BackendKind.remote(url)
    return _error(400, f"unknown backend {name!r}")


def create_app(config: Optional[ServiceConfig] = None, service: Optional[JobService] = None):
    config = config or ServiceConfig.from_env()
    svc = service or JobService(config)
    app = FastAPI(title="topostudio", version=__version__)
    app.state.service = svc
    app.add_middleware(
        CORSMiddleware,
        allow_origins=list(config.cors_origins),
        allow_methods=["*"],
        allow_headers=["*"],
    )

    async def _json_body(request: Request):
        try:
            payload = await request.json()
        except Exception:
            return None
        return payload if isinstance(payload, dict) else None

    @app.post("/api/v1/jobs", status_code=202)
    async def submit_job(request: Request):
        payload = await _json_body(request)
        if payload is None:
            return _error(400, "body must be a JSON object")
        if ("spec" in payload) == ("sketch" in payload):
            return _error(400, "provide exactly one of 'spec' or 'sketch'")

        if "sketch" in payload:
            parsed = _decode_sketch_payload(payload, config)
            if isinstance(parsed, JSONResponse):
                return parsed
            spec, issues = parsed
        else:
            try:
                spec = spec_from_dict(payload["spec"])
                for key, cast in (("volfrac", float), ("strength", float), ("seed", int)):
                    if key in payload:
                        spec = spec.replace(**{key: cast(payload[key])})
            except (ValueError, KeyError, TypeError) as exc:
                return _error(400, f"malformed spec: {exc}")
            issues = validate_problem(spec)
        if issues:
            return _issues(issues)

        backend = _pick_backend(payload, config)
        if isinstance(backend, JSONResponse):
            return backend
        try:
            height = float(payload.get("height", 10.0))
        except (TypeError, ValueError):
            return _error(400, "height must be a number")
        if height <= 0:
            return _error(400, "height must be positive")
        record = svc.submit(spec, backend, height=height)
        return {"id": record.id, "state": record.state}

    @app.post("/api/v1/jobs/{job_id}/iterate", status_code=202)
    async def iterate_job(job_id: str, request: Request):
        payload = await _json_body(request)
        if payload is None:
            return _error(400, "body must be a JSON object")
        parent = svc.store.get(job_id)
        if parent is None:
            return _error(404, f"unknown job {job_id!r}")
        if parent.state != DONE:
            return _error(409, f"parent job is {parent.state}, not {DONE}")

        overrides = {}
        try:
            for key, cast in (("volfrac", float), ("strength", float), ("seed", int)):
                if key in payload:
                    overrides[key] = cast(payload[key])
        except (ValueError, TypeError):
            return _error(400, "volfrac/strength must be numbers, seed an integer")
        spec = parent.spec
        if "mask_sketch" in payload:
            masked = _rasterize_mask_layer(payload["mask_sketch"], spec, config)
            if isinstance(masked, JSONResponse):
                return masked
            overrides["mask"] = masked
        elif "mask" in payload:
            try:
                mask = np.asarray(payload["mask"], dtype=bool)
            except (ValueError, TypeError):
                return _error(400, "mask must be a 0/1 array")
            if mask.size != spec.dims.num_elements:
                return _error(400, "mask length does not match the grid")
            overrides["mask"] = mask
        try:
            spec = spec.replace(**overrides)
        except (ValueError, TypeError) as exc:
            return _error(400, f"bad override: {exc}")
        issues = validate_problem(spec)
        if issues:
            return _issues(issues)

        if "backend" in payload:
            backend = _pick_backend(payload, config)
            if isinstance(backend, JSONResponse):
                return backend
        else:
            backend = parent.backend
        base = svc.store.result_density(job_id)
        record = svc.submit(
            spec, backend, height=parent.height, parent_id=job_id, base=base
        )
        return {"id": record.id, "state": record.state, "parent_id": job_id}

    @app.get("/api/v1/jobs/{job_id}")
    async def job_status(job_id: str):
        record = svc.store.get(job_id)
        if record is None:
            return _error(404, f"unknown job {job_id!r}")
        return record.summary()

    @app.get("/api/v1/jobs/{job_id}/artifacts/{kind}")
    async def job_artifact(job_id: str, kind: str):
        record = svc.store.get(job_id)
        if record is None:
            return _error(404, f"unknown job {job_id!r}")
        if kind not in ARTIFACT_KINDS:
            return _error(404, f"unknown artifact kind {kind!r}")
        if record.state != DONE:
            return _error(409, f"job is {record.state}, not {DONE}")
        path = svc.store.artifact_dir(job_id) / kind
        if not path.exists():
            return _error(404, f"artifact {kind} missing on disk")
        media = {
            "density.json": "application/json",
            "metrics.json": "application/json",
            "preview.png": "image/png",
            "model.stl": "application/octet-stream",
        }[kind]
        return Response(content=path.read_bytes(), media_type=media)

    @app.get("/api/v1/klm")
    async def klm_endpoint(workflow: str = "drawer", n: int = 0):
        if n < 0:
            return _error(400, "n must be >= 0")
        try:
            wf = klm.get_workflow(workflow)
        except ValueError as exc:
            return _error(400, str(exc))
        result = klm.workflow_time(wf, n)
        return {
            "workflow": workflow,
            "iterations": n,
            "total_s": round(result.total, 2),
            "per_operator": {k: round(v, 2) for k, v in result.per_operator.items()},
        }

    @app.get("/api/v1/health")
    async def health():
        return {"status": "ok", "version": __version__, "kernel": backend_name()}

    return app


def _rasterize_mask_layer(encoded: str, spec: ProblemSpec, config: ServiceConfig):
    """Cyan pixels of a sketch layer become the new mask, clipped to shape."""
    from PIL import Image

    from .sketch import CanvasMap, _element_classes, classify_pixels, load_sketch

    try:
        raw = base64.b64decode(encoded, validate=True)
    except (binascii.Error, TypeError, ValueError):
        return _error(400, "mask_sketch is not valid base64")
    try:
        with Image.open(io.BytesIO(raw)) as img:
            width, height = img.size
    except Exception:
        return _error(400, "mask_sketch is not a decodable image")
    if width * height > config.max_image_pixels:
        return _error(413, f"image exceeds {config.max_image_pixels} pixels")
    sketch = classify_pixels(load_sketch(raw))
    canvas = CanvasMap.fit(spec.dims, sketch.width, sketch.height)
    _, mask = _element_classes(sketch, spec.dims, canvas)
    return mask & spec.shape


def run_server(config: Optional[ServiceConfig] = None):
    import uvicorn

    config = config or ServiceConfig.from_env()
    uvicorn.run(create_app(config), host=config.host, port=config.port)
