"""HTTP face of the artifact store.

Serves the public artifact URLs (GET) and accepts the bucket-protocol
writes (PUT) used by BucketStore clients. A GET on ``jobs/<id>/`` returns
a small JSON listing of the stored kinds, which is what user-facing
result URLs point at.
"""

from __future__ import annotations

from fastapi import FastAPI, Request
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse, Response

from qpu_gatekeeper.artifacts import (
    ArtifactKey,
    ArtifactKind,
    ArtifactNotFound,
    ArtifactStore,
    ImmutabilityViolation,
)


def build_app(store: ArtifactStore) -> FastAPI:
    app = FastAPI(title="artifact-store", docs_url=None, redoc_url=None)
    app.state.store = store
    app.add_middleware(
        CORSMiddleware, allow_origins=["*"], allow_methods=["GET", "PUT"], allow_headers=["*"]
    )

    @app.get("/health")
    async def health():
        return JSONResponse({"status": "up"})

    @app.get("/jobs/{job_id}/")
    async def listing(job_id: str):
        kinds = store.list_kinds(job_id)
        if not kinds:
            return JSONResponse({"error": f"no artifacts for job {job_id}"}, status_code=404)
        return JSONResponse(
            {
                "job_id": job_id,
                "kinds": sorted(k.value for k in kinds),
                "artifacts": {
                    k.value: store.public_url(ArtifactKey(job_id, k)) for k in sorted(kinds)
                },
            }
        )

    @app.get("/jobs/{job_id}/{filename}")
    async def fetch(job_id: str, filename: str):
        key = _key_for(job_id, filename)
        if key is None:
            return JSONResponse({"error": f"unknown artifact {filename!r}"}, status_code=404)
        try:
            data = store.get(key)
        except ArtifactNotFound:
            return JSONResponse({"error": f"{key.path} not found"}, status_code=404)
        return Response(content=data, media_type="application/json")

    @app.put("/jobs/{job_id}/{filename}")
    async def upload(job_id: str, filename: str, request: Request):
        key = _key_for(job_id, filename)
        if key is None:
            return JSONResponse({"error": f"unknown artifact {filename!r}"}, status_code=400)
        data = await request.body()
        if not data:
            return JSONResponse({"error": "empty body"}, status_code=400)
        try:
            store.put(key, data)
        except ImmutabilityViolation:
            return JSONResponse({"error": f"{key.path} is immutable"}, status_code=409)
        return Response(status_code=204)

    return app


def _key_for(job_id: str, filename: str) -> ArtifactKey | None:
    if not filename.endswith(".json"):
        return None
    try:
        kind = ArtifactKind(filename[: -len(".json")])
    except ValueError:
        return None
    return ArtifactKey(job_id, kind)
