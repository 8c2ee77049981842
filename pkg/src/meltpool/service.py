"""Local HTTP service backing the interactive annotation UI.

Sessions are held in memory and expire after an hour idle; the durable
artifact is the saved mask PNG. Masks travel as PNG bodies in the same
bit-exact encoding used on disk. Wire coordinates are (x, y) = (col, row).

Endpoints (JSON unless noted):

* ``POST /sessions`` - body = image bytes, returns ``{"id": ...}``
* ``GET /sessions/{id}/image`` - the session image as PNG
* ``POST /sessions/{id}/mgac`` - ``{cx, cy, a, b, rot}`` seed ellipse,
  returns the 7 candidate references plus the flood-fill diagnostic
* ``GET /sessions/{id}/candidates/{k}`` - candidate mask PNG (7 = diagnostic)
* ``POST /sessions/{id}/candidates/{k}/select`` - adopt candidate k
* ``POST /sessions/{id}/wand`` - ``{strokes: [{points: [[x, y], ...],
  radius}], tolerance}``, unions the selection onto the working mask
* ``POST /sessions/{id}/undo`` - pop the last working-mask change
* ``GET /sessions/{id}/mask`` - working mask PNG
* ``POST /sessions/{id}/save`` - ``{out_path}``, finalizes and writes the PNG
"""

from __future__ import annotations

import os
import threading
import time
import uuid
from collections import deque
from dataclasses import dataclass, field

import numpy as np
from fastapi import FastAPI, HTTPException, Request, Response

from . import annotate
from .raster import decode_raster, encode_image_png, encode_mask_png, save_mask, RasterError

SESSION_TTL_SECONDS = 3600
UNDO_DEPTH = 20


@dataclass
class Session:
    image: np.ndarray
    working: np.ndarray
    undo: deque = field(default_factory=lambda: deque(maxlen=UNDO_DEPTH))
    candidates: annotate.CandidateSet | None = None
    lock: threading.Lock = field(default_factory=threading.Lock)
    last_access: float = field(default_factory=time.monotonic)


def create_app(presets: list[annotate.MgacParams] | None = None) -> FastAPI:
    app = FastAPI(title="meltpool annotation service")
    sessions: dict[str, Session] = {}
    registry_lock = threading.Lock()

    def purge_expired() -> None:
        now = time.monotonic()
        with registry_lock:
            dead = [k for k, s in sessions.items() if now - s.last_access > SESSION_TTL_SECONDS]
            for k in dead:
                del sessions[k]

    def get_session(session_id: str) -> Session:
        purge_expired()
        with registry_lock:
            session = sessions.get(session_id)
        if session is None:
            raise HTTPException(status_code=404, detail="unknown session")
        session.last_access = time.monotonic()
        return session

    @app.post("/sessions")
    async def create_session(request: Request):
        data = await request.body()
        try:
            image = decode_raster(data)
        except RasterError as exc:
            raise HTTPException(status_code=400, detail=str(exc))
        session_id = uuid.uuid4().hex
        with registry_lock:
            sessions[session_id] = Session(
                image=image, working=np.zeros(image.shape[:2], dtype=bool)
            )
        return {"id": session_id}

    @app.get("/sessions/{session_id}/image")
    def get_image(session_id: str):
        session = get_session(session_id)
        return Response(content=encode_image_png(session.image), media_type="image/png")

    @app.post("/sessions/{session_id}/mgac")
    def run_mgac(session_id: str, seed: dict):
        session = get_session(session_id)
        try:
            ellipse = annotate.SeedEllipse(
                center_row=float(seed["cy"]),
                center_col=float(seed["cx"]),
                semi_axis_a=float(seed["a"]),
                semi_axis_b=float(seed["b"]),
                rotation=float(seed.get("rot", 0.0)),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise HTTPException(status_code=422, detail=f"bad seed ellipse: {exc}")
        with session.lock:
            try:
                session.candidates = annotate.generate_candidates(
                    session.image, ellipse, presets
                )
            except ValueError as exc:
                raise HTTPException(status_code=422, detail=str(exc))
            labels = [p.label for p in session.candidates.params]
        return {
            "candidates": [
                {
                    "index": k,
                    "label": labels[k],
                    "url": f"/sessions/{session_id}/candidates/{k}",
                }
                for k in range(7)
            ],
            "diagnostic_url": f"/sessions/{session_id}/candidates/7",
        }

    @app.get("/sessions/{session_id}/candidates/{index}")
    def get_candidate(session_id: str, index: int):
        session = get_session(session_id)
        if session.candidates is None:
            raise HTTPException(status_code=404, detail="no candidates computed")
        if index == 7:
            mask = session.candidates.diagnostic
        elif 0 <= index < 7:
            mask = session.candidates.candidates[index]
        else:
            raise HTTPException(status_code=422, detail="candidate index out of range")
        return Response(content=encode_mask_png(mask), media_type="image/png")

    @app.post("/sessions/{session_id}/candidates/{index}/select")
    def select_candidate(session_id: str, index: int):
        session = get_session(session_id)
        with session.lock:
            if session.candidates is None:
                raise HTTPException(status_code=404, detail="no candidates computed")
            if not 0 <= index < 7:
                raise HTTPException(status_code=422, detail="candidate index out of range")
            session.undo.append(session.working)
            session.working = session.candidates.candidates[index].copy()
        return {"mask_url": f"/sessions/{session_id}/mask"}

    @app.post("/sessions/{session_id}/wand")
    def wand(session_id: str, body: dict):
        session = get_session(session_id)
        try:
            tolerance = float(body["tolerance"])
            strokes = [
                annotate.BrushStroke(
                    points=tuple((int(y), int(x)) for x, y in stroke["points"]),
                    radius=int(stroke.get("radius", 3)),
                )
                for stroke in body["strokes"]
            ]
        except (KeyError, TypeError, ValueError) as exc:
            raise HTTPException(status_code=422, detail=f"bad wand request: {exc}")
        with session.lock:
            try:
                updated = annotate.wand_select(
                    session.image, strokes, tolerance, existing=session.working
                )
            except ValueError as exc:
                raise HTTPException(status_code=422, detail=str(exc))
            session.undo.append(session.working)
            session.working = updated
        return {"mask_url": f"/sessions/{session_id}/mask"}

    @app.post("/sessions/{session_id}/undo")
    def undo(session_id: str):
        session = get_session(session_id)
        with session.lock:
            if session.undo:
                session.working = session.undo.pop()
        return {"mask_url": f"/sessions/{session_id}/mask"}

    @app.get("/sessions/{session_id}/mask")
    def get_mask(session_id: str):
        session = get_session(session_id)
        return Response(content=encode_mask_png(session.working), media_type="image/png")

    @app.post("/sessions/{session_id}/save")
    def save(session_id: str, body: dict):
        session = get_session(session_id)
        out_path = body.get("out_path")
        if not out_path:
            raise HTTPException(status_code=422, detail="out_path required")
        with session.lock:
            if not session.working.any():
                raise HTTPException(status_code=409, detail="working mask is empty")
            final = annotate.finalize_mask(session.working)
            save_mask(final, out_path)
        return {"path": os.path.abspath(out_path)}

    static_dir = os.path.join(os.path.dirname(__file__), "..", "..", "frontend", "dist")
    static_dir = os.path.abspath(static_dir)
    if os.path.isdir(static_dir):
        from fastapi.staticfiles import StaticFiles

        app.mount("/", StaticFiles(directory=static_dir, html=True), name="ui")
    return app


def serve(port: int = 8787, presets: list[annotate.MgacParams] | None = None) -> None:
    """Run the annotation service on 127.0.0.1 (blocking)."""
    import uvicorn

    uvicorn.run(create_app(presets), host="127.0.0.1", port=port, log_level="warning")
