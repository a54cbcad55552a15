"""HTTP JSON API for running a MOS study.

Endpoints:
  POST /sessions                 {"rater_id": ...} -> session view (resumes an
                                 existing session for a returning rater)
  GET  /sessions/{id}            full session view (for refresh/resume)
  GET  /sessions/{id}/next       current unanswered item or {"done": true}
  POST /sessions/{id}/scores     {"item_id": ..., "score": 1..5} -> ack
  GET  /report                   per-version MOS table
  GET  /stimuli/{token}          image bytes behind a version-obscured token

Item views never expose version labels; images are addressed only by opaque
tokens. Stimuli live on disk as <images_root>/<version>/<image_id>.<ext>.
"""

from pathlib import Path
from typing import Optional

from fastapi import FastAPI, HTTPException
from fastapi.responses import FileResponse, JSONResponse
from pydantic import BaseModel, Field

from ..errors import ConflictError, InputError, NoCapacityError
from .study import Session, SessionItem, Study

STIMULUS_SUFFIXES = (".png", ".bmp", ".jpg", ".jpeg")


class CreateSessionRequest(BaseModel):
    rater_id: str = Field(min_length=1)


class SubmitScoreRequest(BaseModel):
    item_id: str
    score: int


def _item_view(item: SessionItem) -> dict:
    # version labels and image ids stay server-side
    view = {
        "item_id": item.item_id,
        "kind": item.kind,
        "image_url": f"/stimuli/{item.token}",
    }
    if item.kind == "calibration":
        view["anchor_score"] = item.anchor_score
    return view


def _session_view(session: Session) -> dict:
    answered, total = session.progress
    calibration_done = sum(
        1 for it in session.items
        if it.kind == "calibration" and it.item_id in session.answered
    )
    current = session.next_item()
    return {
        "session_id": session.session_id,
        "progress": {"answered": answered, "total": total},
        "calibration": {
            "answered": calibration_done,
            "total": sum(1 for it in session.items if it.kind == "calibration"),
        },
        "done": session.done,
        "item": _item_view(current) if current else None,
    }


def build_app(study: Study, images_root: Optional[Path] = None) -> FastAPI:
    app = FastAPI(title="MOS study service")
    app.state.study = study
    images_root = Path(images_root) if images_root else None

    @app.exception_handler(InputError)
    async def _input_error(_, exc):
        return JSONResponse(status_code=422, content={"detail": str(exc)})

    @app.exception_handler(ConflictError)
    async def _conflict(_, exc):
        return JSONResponse(status_code=409, content={"detail": str(exc)})

    @app.exception_handler(NoCapacityError)
    async def _no_capacity(_, exc):
        return JSONResponse(status_code=409, content={"detail": str(exc)})

    @app.post("/sessions")
    def create_session(req: CreateSessionRequest) -> dict:
        session = study.create_session(req.rater_id)
        return _session_view(session)

    def _get_session(session_id: str) -> Session:
        session = study.sessions.get(session_id)
        if session is None:
            raise HTTPException(status_code=404, detail="unknown session")
        return session

    @app.get("/sessions/{session_id}")
    def session_state(session_id: str) -> dict:
        return _session_view(_get_session(session_id))

    @app.get("/sessions/{session_id}/next")
    def next_item(session_id: str) -> dict:
        session = _get_session(session_id)
        current = session.next_item()
        if current is None:
            return {"done": True, "item": None}
        return {"done": False, "item": _item_view(current)}

    @app.post("/sessions/{session_id}/scores")
    def submit_score(session_id: str, req: SubmitScoreRequest) -> dict:
        _get_session(session_id)
        return study.submit_score(session_id, req.item_id, req.score)

    @app.get("/report")
    def report() -> dict:
        return {"versions": study.aggregate(),
                "n_records": len(study.records)}

    @app.get("/stimuli/{token}")
    def stimulus(token: str):
        mapping = study.tokens.get(token)
        if mapping is None:
            # calibration tokens are not in the rating map; search sessions
            for session in study.sessions.values():
                for item in session.items:
                    if item.token == token:
                        mapping = (item.image_id, item.version)
                        break
                if mapping:
                    break
        if mapping is None:
            raise HTTPException(status_code=404, detail="unknown stimulus")
        if images_root is None:
            raise HTTPException(status_code=404, detail="no stimulus storage configured")
        image_id, version = mapping
        for suffix in STIMULUS_SUFFIXES:
            path = images_root / version / f"{image_id}{suffix}"
            if path.is_file():
                return FileResponse(path)
        raise HTTPException(status_code=404, detail="stimulus file missing")

    return app
