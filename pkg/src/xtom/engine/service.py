"""HTTP+JSON face of the engine.

Every response carries the session's phase and turn; error bodies are
``{"code", "message"}`` with the stable error codes. Sessions are
serialized per id; distinct sessions run concurrently.
"""

from __future__ import annotations

from pathlib import Path

from fastapi import Depends, FastAPI, Header, HTTPException, Request
from fastapi.responses import FileResponse, JSONResponse
from fastapi.staticfiles import StaticFiles

from .. import __version__
from ..errors import (
    ConflictingAnswer,
    NoBubblesYet,
    RangeError,
    TurnLimit,
    UnknownQuestion,
    UnknownScene,
    UnknownSession,
    UnknownTask,
    WrongPhase,
    XTomError,
)
from ..evaluator import SatisfactionSurvey
from ..policy import backend_name
from .session import GameEngine, GameSession, Mode, bubble_wire

_NOT_FOUND = (UnknownScene, UnknownSession, UnknownTask, UnknownQuestion)
_CONFLICT = (WrongPhase, TurnLimit, NoBubblesYet, ConflictingAnswer, RangeError)


def _status_for(exc: XTomError) -> int:
    if isinstance(exc, _NOT_FOUND):
        return 404
    if isinstance(exc, _CONFLICT):
        return 409
    return 400


def session_view(session: GameSession) -> dict:
    view = {
        "session": session.id,
        "phase": session.phase.value,
        "turn": session.turn,
        "scene": session.scene.id,
        "task": session.task.id,
        "mode": session.mode.value,
        "task_labels": list(session.task.labels),
        "bubbles": [bubble_wire(b) for b in session.history.bubbles],
        "questions_asked": list(session.history.questions),
        "succeeded": session.succeeded,
    }
    if session.report is not None:
        view["report"] = session.report.as_dict()
    return view


def _with_state(session: GameSession, payload: dict) -> dict:
    payload.setdefault("phase", session.phase.value)
    payload.setdefault("turn", session.turn)
    return payload


def create_app(
    engine: GameEngine,
    token: str | None = None,
    ui_dir: str | Path | None = None,
) -> FastAPI:
    app = FastAPI(title="xtom", version=__version__)

    async def require_token(authorization: str | None = Header(default=None)):
        if token and authorization != f"Bearer {token}":
            raise HTTPException(status_code=401, detail="missing or bad bearer token")

    dep = [Depends(require_token)]

    @app.exception_handler(XTomError)
    async def _domain_error(_request: Request, exc: XTomError):
        return JSONResponse(
            status_code=_status_for(exc), content={"code": exc.code, "message": exc.message}
        )

    @app.get("/healthz")
    def healthz():
        return {
            "version": __version__,
            "grammar_hash": engine.world.grammar.hash,
            "kernel_backend": backend_name(),
            "sessions": len(engine.sessions),
        }

    @app.post("/sessions", dependencies=dep)
    def create_session(body: dict):
        scene = body.get("scene")
        task = body.get("task")
        if not scene or not task:
            raise HTTPException(status_code=400, detail="body needs scene and task ids")
        session = engine.create_session(
            scene_id=scene,
            task_id=task,
            mode=Mode(body.get("mode", "human")),
            seed=int(body.get("seed", 0)),
        )
        return session_view(session)

    @app.get("/sessions/{session_id}", dependencies=dep)
    def get_session(session_id: str):
        return session_view(engine.get_session(session_id))

    @app.post("/sessions/{session_id}/ask", dependencies=dep)
    def ask(session_id: str, body: dict):
        qid = body.get("question_id")
        if not qid:
            raise HTTPException(status_code=400, detail="body needs question_id")
        session = engine.get_session(session_id)
        with session.lock:
            bubble = engine.ask(session, qid)
            return _with_state(session, {"bubble": bubble_wire(bubble)})

    @app.post("/sessions/{session_id}/attempt", dependencies=dep)
    def attempt(session_id: str, body: dict):
        session = engine.get_session(session_id)
        for key in ("answer", "cf", "sf"):
            if key not in body:
                raise HTTPException(status_code=400, detail=f"body needs {key}")
        with session.lock:
            ss, reward, transitioned = engine.submit_attempt(
                session,
                str(body["answer"]),
                int(body["cf"]),
                int(body["sf"]),
                response_time_ms=body.get("response_time_ms"),
            )
            return _with_state(
                session, {"ss": ss, "reward": reward, "transitioned": transitioned}
            )

    @app.get("/sessions/{session_id}/phase2/questions", dependencies=dep)
    def phase2_questions(session_id: str):
        session = engine.get_session(session_id)
        with session.lock:
            questions = engine.phase2_questions(session)
            return _with_state(
                session,
                {
                    "questions": [
                        {
                            "id": q.id,
                            "kind": q.kind,
                            "subject": q.subject,
                            "process": q.process.value,
                            "choices": list(q.choices),
                            "text": q.text,
                        }
                        for q in questions
                    ]
                },
            )

    @app.post("/sessions/{session_id}/phase2/answers", dependencies=dep)
    def phase2_answers(session_id: str, body: dict):
        answers = body.get("answers")
        if not isinstance(answers, list):
            raise HTTPException(status_code=400, detail="body needs answers: [[question_id, choice]]")
        session = engine.get_session(session_id)
        with session.lock:
            report = engine.run_phase2(session, [(str(a[0]), str(a[1])) for a in answers])
            return _with_state(session, {"report": report.as_dict()})

    @app.get("/sessions/{session_id}/report", dependencies=dep)
    def report(session_id: str):
        session = engine.get_session(session_id)
        if session.report is None:
            raise WrongPhase("no report yet: finish phase 2 first")
        return _with_state(session, {"report": session.report.as_dict()})

    @app.post("/sessions/{session_id}/satisfaction", dependencies=dep)
    def satisfaction(session_id: str, body: dict):
        session = engine.get_session(session_id)
        ratings = {k: v for k, v in body.items() if isinstance(v, int)}
        with session.lock:
            record = engine.submit_satisfaction(session, SatisfactionSurvey(ratings))
            return _with_state(session, {"stored": record})

    @app.get("/catalog/{task_id}", dependencies=dep)
    def catalog(task_id: str):
        cat = engine.catalog_for(task_id)
        task = engine.world.tasks[task_id]
        return {
            "task": task_id,
            "labels": list(task.labels),
            "questions": [
                {"id": q.id, "text": q.text, "subject": q.subject, "critical": q.critical}
                for q in cat.questions
            ],
        }

    @app.get("/scenes/{scene_id}/image", dependencies=dep)
    def scene_image(scene_id: str):
        scene = engine.world.scenes.get(scene_id)
        if scene is None:
            raise UnknownScene(f"no scene {scene_id!r}")
        if not scene.image_ref or not Path(scene.image_ref).exists():
            raise HTTPException(status_code=404, detail="scene has no raster")
        return FileResponse(scene.image_ref)

    @app.get("/scenes/{scene_id}/layout", dependencies=dep)
    def scene_layout(scene_id: str):
        """Part geometry for clients that render scenes synthetically."""
        scene = engine.world.scenes.get(scene_id)
        if scene is None:
            raise UnknownScene(f"no scene {scene_id!r}")
        return {
            "scene": scene_id,
            "parts": {
                nid: {"cx": r.cx, "cy": r.cy, "r": r.radius}
                for nid, r in sorted(scene.parts.items())
            },
        }

    if ui_dir is not None and Path(ui_dir).is_dir():
        app.mount("/", StaticFiles(directory=str(ui_dir), html=True), name="ui")

    return app
