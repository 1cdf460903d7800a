"""HTTP facade binding the engine to the authoring UI.

Every endpoint is a thin adapter over the library: identical inputs through
the API and through direct calls produce identical payloads. Reads share an
immutable index snapshot; mutations (quiz CRUD, index rebuild, inpaint asset
creation) serialize through the project writer lock.
"""

from __future__ import annotations

import hashlib
import io
import os
import threading
import time
from typing import Optional

import numpy as np
import uvicorn
from fastapi import FastAPI, HTTPException, Request
from fastapi.responses import FileResponse, JSONResponse, Response
from PIL import Image

from . import fusion, geometry, keyframes as keyframes_mod, quiz as quiz_mod, search as search_mod
from .corpus import Project, load_project
from .errors import MissingAsset, SurgqError

DEFAULT_ADDR = "127.0.0.1:8340"

ENV_ADDR = "SURGQ_ADDR"
ENV_PROJECT = "SURGQ_PROJECT"
ENV_INPAINT_URL = "SURGQ_INPAINT_URL"
ENV_UI_DIR = "SURGQ_UI_DIR"


def corpus_state_hash(project: Project) -> str:
    """Cheap digest of the frame inventory, used to flag stale indexes."""
    digest = hashlib.sha256()
    for entry in project.frames:
        digest.update(entry.frame_id.encode())
        digest.update(entry.classmap_path.encode())
    return digest.hexdigest()


class ApiSession:
    """One loaded project plus its active search index."""

    def __init__(self, project: Project, inpaint_url: Optional[str] = None):
        self.project = project
        self.inpaint_url = inpaint_url
        self.index: Optional[search_mod.FrameIndex] = None
        self.index_corpus_hash: Optional[str] = None
        self._scene_cache: dict[str, object] = {}
        self._keyframe_ids: Optional[set] = None
        self._build_lock = threading.Lock()

    def fused_scene(self, frame_id: str):
        if frame_id not in self._scene_cache:
            class_map, sections = self.project.load_pair(frame_id)
            self._scene_cache[frame_id] = fusion.fuse(class_map, sections)
        return self._scene_cache[frame_id]

    def index_stale(self) -> bool:
        return (
            self.index is not None
            and self.index_corpus_hash != corpus_state_hash(self.project)
        )

    def rebuild_index(
        self,
        grid_w: int = search_mod.DEFAULT_GRID_W,
        grid_h: int = search_mod.DEFAULT_GRID_H,
    ) -> search_mod.FrameIndex:
        with self._build_lock:
            corpus = [
                (entry.ref, self.fused_scene(entry.frame_id))
                for entry in self.project.frames
            ]
            index = search_mod.build_index(corpus, grid_w, grid_h)
            # publish atomically; in-flight searches keep the old snapshot
            self.index = index
            self.index_corpus_hash = corpus_state_hash(self.project)
            self.project.index_fingerprint = index.fingerprint
            self.project.index_grid = (grid_w, grid_h)
            return index

    def ensure_index(self) -> search_mod.FrameIndex:
        if self.index is None:
            return self.rebuild_index()
        return self.index

    def keyframe_ids(self) -> set:
        if self._keyframe_ids is None:
            ids = set()
            for video_id in self.project.videos:
                try:
                    series = self.project.load_features(video_id)
                except MissingAsset:
                    continue
                for ref in keyframes_mod.keyframes(series):
                    ids.add(ref.frame_id)
            self._keyframe_ids = ids
        return self._keyframe_ids


def _frame_payload(entry, keyframe_ids: set) -> dict:
    ref = entry.ref
    return {
        "id": ref.frame_id,
        "video": ref.video_id,
        "index": ref.frame_index,
        "timestamp_ms": ref.timestamp_ms,
        "keyframe": ref.frame_id in keyframe_ids,
        "image_url": f"/frames/{ref.frame_id}/image",
        "thumb_url": f"/frames/{ref.frame_id}/thumb",
        "polygons_url": f"/frames/{ref.frame_id}/polygons",
    }


def search_payload(result: search_mod.SearchResult) -> dict:
    return {
        "query_grid": list(result.query_grid),
        "results": [
            {
                "frame": {
                    "id": ref.frame_id,
                    "video": ref.video_id,
                    "index": ref.frame_index,
                    "timestamp_ms": ref.timestamp_ms,
                },
                "distance": dist,
                "thumb_url": f"/frames/{ref.frame_id}/thumb",
            }
            for ref, dist in result.ranked
        ],
    }


def grade_payload(session: ApiSession, quiz, body: dict) -> dict:
    q_idx = int(body.get("question", -1))
    if not 0 <= q_idx < len(quiz.questions):
        raise HTTPException(404, f"quiz has no question {q_idx}")
    question = quiz.questions[q_idx]
    answer = body.get("answer") or {}
    if isinstance(question, quiz_mod.McqQuestion):
        correct, feedback = quiz_mod.grade_mcq(question, answer.get("chosen", []))
        return {
            "type": "mcq",
            "correct": correct,
            "feedback": [quiz_mod._feedback_to_dict(fb) for fb in feedback],
        }
    if isinstance(question, quiz_mod.DrawPathQuestion):
        score, passed = quiz_mod.grade_path(question, answer.get("path", []))
        return {"type": "path", "score": score, "pass": passed}
    if isinstance(question, quiz_mod.ExtractComponentQuestion):
        tool = answer.get("tool")
        point = answer.get("placement")
        tool_ok = tool is not None and int(tool) in question.accepted_tools
        placement_ok = False
        if point is not None:
            w, h = session.project.canvas_size()
            region = quiz_mod.ring_region_mask(question.placement_ring, w, h)
            x, y = int(point[0]), int(point[1])
            placement_ok = 0 <= x < w and 0 <= y < h and bool(region[y, x])
        return {
            "type": "extract",
            "correct": tool_ok and placement_ok,
            "tool_ok": tool_ok,
            "placement_ok": placement_ok,
        }
    raise HTTPException(422, f"cannot grade question type {type(question).__name__}")


def create_app(
    project: Project,
    inpaint_url: Optional[str] = None,
    ui_dir: Optional[str] = None,
) -> FastAPI:
    session = ApiSession(project, inpaint_url)
    app = FastAPI(title="surgq", version="0.1.0")
    app.state.session = session

    ui_dir = ui_dir or os.environ.get(ENV_UI_DIR)
    if ui_dir and os.path.isdir(ui_dir):
        from fastapi.staticfiles import StaticFiles

        app.mount("/ui", StaticFiles(directory=ui_dir, html=True), name="ui")

    @app.exception_handler(SurgqError)
    async def surgq_error(_request: Request, exc: SurgqError):
        return JSONResponse(status_code=422, content={"detail": str(exc)})

    # -- frames ----------------------------------------------------------
    @app.get("/frames")
    def list_frames():
        keyframe_ids = session.keyframe_ids()
        return [_frame_payload(e, keyframe_ids) for e in project.frames]

    @app.get("/keyframes")
    def list_keyframes():
        keyframe_ids = session.keyframe_ids()
        return [
            _frame_payload(e, keyframe_ids)
            for e in project.frames
            if e.frame_id in keyframe_ids
        ]

    def _entry_or_404(frame_id: str):
        if not project.has_frame(frame_id):
            raise HTTPException(404, f"unknown frame {frame_id!r}")
        return project.frame(frame_id)

    @app.get("/frames/{frame_id}/image")
    def frame_image(frame_id: str):
        entry = _entry_or_404(frame_id)
        if entry.image_path is None:
            raise HTTPException(404, f"frame {frame_id!r} has no rendered image")
        return FileResponse(project.path(entry.image_path), media_type="image/png")

    @app.get("/frames/{frame_id}/thumb")
    def frame_thumb(frame_id: str):
        entry = _entry_or_404(frame_id)
        if entry.thumb_path is None:
            raise HTTPException(404, f"frame {frame_id!r} has no thumbnail")
        return FileResponse(project.path(entry.thumb_path), media_type="image/jpeg")

    @app.get("/frames/{frame_id}/polygons")
    def frame_polygons(frame_id: str):
        _entry_or_404(frame_id)
        scene = geometry.extract_polygons(session.fused_scene(frame_id))
        return geometry.scene_to_wire(scene)

    @app.get("/frames/{frame_id}/highlight")
    def frame_highlight(frame_id: str, section: int, style: str = "fill"):
        entry = _entry_or_404(frame_id)
        if entry.image_path is None:
            raise HTTPException(404, f"frame {frame_id!r} has no rendered image")
        fused = session.fused_scene(frame_id)
        if not 0 <= section < fused.section_mask.n_sections:
            raise HTTPException(404, f"frame {frame_id!r} has no section {section}")
        image = np.array(Image.open(project.path(entry.image_path)).convert("RGB"))
        region = fused.section_mask.sections == section
        class_id = fused.section_table[section].class_id
        out = quiz_mod.render_highlight(image, region, style, class_id=class_id)
        buf = io.BytesIO()
        Image.fromarray(out).save(buf, format="PNG")
        return Response(buf.getvalue(), media_type="image/png")

    # -- search ------------------------------------------------------------
    @app.post("/search")
    def run_search(body: dict):
        if session.index_stale():
            raise HTTPException(409, "index is stale; POST /index/rebuild first")
        try:
            scene = geometry.scene_from_wire(body["polygons"])
        except (KeyError, TypeError, ValueError, SurgqError) as exc:
            raise HTTPException(400, f"malformed polygons: {exc}") from exc
        if (scene.canvas_width, scene.canvas_height) != project.canvas_size():
            raise HTTPException(
                400,
                f"polygon canvas {scene.canvas_width}x{scene.canvas_height} does not "
                f"match project canvas {project.canvas[0]}x{project.canvas[1]}",
            )
        index = session.ensure_index()
        result = search_mod.search(
            index,
            scene,
            k=int(body.get("k", search_mod.DEFAULT_K)),
            min_gap_ms=int(body.get("min_gap_ms", search_mod.DEFAULT_MIN_GAP_MS)),
        )
        return search_payload(result)

    @app.post("/index/rebuild")
    def rebuild_index(body: Optional[dict] = None):
        body = body or {}
        grid_w = int(body.get("grid_w", search_mod.DEFAULT_GRID_W))
        grid_h = int(body.get("grid_h", search_mod.DEFAULT_GRID_H))
        index = session.rebuild_index(grid_w, grid_h)
        return {
            "fingerprint": index.fingerprint,
            "grid": [index.grid_w, index.grid_h],
            "frames": index.n_frames,
        }

    # -- quizzes -----------------------------------------------------------
    @app.get("/quizzes")
    def list_quizzes():
        out = []
        for quiz_id in project.quiz_ids:
            q = project.load_quiz(quiz_id)
            out.append({"id": q.quiz_id, "title": q.title, "questions": len(q.questions)})
        return out

    def _parse_and_validate_quiz(body: dict):
        try:
            q = quiz_mod.quiz_from_dict(body)
            quiz_mod.validate_quiz(q, project)
        except (KeyError, TypeError, ValueError) as exc:
            raise HTTPException(422, f"malformed quiz document: {exc}") from exc
        return q

    @app.post("/quizzes", status_code=201)
    def create_quiz(body: dict):
        q = _parse_and_validate_quiz(body)
        if project.quiz_path(q.quiz_id).is_file():
            raise HTTPException(409, f"quiz {q.quiz_id!r} already exists")
        now = int(time.time() * 1000)
        q = quiz_mod.Quiz(
            **{**quiz_asdict_fields(q), "created_ms": now, "modified_ms": now}
        )
        project.save_quiz(q)
        return quiz_mod.quiz_to_dict(q)

    @app.get("/quizzes/{quiz_id}")
    def get_quiz(quiz_id: str):
        try:
            return quiz_mod.quiz_to_dict(project.load_quiz(quiz_id))
        except MissingAsset as exc:
            raise HTTPException(404, str(exc)) from exc

    @app.put("/quizzes/{quiz_id}")
    def update_quiz(quiz_id: str, body: dict):
        q = _parse_and_validate_quiz(body)
        if q.quiz_id != quiz_id:
            raise HTTPException(400, "quiz id in body does not match the URL")
        try:
            existing = project.load_quiz(quiz_id)
        except MissingAsset as exc:
            raise HTTPException(404, str(exc)) from exc
        q = quiz_mod.Quiz(
            **{
                **quiz_asdict_fields(q),
                "created_ms": existing.created_ms,
                "modified_ms": int(time.time() * 1000),
            }
        )
        project.save_quiz(q)
        return quiz_mod.quiz_to_dict(q)

    @app.delete("/quizzes/{quiz_id}", status_code=204)
    def delete_quiz(quiz_id: str):
        try:
            project.delete_quiz(quiz_id)
        except (MissingAsset, ValueError) as exc:
            raise HTTPException(404, str(exc)) from exc
        return Response(status_code=204)

    @app.post("/quizzes/{quiz_id}/grade")
    def grade(quiz_id: str, body: dict):
        try:
            q = project.load_quiz(quiz_id)
        except MissingAsset as exc:
            raise HTTPException(404, str(exc)) from exc
        return grade_payload(session, q, body)

    # -- inpaint -----------------------------------------------------------
    @app.post("/inpaint")
    def inpaint_section(body: dict):
        frame_id = body.get("frame")
        section = body.get("section")
        if frame_id is None or section is None:
            raise HTTPException(400, "body needs 'frame' and 'section'")
        entry = _entry_or_404(frame_id)
        if entry.image_path is None:
            raise HTTPException(404, f"frame {frame_id!r} has no rendered image")
        fused = session.fused_scene(frame_id)
        section = int(section)
        if not 0 <= section < fused.section_mask.n_sections:
            raise HTTPException(404, f"frame {frame_id!r} has no section {section}")
        image = np.array(Image.open(project.path(entry.image_path)).convert("RGB"))
        mask = fused.section_mask.sections == section
        backend = (
            quiz_mod.RemoteInpaintBackend(session.inpaint_url)
            if session.inpaint_url
            else None
        )
        filled = quiz_mod.inpaint(image, mask, backend)
        asset_name = f"inpaint_{frame_id.replace(':', '_')}_{section}.png"
        with project.lock():
            Image.fromarray(filled).save(project.root / "assets" / asset_name)
        return {"asset": asset_name, "url": f"/assets/{asset_name}"}

    @app.get("/assets/{name}")
    def get_asset(name: str):
        path = project.root / "assets" / name
        if not path.is_file() or not path.resolve().is_relative_to(project.root.resolve()):
            raise HTTPException(404, f"no asset {name!r}")
        media = "image/png" if name.endswith(".png") else "application/octet-stream"
        return FileResponse(path, media_type=media)

    return app


def quiz_asdict_fields(q) -> dict:
    return {
        "quiz_id": q.quiz_id,
        "title": q.title,
        "questions": q.questions,
        "author": q.author,
        "created_ms": q.created_ms,
        "modified_ms": q.modified_ms,
        "source_videos": q.source_videos,
    }


def serve(
    project_path: str,
    addr: Optional[str] = None,
    inpaint_url: Optional[str] = None,
) -> None:
    """Load the project, build the app, and block serving HTTP."""
    addr = addr or os.environ.get(ENV_ADDR, DEFAULT_ADDR)
    inpaint_url = inpaint_url or os.environ.get(ENV_INPAINT_URL)
    project = load_project(project_path)
    app = create_app(project, inpaint_url)
    host, _, port = addr.partition(":")
    uvicorn.run(app, host=host or "127.0.0.1", port=int(port or 8340))
