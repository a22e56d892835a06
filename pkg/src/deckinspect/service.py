"""HTTP/JSON façade over sessions, images, and the capture store.

Layout under the data root:

    images/            content-addressed PNG blobs, SHA-256 hex filenames
    sessions/          one JSON document per session, rewritten per command
    annotations.jsonl  append-only capture store

Commands mutate one session at a time under a per-session lock; the session
document is persisted (with a bumped version counter) before the response is
sent, so a restart never loses acknowledged state.  Domain errors map to
409 for phase/state conflicts, 404 for unknown ids, and 422 for bad values.
"""

from __future__ import annotations

import hashlib
import io
import json
import threading
import zipfile
from dataclasses import dataclass
from pathlib import Path

from fastapi import FastAPI, Request, Response
from fastapi.responses import JSONResponse
from fastapi.staticfiles import StaticFiles

from .core import BadImage, BoundingBox, MaskEdit, OutsideBox, decode_png, rle_encode
from .dataset import export_voc
from .detector import BackendFailure
from .geometry import BadCalibration, parse_calibration
from .segmenter import apply_edits, binarize
from .session import (
    CaptureStore,
    CorruptStore,
    EmptyMask,
    InspectionSession,
    InvalidPhase,
    NoMask,
    NonPositiveDepth,
    NotConfirmed,
    NotVisible,
    OutOfRange,
    Phase,
    UnassessedDetections,
    UnknownDetection,
    create_session,
)

API_PREFIX = "/api/v1"

_CONFLICT = (
    InvalidPhase,
    NotVisible,
    NotConfirmed,
    NoMask,
    EmptyMask,
    UnassessedDetections,
)
_VALIDATION = (
    OutOfRange,
    NonPositiveDepth,
    OutsideBox,
    BadCalibration,
    ValueError,
    KeyError,
    TypeError,
)


class DataStore:
    """Filesystem layout for blobs, session documents, and annotations."""

    def __init__(self, root):
        self.root = Path(root)
        self.images_dir = self.root / "images"
        self.sessions_dir = self.root / "sessions"
        self.images_dir.mkdir(parents=True, exist_ok=True)
        self.sessions_dir.mkdir(parents=True, exist_ok=True)
        self.annotations = CaptureStore(self.root / "annotations.jsonl")

    def save_image(self, data: bytes) -> str:
        image_id = hashlib.sha256(data).hexdigest()
        path = self.images_dir / f"{image_id}.png"
        if not path.exists():
            tmp = path.with_suffix(".tmp")
            tmp.write_bytes(data)
            tmp.replace(path)
        return image_id

    def has_image(self, image_id: str) -> bool:
        return (self.images_dir / f"{image_id}.png").exists()

    def load_image_bytes(self, image_id: str) -> bytes:
        path = self.images_dir / f"{image_id}.png"
        data = path.read_bytes()
        if hashlib.sha256(data).hexdigest() != image_id:
            raise CorruptStore(f"image blob {image_id} fails its checksum")
        return data

    def save_session_doc(self, doc: dict) -> None:
        path = self.sessions_dir / f"{doc['id']}.json"
        tmp = path.with_suffix(".tmp")
        tmp.write_text(json.dumps(doc, sort_keys=True), encoding="utf-8")
        tmp.replace(path)

    def load_session_doc(self, session_id: str) -> dict | None:
        path = self.sessions_dir / f"{session_id}.json"
        if not path.exists():
            return None
        return json.loads(path.read_text(encoding="utf-8"))


@dataclass
class SessionEntry:
    session: InspectionSession
    image_id: str
    version: int
    lock: threading.Lock


def detection_view(session: InspectionSession, state) -> dict:
    det = state.detection
    view = {
        "id": det.id,
        "class": det.cls.label,
        "box": list(det.box.as_tuple()),
        "confidence": det.confidence,
        "review": det.review.value,
        "mask_threshold": state.mask_threshold,
        "mask": None,
        "attributes": {"depth_mm": state.depth_mm, "exposed_rebar": state.exposed_rebar},
        "assessment": state.assessment.to_json() if state.assessment else None,
    }
    if state.mask is not None:
        h, w = state.mask.foreground.shape
        view["mask"] = {
            "width": w,
            "height": h,
            "area_px": state.mask.area,
            "rle": rle_encode(state.mask.foreground),
            "edit_count": len(state.mask.edit_log),
        }
    return view


def session_view(entry: SessionEntry) -> dict:
    session = entry.session
    visible = session.visible_detections()
    return {
        "id": session.id,
        "image_id": entry.image_id,
        "phase": session.phase.value,
        "version": entry.version,
        "detection_threshold": session.detection_threshold,
        "image_size": [session.image.shape[1], session.image.shape[0]],
        "visible": [
            detection_view(session, session._states[d.id]) for d in visible
        ],
        "raw_count": len(session.raw_proposals()),
    }


def create_app(data_root, ui_dir=None) -> FastAPI:
    """Build the service over a data root directory."""
    store = DataStore(data_root)
    app = FastAPI(title="deckinspect", docs_url=None, redoc_url=None)
    entries: dict[str, SessionEntry] = {}
    entries_lock = threading.Lock()
    app.state.store = store

    def get_entry(session_id: str) -> SessionEntry | None:
        with entries_lock:
            entry = entries.get(session_id)
        if entry is not None:
            return entry
        doc = store.load_session_doc(session_id)
        if doc is None:
            return None
        image = decode_png(store.load_image_bytes(doc["image_ref"]))
        session = InspectionSession.from_doc(doc, image)
        entry = SessionEntry(
            session=session,
            image_id=doc["image_ref"],
            version=doc.get("version", 0),
            lock=threading.Lock(),
        )
        with entries_lock:
            entry = entries.setdefault(session_id, entry)
        return entry

    def persist(entry: SessionEntry) -> None:
        entry.version += 1
        doc = entry.session.to_doc()
        doc["version"] = entry.version
        store.save_session_doc(doc)

    @app.exception_handler(CorruptStore)
    async def corrupt_handler(request: Request, exc: CorruptStore):
        return JSONResponse(status_code=500, content={"error": str(exc)})

    @app.get(API_PREFIX + "/health")
    def health():
        return {"status": "ok"}

    @app.post(API_PREFIX + "/images", status_code=201)
    async def upload_image(request: Request):
        data = await request.body()
        try:
            decode_png(data)
        except BadImage as exc:
            return JSONResponse(status_code=400, content={"error": str(exc)})
        return {"image_id": store.save_image(data)}

    @app.get(API_PREFIX + "/images/{image_id}")
    def download_image(image_id: str):
        if not store.has_image(image_id):
            return JSONResponse(status_code=404, content={"error": f"unknown image {image_id}"})
        return Response(content=store.load_image_bytes(image_id), media_type="image/png")

    @app.post(API_PREFIX + "/sessions", status_code=201)
    def create_session_route(payload: dict):
        image_id = payload.get("image_id")
        calibration = payload.get("calibration")
        if not image_id or not store.has_image(image_id):
            return JSONResponse(status_code=404, content={"error": f"unknown image {image_id}"})
        try:
            scale_calibration = parse_calibration(calibration)
            image = decode_png(store.load_image_bytes(image_id))
            session = create_session(
                image,
                scale_calibration,
                image_ref=image_id,
                inspector_id=payload.get("inspector_id", "anonymous"),
            )
        except (BadCalibration, BadImage) as exc:
            return JSONResponse(status_code=422, content={"error": str(exc)})
        entry = SessionEntry(session=session, image_id=image_id, version=0, lock=threading.Lock())
        with entries_lock:
            entries[session.id] = entry
        with entry.lock:
            persist(entry)
            return session_view(entry)

    @app.get(API_PREFIX + "/sessions/{session_id}")
    def get_session(session_id: str):
        entry = get_entry(session_id)
        if entry is None:
            return JSONResponse(status_code=404, content={"error": f"unknown session {session_id}"})
        with entry.lock:
            return session_view(entry)

    @app.post(API_PREFIX + "/sessions/{session_id}/commands")
    def session_command(session_id: str, body: dict):
        entry = get_entry(session_id)
        if entry is None:
            return JSONResponse(status_code=404, content={"error": f"unknown session {session_id}"})
        command = body.get("command")
        payload = body.get("payload") or {}
        with entry.lock:
            try:
                result = _dispatch(entry, store, command, payload)
            except UnknownDetection as exc:
                return JSONResponse(status_code=404, content={"error": str(exc)})
            except _CONFLICT as exc:
                return JSONResponse(
                    status_code=409,
                    content={"error": str(exc), "kind": type(exc).__name__},
                )
            except _VALIDATION as exc:
                return JSONResponse(
                    status_code=422,
                    content={"error": str(exc), "kind": type(exc).__name__},
                )
            except BackendFailure as exc:
                return JSONResponse(status_code=500, content={"error": str(exc)})
            persist(entry)
            view = session_view(entry)
            if result is not None:
                view["result"] = result
            return view

    @app.get(API_PREFIX + "/annotations/export")
    def export_annotations(format: str = "jsonl"):
        if format == "jsonl":
            store.annotations.records()  # validates; raises CorruptStore -> 500
            return Response(
                content=store.annotations.raw_bytes(),
                media_type="application/x-ndjson",
            )
        if format == "voc":
            return Response(content=_voc_zip(store), media_type="application/zip")
        return JSONResponse(status_code=422, content={"error": f"unknown format {format!r}"})

    if ui_dir and Path(ui_dir).is_dir():
        app.mount("/ui", StaticFiles(directory=str(ui_dir), html=True), name="ui")

    return app


def _dispatch(entry: SessionEntry, store: DataStore, command: str, payload: dict):
    session = entry.session
    if command == "propose":
        session.propose()
        return None
    if command == "set_detection_threshold":
        session.set_detection_threshold(float(payload["threshold"]))
        return None
    if command == "review":
        session.review_detection(payload["detection_id"], payload["verdict"])
        return None
    if command == "segment":
        session.segment_detection(payload["detection_id"])
        return None
    if command == "set_mask_threshold":
        session.set_mask_threshold(
            payload["detection_id"], float(payload["threshold"])
        )
        return None
    if command == "edit_mask":
        session.edit_mask(payload["detection_id"], MaskEdit.from_json(payload["edit"]))
        return None
    if command == "undo_edit":
        return _undo_edit(session, payload["detection_id"])
    if command == "set_attributes":
        session.set_attributes(
            payload["detection_id"],
            depth_mm=payload.get("depth_mm"),
            exposed_rebar=payload.get("exposed_rebar"),
        )
        return None
    if command == "assess":
        assessment = session.assess_detection(payload["detection_id"])
        return assessment.to_json()
    if command == "finalize":
        report, record = session.finalize(store.annotations)
        return {"report": report.to_json(), "record_count": store.annotations.count()}
    raise ValueError(f"unknown command {command!r}")


def _undo_edit(session: InspectionSession, detection_id: str):
    """Drop the last mask edit by replaying the log minus its last entry."""
    state = session._state(detection_id)
    if state.mask is None:
        raise NoMask(f"{detection_id} has not been segmented")
    edits = state.mask.edit_log
    if not edits:
        raise OutsideBox("nothing to undo")
    state.mask = apply_edits(
        binarize(state.prob, state.mask_threshold), edits[:-1]
    )
    state.assessment = None
    return {"remaining_edits": len(edits) - 1}


def _voc_zip(store: DataStore) -> bytes:
    """Zip of one VOC XML per record, from the confirmed boxes."""
    records = store.annotations.records()
    buf = io.BytesIO()
    with zipfile.ZipFile(buf, "w", zipfile.ZIP_DEFLATED) as zf:
        for i, record in enumerate(records):
            image_id = record["image_ref"]
            data = store.load_image_bytes(image_id)
            image = decode_png(data)
            h, w = image.shape[:2]
            boxes = [BoundingBox(*e["box"]) for e in record["confirmed"]]
            labels = [e["class"] for e in record["confirmed"]]
            xml = export_voc(
                boxes, labels, (w, h), filename=f"{image_id}.png",
                depth=3 if image.ndim == 3 else 1,
            )
            zf.writestr(f"{image_id}_{i}.xml", xml)
    return buf.getvalue()
