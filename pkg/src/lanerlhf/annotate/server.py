"""Local HTTP service for human preference labeling.

Serves segment replays and pending pairs from a segment store, persists
submitted labels append-only, and hosts the static annotation UI bundle.
Sessions are in-memory; a pair is handed to at most one session at a time,
and a pair accepts exactly one label.
"""
from __future__ import annotations

import threading
from importlib import resources
from typing import Literal, Optional

from fastapi import FastAPI, HTTPException
from fastapi.staticfiles import StaticFiles
from pydantic import BaseModel

from ..prefs.oracle import PreferenceLabel
from ..prefs.segments import SegmentStore, replay_document

CHOICES = ("left", "right", "skip")


class LabelSubmission(BaseModel):
    pair_id: str
    choice: Literal["left", "right", "skip"]
    session: str


class _Session:
    def __init__(self, session_id: str, annotator: str, style: str):
        self.session_id = session_id
        self.annotator = annotator
        self.style = style
        self.assigned: Optional[str] = None  # pair_id currently shown
        self.labeled = 0
        self.skipped = 0

    def descriptor(self) -> dict:
        return {
            "session": self.session_id,
            "annotator": self.annotator,
            "style": self.style,
            "labeled": self.labeled,
            "skipped": self.skipped,
        }


class AnnotationState:
    """Store-backed labeling state shared by all requests.

    Reads are lock-free on immutable snapshots; label writes go through one
    lock so the JSONL store never interleaves."""

    def __init__(self, store: SegmentStore):
        self.store = store
        self.index = store.index
        self.pairs = {p["pair_id"]: p for p in store.pairs()}
        self.labeled_pairs = {rec["pair_id"] for rec in store.labels()}
        self.sessions: dict[str, _Session] = {}
        self._by_key: dict[tuple[str, str], _Session] = {}
        self._lock = threading.Lock()

    def session_for(self, annotator: str, style: str) -> _Session:
        with self._lock:
            key = (annotator, style)
            sess = self._by_key.get(key)
            if sess is None:
                sess = _Session(f"s{len(self.sessions) + 1}", annotator, style)
                self.sessions[sess.session_id] = sess
                self._by_key[key] = sess
            return sess

    def next_pair(self, session_id: str) -> Optional[dict]:
        with self._lock:
            sess = self.sessions.get(session_id)
            if sess is None:
                raise KeyError(session_id)
            if sess.assigned and sess.assigned not in self.labeled_pairs:
                return self.pairs[sess.assigned]
            held = {
                s.assigned
                for s in self.sessions.values()
                if s is not sess and s.assigned and s.assigned not in self.labeled_pairs
            }
            for pair_id, pair in self.pairs.items():
                if pair_id in self.labeled_pairs or pair_id in held:
                    continue
                sess.assigned = pair_id
                return pair
            sess.assigned = None
            return None

    def submit(self, sub: LabelSubmission) -> dict:
        with self._lock:
            sess = self.sessions.get(sub.session)
            if sess is None:
                raise HTTPException(status_code=404, detail=f"unknown session {sub.session!r}")
            pair = self.pairs.get(sub.pair_id)
            if pair is None:
                raise HTTPException(status_code=404, detail=f"unknown pair {sub.pair_id!r}")
            if sub.pair_id in self.labeled_pairs:
                raise HTTPException(
                    status_code=409, detail=f"pair {sub.pair_id!r} already labeled"
                )
            record = PreferenceLabel(
                pair_id=sub.pair_id,
                left_id=pair["left"],
                right_id=pair["right"],
                choice=sub.choice,
                annotator=sess.annotator,
                style=sess.style,
            ).to_dict()
            self.store.append_label(record)
            self.labeled_pairs.add(sub.pair_id)
            if sess.assigned == sub.pair_id:
                sess.assigned = None
            if sub.choice == "skip":
                sess.skipped += 1
            else:
                sess.labeled += 1
            return record

    def progress(self) -> dict:
        labels = self.store.labels()
        by_style: dict[str, dict[str, int]] = {}
        labeled = skipped = 0
        for rec in labels:
            style = rec.get("style") or "unspecified"
            bucket = by_style.setdefault(style, {"labeled": 0, "skipped": 0})
            if rec["choice"] == "skip":
                bucket["skipped"] += 1
                skipped += 1
            else:
                bucket["labeled"] += 1
                labeled += 1
        return {
            "total_pairs": len(self.pairs),
            "labeled": labeled,
            "skipped": skipped,
            "remaining": len(self.pairs) - labeled - skipped,
            "by_style": by_style,
        }


def create_app(store: SegmentStore) -> FastAPI:
    state = AnnotationState(store)
    app = FastAPI(title="segment preference annotation")
    app.state.annotation = state

    @app.get("/api/session")
    def get_session(annotator: str, style: str) -> dict:
        if not annotator.strip() or not style.strip():
            raise HTTPException(status_code=422, detail="annotator and style must be non-empty")
        sess = state.session_for(annotator.strip(), style.strip())
        return {**sess.descriptor(), "total_pairs": len(state.pairs)}

    @app.get("/api/pairs/next")
    def get_next_pair(session: str) -> dict:
        try:
            pair = state.next_pair(session)
        except KeyError:
            raise HTTPException(status_code=404, detail=f"unknown session {session!r}")
        if pair is None:
            return {"exhausted": True}
        return {
            "exhausted": False,
            "pair_id": pair["pair_id"],
            "left": pair["left"],
            "right": pair["right"],
        }

    @app.get("/api/segments/{segment_id}")
    def get_segment(segment_id: str) -> dict:
        try:
            return replay_document(store, segment_id, road=state.index.get("road"))
        except KeyError:
            raise HTTPException(status_code=404, detail=f"unknown segment {segment_id!r}")

    @app.post("/api/labels", status_code=201)
    def post_label(sub: LabelSubmission) -> dict:
        return state.submit(sub)

    @app.get("/api/progress")
    def get_progress() -> dict:
        return state.progress()

    static_root = resources.files("lanerlhf.annotate") / "static"
    app.mount("/", StaticFiles(directory=str(static_root), html=True), name="ui")
    return app


def serve(store_dir: str, host: str = "127.0.0.1", port: int = 8000) -> None:
    import uvicorn

    app = create_app(SegmentStore(store_dir))
    uvicorn.run(app, host=host, port=port, log_level="warning")
