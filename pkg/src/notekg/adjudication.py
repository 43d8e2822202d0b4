"""Blinded paired-review service.

Raters see two answers per item under randomized A/B slots; which condition
sits in which slot is derivable only from the session's blinding key. State
is an append-only JSONL event log per session, rebuilt on startup, so a
service restart reproduces exactly the same assignments.
"""
from __future__ import annotations

import hashlib
import json
import threading
import uuid
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Literal, Optional

from fastapi import FastAPI, Header, HTTPException
from pydantic import BaseModel, Field

from .errors import DataError

RATING_DIMENSIONS = {
    "gold_correctness": ("correct", "needs_revision", "wrong"),
    "model_correctness": ("correct", "partial", "incorrect"),
    "score_fairness": ("agree", "too_strict", "too_lenient"),
    "safety": ("safe", "minor_concern", "potentially_harmful"),
    "utility": ("helpful", "neutral", "not_useful", "misleading"),
}


def _key_hash(key: int) -> str:
    return hashlib.sha256(str(key).encode()).hexdigest()


def _item_rank(seed: int, item_id: str) -> str:
    return hashlib.sha256(f"{seed}|{item_id}".encode()).hexdigest()


def blinded_order(seed: int, item_ids: list[str]) -> list[str]:
    """Deterministic seeded shuffle: sort by per-item keyed hash."""
    return sorted(item_ids, key=lambda i: _item_rank(seed, i))


def slot_assignment(seed: int, item_ids: list[str], conditions: dict[str, tuple[str, str]]) -> dict[str, dict[str, str]]:
    """Exactly balanced A/B assignment: in blinded order, even ranks put the
    alphabetically first condition in slot A, odd ranks the other."""
    slots: dict[str, dict[str, str]] = {}
    for rank, item_id in enumerate(blinded_order(seed, item_ids)):
        first, second = sorted(conditions[item_id])
        if rank % 2 == 0:
            slots[item_id] = {"A": first, "B": second}
        else:
            slots[item_id] = {"A": second, "B": first}
    return slots


@dataclass
class SessionState:
    session_id: str
    rater_id: str
    key_hash: str
    created_at: str
    order: list[str]
    items: dict[str, dict]
    slots: dict[str, dict[str, str]]
    # (item_id, slot) -> list of rating dicts; the last entry is current
    ratings: dict[tuple[str, str], list[dict]] = field(default_factory=dict)

    def current_ratings(self) -> dict[tuple[str, str], dict]:
        return {k: v[-1] for k, v in self.ratings.items()}

    def item_complete(self, item_id: str) -> bool:
        return all((item_id, slot) in self.ratings for slot in ("A", "B"))

    def next_index(self) -> Optional[int]:
        for i, item_id in enumerate(self.order):
            if not self.item_complete(item_id):
                return i
        return None

    @property
    def open(self) -> bool:
        return self.next_index() is not None


class Store:
    """Event-sourced session store: one JSONL log per session."""

    def __init__(self, directory):
        self.directory = Path(directory)
        self.directory.mkdir(parents=True, exist_ok=True)
        self._lock = threading.Lock()
        self.sessions: dict[str, SessionState] = {}
        for path in sorted(self.directory.glob("*.jsonl")):
            self._replay(path)

    def _replay(self, path: Path) -> None:
        with open(path, encoding="utf-8") as fh:
            for raw in fh:
                line = raw.strip()
                if line:
                    self._apply(json.loads(line))

    def _apply(self, event: dict) -> None:
        kind = event["event"]
        if kind == "session_created":
            self.sessions[event["session_id"]] = SessionState(
                session_id=event["session_id"],
                rater_id=event["rater_id"],
                key_hash=event["key_hash"],
                created_at=event["created_at"],
                order=event["order"],
                items=event["items"],
                slots=event["slots"],
            )
        elif kind == "rating_submitted":
            session = self.sessions[event["session_id"]]
            key = (event["item_id"], event["slot"])
            session.ratings.setdefault(key, []).append(event["rating"])
        else:
            raise DataError(f"unknown event type {kind!r}")

    def _append(self, session_id: str, event: dict) -> None:
        path = self.directory / f"{session_id}.jsonl"
        with open(path, "a", encoding="utf-8") as fh:
            fh.write(json.dumps(event) + "\n")

    def create_session(self, rater_id: str, blinding_seed: int, items: list[dict]) -> SessionState:
        if not items:
            raise ValueError("item set is empty")
        item_ids = [it["item_id"] for it in items]
        if len(set(item_ids)) != len(item_ids):
            raise ValueError("duplicate item ids")
        conditions = {}
        for it in items:
            answers = it.get("answers", {})
            if len(answers) != 2:
                raise ValueError(f"item {it['item_id']} must carry exactly two answers")
            conditions[it["item_id"]] = tuple(answers)
        with self._lock:
            for s in self.sessions.values():
                if s.rater_id == rater_id and s.open:
                    raise FileExistsError(f"rater {rater_id} already has an open session")
            session = SessionState(
                session_id=uuid.uuid4().hex[:12],
                rater_id=rater_id,
                key_hash=_key_hash(blinding_seed),
                created_at=datetime.now(timezone.utc).isoformat(),
                order=blinded_order(blinding_seed, item_ids),
                items={it["item_id"]: it for it in items},
                slots=slot_assignment(blinding_seed, item_ids, conditions),
            )
            self.sessions[session.session_id] = session
            self._append(
                session.session_id,
                {
                    "event": "session_created",
                    "session_id": session.session_id,
                    "rater_id": session.rater_id,
                    "key_hash": session.key_hash,
                    "created_at": session.created_at,
                    "order": session.order,
                    "items": session.items,
                    "slots": session.slots,
                },
            )
            return session

    def submit_rating(self, session_id: str, item_id: str, slot: str, rating: dict) -> bool:
        with self._lock:
            session = self.sessions[session_id]
            next_index = session.next_index()
            served_limit = next_index if next_index is not None else len(session.order) - 1
            if session.order.index(item_id) > served_limit:
                raise PermissionError(f"item {item_id} has not been served yet")
            replaced = (item_id, slot) in session.ratings
            event = {
                "event": "rating_submitted",
                "session_id": session_id,
                "item_id": item_id,
                "slot": slot,
                "rating": rating,
                "ts": datetime.now(timezone.utc).isoformat(),
            }
            self._apply(event)
            self._append(session_id, event)
            return replaced


# -- wire models --------------------------------------------------------------


class ItemIn(BaseModel):
    item_id: str
    question: str
    expected_answer: str
    source_note: str = ""
    answers: dict[str, str]


class SessionIn(BaseModel):
    rater_id: str
    blinding_seed: int
    items: list[ItemIn]


class RatingIn(BaseModel):
    item_id: str
    slot: Literal["A", "B"]
    gold_correctness: Literal["correct", "needs_revision", "wrong"]
    model_correctness: Literal["correct", "partial", "incorrect"]
    score_fairness: Literal["agree", "too_strict", "too_lenient"]
    safety: Literal["safe", "minor_concern", "potentially_harmful"]
    utility: Literal["helpful", "neutral", "not_useful", "misleading"]
    note: str = ""


class ExportIn(BaseModel):
    session_ids: list[str] = Field(default_factory=list)
    key: int


def _blinded_item(session: SessionState, item_id: str) -> dict:
    item = session.items[item_id]
    slots = session.slots[item_id]
    return {
        "item_id": item_id,
        "question": item["question"],
        "expected_answer": item["expected_answer"],
        "source_note": item.get("source_note", ""),
        "answer_a": item["answers"][slots["A"]],
        "answer_b": item["answers"][slots["B"]],
    }


def _rating_rows(session: SessionState, deblind: bool) -> list[dict]:
    rows = []
    for (item_id, slot), history in sorted(session.ratings.items()):
        rating = history[-1]
        row = {
            "session_id": session.session_id,
            "rater_id": session.rater_id,
            "item_id": item_id,
            "slot": slot,
            "revisions": len(history) - 1,
            **{dim: rating[dim] for dim in RATING_DIMENSIONS},
            "note": rating.get("note", ""),
        }
        if deblind:
            row["condition"] = session.slots[item_id][slot]
        rows.append(row)
    return rows


def create_app(data_dir, rater_tokens: Optional[dict[str, str]] = None) -> FastAPI:
    """Build the service. ``rater_tokens`` (rater_id -> shared token) enables
    header auth; without it the service is open (fixture mode)."""
    app = FastAPI(title="blinded paired review")
    store = Store(data_dir)
    app.state.store = store

    def _check_token(rater_id: str, token: Optional[str]) -> None:
        if rater_tokens is None:
            return
        if rater_tokens.get(rater_id) != token:
            raise HTTPException(status_code=401, detail="bad or missing rater token")

    def _session(session_id: str) -> SessionState:
        try:
            return store.sessions[session_id]
        except KeyError:
            raise HTTPException(status_code=404, detail=f"no session {session_id}") from None

    @app.post("/sessions", status_code=201)
    def create_session(body: SessionIn, x_rater_token: Optional[str] = Header(default=None)):
        _check_token(body.rater_id, x_rater_token)
        try:
            session = store.create_session(
                body.rater_id, body.blinding_seed, [it.model_dump() for it in body.items]
            )
        except FileExistsError as exc:
            raise HTTPException(status_code=409, detail=str(exc)) from exc
        except ValueError as exc:
            raise HTTPException(status_code=400, detail=str(exc)) from exc
        return {
            "session_id": session.session_id,
            "rater_id": session.rater_id,
            "total_items": len(session.order),
            "created_at": session.created_at,
        }

    @app.get("/sessions/{session_id}/next")
    def next_item(session_id: str, x_rater_token: Optional[str] = Header(default=None)):
        session = _session(session_id)
        _check_token(session.rater_id, x_rater_token)
        index = session.next_index()
        if index is None:
            return {"done": True, "total": len(session.order)}
        return {
            "done": False,
            "position": index,
            "total": len(session.order),
            "item": _blinded_item(session, session.order[index]),
        }

    @app.post("/sessions/{session_id}/ratings")
    def submit_rating(
        session_id: str, body: RatingIn, x_rater_token: Optional[str] = Header(default=None)
    ):
        session = _session(session_id)
        _check_token(session.rater_id, x_rater_token)
        if body.item_id not in session.items:
            raise HTTPException(status_code=404, detail=f"no item {body.item_id}")
        rating = body.model_dump()
        rating.pop("item_id")
        rating.pop("slot")
        try:
            replaced = store.submit_rating(session_id, body.item_id, body.slot, rating)
        except PermissionError as exc:
            raise HTTPException(status_code=409, detail=str(exc)) from exc
        return {"accepted": True, "replaced": replaced}

    @app.get("/sessions/{session_id}/progress")
    def progress(session_id: str, x_rater_token: Optional[str] = Header(default=None)):
        session = _session(session_id)
        _check_token(session.rater_id, x_rater_token)
        tallies: dict[str, dict[str, int]] = {dim: {} for dim in RATING_DIMENSIONS}
        for rating in session.current_ratings().values():
            for dim in RATING_DIMENSIONS:
                value = rating[dim]
                tallies[dim][value] = tallies[dim].get(value, 0) + 1
        complete = sum(1 for item_id in session.order if session.item_complete(item_id))
        return {
            "total": len(session.order),
            "items_complete": complete,
            "slots_rated": len(session.ratings),
            "per_dimension": tallies,
        }

    @app.get("/sessions/{session_id}/export")
    def export_session(
        session_id: str,
        key: Optional[int] = None,
        x_rater_token: Optional[str] = Header(default=None),
    ):
        session = _session(session_id)
        if key is None:
            return {"blinded": True, "ratings": _rating_rows(session, deblind=False)}
        if _key_hash(key) != session.key_hash:
            raise HTTPException(status_code=403, detail="blinding key does not match")
        return {"blinded": False, "ratings": _rating_rows(session, deblind=True)}

    @app.post("/export")
    def export_many(body: ExportIn):
        session_ids = body.session_ids or sorted(store.sessions)
        rows = []
        for session_id in session_ids:
            session = _session(session_id)
            if _key_hash(body.key) != session.key_hash:
                raise HTTPException(
                    status_code=403, detail=f"blinding key does not match session {session_id}"
                )
            rows.extend(_rating_rows(session, deblind=True))
        completion = {
            sid: {
                "rater_id": store.sessions[sid].rater_id,
                "items_complete": sum(
                    1 for i in store.sessions[sid].order if store.sessions[sid].item_complete(i)
                ),
                "total": len(store.sessions[sid].order),
            }
            for sid in session_ids
        }
        return {"blinded": False, "ratings": rows, "completion": completion}

    return app


# -- agreement glue -----------------------------------------------------------


def fleiss_table(
    rows: list[dict], dimension: str = "model_correctness", categories: Optional[list[str]] = None
) -> tuple[list[list[int]], list[str]]:
    """Items x categories count table for Fleiss' kappa.

    Subjects are (item_id, condition) pairs from deblinded rows (falling back
    to slot when blinded); every subject must have one rating per rater.
    """
    cats = categories or sorted({row[dimension] for row in rows})
    index = {c: i for i, c in enumerate(cats)}
    subjects: dict[tuple[str, str], list[str]] = {}
    for row in rows:
        key = (row["item_id"], row.get("condition", row["slot"]))
        subjects.setdefault(key, []).append(row[dimension])
    table = []
    for key in sorted(subjects):
        counts = [0] * len(cats)
        for value in subjects[key]:
            counts[index[value]] += 1
        table.append(counts)
    return table, cats
