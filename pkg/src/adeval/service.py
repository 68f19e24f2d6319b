"""Submission, status, and leaderboard HTTP endpoints.

State lives in an append-only JSONL journal: one event per line for
admission, status changes, and results. Restarting the service replays the
journal, so the leaderboard is always a pure function of recorded events.
Unfinished submissions are re-enqueued on replay.

Rate limiting admits at most N submissions per token per 24 hours, counted
at admission time under a single lock so concurrent posts cannot sneak past
the limit together.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import logging
import math
import queue
import threading
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Mapping

from fastapi import FastAPI, HTTPException, Request, Response

from .errors import MalformedSubmission, UnknownSegment
from .gateway import Gateway
from .ingest import parse_submission_obj
from .model import Submission
from .qa_answer import evaluate_submission
from .store import QuestionStore

logger = logging.getLogger(__name__)

RATE_WINDOW_S = 24 * 3600


@dataclass(frozen=True)
class LeaderboardEntry:
    method_name: str
    submission_id: str
    submitted_at: float
    status: str
    nu_cc: float | None
    va_cc: float | None
    nu_ratio: float | None
    va_ratio: float | None

    def to_dict(self) -> dict:
        return {
            "method_name": self.method_name,
            "submission_id": self.submission_id,
            "submitted_at": self.submitted_at,
            "status": self.status,
            "nu_cc": self.nu_cc,
            "va_cc": self.va_cc,
            "nu_ratio": self.nu_ratio,
            "va_ratio": self.va_ratio,
        }


@dataclass
class _SubmissionState:
    submission_id: str
    dataset_id: str
    method_name: str
    token_hash: str
    submitted_at: float
    body: dict
    status: str = "Queued"
    result: dict | None = None
    error: str | None = None


class SubmissionLedger:
    """Journal-backed submission registry with rate limiting."""

    def __init__(
        self,
        journal_path: str | Path,
        rate_limit: int = 3,
        clock: Callable[[], float] = time.time,
    ) -> None:
        self.journal_path = Path(journal_path)
        self.rate_limit = rate_limit
        self.clock = clock
        self._lock = threading.Lock()
        self._states: dict[str, _SubmissionState] = {}
        self._next_seq = 1
        if self.journal_path.exists():
            self._replay()

    def _replay(self) -> None:
        for raw in self.journal_path.read_text(encoding="utf-8").splitlines():
            if not raw.strip():
                continue
            event = json.loads(raw)
            kind = event["event"]
            if kind == "submitted":
                st = _SubmissionState(
                    submission_id=event["submission_id"],
                    dataset_id=event["dataset_id"],
                    method_name=event["method_name"],
                    token_hash=event["token_hash"],
                    submitted_at=event["submitted_at"],
                    body=event["body"],
                )
                self._states[st.submission_id] = st
                seq = int(st.submission_id.split("-")[-1])
                self._next_seq = max(self._next_seq, seq + 1)
            elif kind == "status":
                st = self._states[event["submission_id"]]
                st.status = event["status"]
            elif kind == "result":
                st = self._states[event["submission_id"]]
                st.status = event["status"]
                st.result = event.get("result")
                st.error = event.get("error")
        # A submission caught mid-flight by a restart goes back in line.
        for st in self._states.values():
            if st.status == "Running":
                st.status = "Queued"

    def _append(self, event: dict) -> None:
        with self.journal_path.open("a", encoding="utf-8") as fh:
            fh.write(json.dumps(event, sort_keys=True) + "\n")
            fh.flush()

    def admit(self, token: str, dataset_id: str, body: dict) -> _SubmissionState:
        """Admit one submission or raise PermissionError on a rate breach.

        Counting and journal append happen under one lock, so two racing
        posts can never both claim the last slot.
        """
        token_hash = hashlib.sha256(token.encode("utf-8")).hexdigest()
        with self._lock:
            now = self.clock()
            recent = sum(
                1
                for st in self._states.values()
                if st.token_hash == token_hash
                and now - st.submitted_at < RATE_WINDOW_S
            )
            if recent >= self.rate_limit:
                raise PermissionError(
                    f"rate limit: {self.rate_limit} submissions per 24 h"
                )
            submission_id = f"sub-{self._next_seq:06d}"
            self._next_seq += 1
            st = _SubmissionState(
                submission_id=submission_id,
                dataset_id=dataset_id,
                method_name=str(body.get("method_name", "")),
                token_hash=token_hash,
                submitted_at=now,
                body=body,
            )
            self._states[submission_id] = st
            self._append(
                {
                    "event": "submitted",
                    "submission_id": submission_id,
                    "dataset_id": dataset_id,
                    "method_name": st.method_name,
                    "token_hash": token_hash,
                    "submitted_at": now,
                    "body": body,
                }
            )
            return st

    def mark_running(self, submission_id: str) -> None:
        with self._lock:
            self._states[submission_id].status = "Running"
            self._append(
                {"event": "status", "submission_id": submission_id, "status": "Running"}
            )

    def mark_done(self, submission_id: str, result: dict) -> None:
        with self._lock:
            st = self._states[submission_id]
            st.status = "Done"
            st.result = result
            self._append(
                {
                    "event": "result",
                    "submission_id": submission_id,
                    "status": "Done",
                    "result": result,
                }
            )

    def mark_failed(self, submission_id: str, error: str) -> None:
        with self._lock:
            st = self._states[submission_id]
            st.status = "Failed"
            st.error = error
            self._append(
                {
                    "event": "result",
                    "submission_id": submission_id,
                    "status": "Failed",
                    "error": error,
                }
            )

    def get(self, submission_id: str) -> _SubmissionState | None:
        with self._lock:
            return self._states.get(submission_id)

    def pending(self) -> list[_SubmissionState]:
        with self._lock:
            return [st for st in self._states.values() if st.status == "Queued"]

    def done_for(self, dataset_id: str) -> list[_SubmissionState]:
        with self._lock:
            return [
                st
                for st in self._states.values()
                if st.dataset_id == dataset_id and st.status == "Done"
            ]


def _metric(result: dict | None, kind: str, field_name: str) -> float | None:
    if not result:
        return None
    if field_name == "cc":
        brk = result.get("report", {}).get("by_kind", {}).get(kind)
        return None if brk is None else brk.get("cc")
    return result.get("ratios", {}).get(kind)


def leaderboard_entries(
    ledger: SubmissionLedger, dataset_id: str
) -> list[LeaderboardEntry]:
    """Done submissions ranked by NU CC, then VA CC, then submission id."""
    entries = []
    for st in ledger.done_for(dataset_id):
        entries.append(
            LeaderboardEntry(
                method_name=st.method_name,
                submission_id=st.submission_id,
                submitted_at=st.submitted_at,
                status=st.status,
                nu_cc=_metric(st.result, "NU", "cc"),
                va_cc=_metric(st.result, "VA", "cc"),
                nu_ratio=_metric(st.result, "NU", "ratio"),
                va_ratio=_metric(st.result, "VA", "ratio"),
            )
        )

    def key(e: LeaderboardEntry):
        nu = -math.inf if e.nu_cc is None else e.nu_cc
        va = -math.inf if e.va_cc is None else e.va_cc
        return (-nu, -va, e.submission_id)

    return sorted(entries, key=key)


class _Worker(threading.Thread):
    """Evaluates one dataset's queued submissions sequentially."""

    def __init__(
        self,
        dataset_id: str,
        store: QuestionStore,
        gateway: Gateway,
        ledger: SubmissionLedger,
    ) -> None:
        super().__init__(daemon=True, name=f"eval-{dataset_id}")
        self.dataset_id = dataset_id
        self.store = store
        self.gateway = gateway
        self.ledger = ledger
        self.queue: "queue.Queue[str | None]" = queue.Queue()
        self._stop = False

    def submit(self, submission_id: str) -> None:
        self.queue.put(submission_id)

    def stop(self) -> None:
        self._stop = True
        self.queue.put(None)

    def run(self) -> None:
        while True:
            submission_id = self.queue.get()
            if submission_id is None or self._stop:
                return
            st = self.ledger.get(submission_id)
            if st is None:
                continue
            self.ledger.mark_running(submission_id)
            try:
                submission = Submission.from_dict(
                    {
                        "method_name": st.body["method_name"],
                        "segments": st.body.get("segments", []),
                    }
                )
                result = evaluate_submission(submission, self.store, self.gateway)
                self.ledger.mark_done(submission_id, result.to_dict())
            except Exception as exc:
                logger.exception("evaluation of %s failed", submission_id)
                self.ledger.mark_failed(submission_id, str(exc))


def create_app(
    stores: QuestionStore | Mapping[str, QuestionStore],
    gateway: Gateway,
    journal_path: str | Path,
    tokens: set[str] | frozenset[str],
    rate_limit: int = 3,
    clock: Callable[[], float] = time.time,
    start_workers: bool = True,
) -> FastAPI:
    """Build the service app; replays the journal and re-enqueues leftovers."""
    if isinstance(stores, QuestionStore):
        stores = {stores.dataset_id: stores}
    ledger = SubmissionLedger(journal_path, rate_limit=rate_limit, clock=clock)
    workers = {
        ds: _Worker(ds, store, gateway, ledger) for ds, store in stores.items()
    }
    app = FastAPI(title="AD evaluation service")
    app.state.ledger = ledger
    app.state.workers = workers
    app.state.tokens = frozenset(tokens)
    if start_workers:
        for w in workers.values():
            w.start()
        for st in ledger.pending():
            if st.dataset_id in workers:
                workers[st.dataset_id].submit(st.submission_id)

    def _auth(request: Request) -> str:
        token = request.headers.get("X-API-Token", "")
        if token not in app.state.tokens:
            raise HTTPException(status_code=401, detail="missing or invalid API token")
        return token

    @app.post("/v1/submissions", status_code=202)
    async def post_submission(request: Request) -> dict:
        token = _auth(request)
        try:
            body = await request.json()
        except Exception:
            raise HTTPException(status_code=400, detail="body is not valid JSON")
        if not isinstance(body, dict):
            raise HTTPException(status_code=400, detail="body must be a JSON object")
        dataset_id = body.get("dataset_id")
        if dataset_id is None:
            if len(stores) == 1:
                dataset_id = next(iter(stores))
            else:
                raise HTTPException(
                    status_code=400,
                    detail=f"dataset_id required; known: {sorted(stores)}",
                )
        if dataset_id not in stores:
            raise HTTPException(
                status_code=400, detail=f"unknown dataset {dataset_id!r}"
            )
        store = stores[dataset_id]
        try:
            parse_submission_obj(body, known_segments=store.segment_ids())
        except UnknownSegment as exc:
            raise HTTPException(
                status_code=400,
                detail={
                    "error": "unknown segments",
                    "segments": list(exc.segment_ids),
                },
            )
        except MalformedSubmission as exc:
            raise HTTPException(status_code=400, detail=str(exc))
        try:
            st = ledger.admit(token, dataset_id, body)
        except PermissionError as exc:
            raise HTTPException(status_code=429, detail=str(exc))
        if start_workers:
            workers[dataset_id].submit(st.submission_id)
        return {"submission_id": st.submission_id, "status": st.status}

    @app.get("/v1/submissions/{submission_id}")
    async def get_submission(submission_id: str, request: Request) -> dict:
        _auth(request)
        st = ledger.get(submission_id)
        if st is None:
            raise HTTPException(status_code=404, detail="unknown submission id")
        out: dict[str, Any] = {
            "submission_id": st.submission_id,
            "status": st.status,
            "method_name": st.method_name,
            "submitted_at": st.submitted_at,
            "dataset_id": st.dataset_id,
        }
        if st.status == "Done":
            out["result"] = st.result
        if st.status == "Failed":
            out["error"] = st.error
        return out

    @app.get("/v1/leaderboard")
    async def get_leaderboard(dataset: str, request: Request) -> Response:
        _auth(request)
        if dataset not in stores:
            raise HTTPException(status_code=404, detail=f"unknown dataset {dataset!r}")
        entries = leaderboard_entries(ledger, dataset)
        accept = request.headers.get("accept", "")
        if "text/csv" in accept:
            buf = io.StringIO()
            writer = csv.writer(buf)
            writer.writerow(
                [
                    "rank",
                    "method_name",
                    "submission_id",
                    "submitted_at",
                    "nu_cc",
                    "va_cc",
                    "nu_ratio",
                    "va_ratio",
                ]
            )
            for rank, e in enumerate(entries, start=1):
                writer.writerow(
                    [
                        rank,
                        e.method_name,
                        e.submission_id,
                        e.submitted_at,
                        "" if e.nu_cc is None else e.nu_cc,
                        "" if e.va_cc is None else e.va_cc,
                        "" if e.nu_ratio is None else e.nu_ratio,
                        "" if e.va_ratio is None else e.va_ratio,
                    ]
                )
            return Response(content=buf.getvalue(), media_type="text/csv")
        payload = json.dumps(
            [e.to_dict() for e in entries], sort_keys=True, indent=2
        )
        return Response(content=payload, media_type="application/json")

    return app
