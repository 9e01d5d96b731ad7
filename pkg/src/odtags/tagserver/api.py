"""REST surface of the tag server, including the curation endpoints
the review UI drives.

All payloads are JSON under ``/api/v1``; RDF downloads are Turtle.
Status contract: 200/201 success, 404 unknown slug or portal, 409
conflict, 422 validation, 410 stale suggestion.
"""

from __future__ import annotations

import threading
from datetime import datetime
from pathlib import Path
from typing import Callable

from fastapi import FastAPI, HTTPException, Query, Response
from pydantic import BaseModel

from ..corpus import (
    Corpus,
    PortalSnapshot,
    load_snapshot,
    save_snapshot,
    snapshot_path,
)
from ..records import format_record, format_timestamp, parse_record, utc_now
from ..reconcile import (
    MergeSuggestion,
    StaleSuggestionError,
    append_merge_log,
    apply_merge,
    suggest,
)
from ..semsim import DEFAULT_THRESHOLD, LexiconProvider
from .rdf import DEFAULT_SERVER_BASE, export_turtle
from .store import ConflictError, GlobalTag, NotFoundError, RelationKind, TagStore, ValidationError

PAGE_SIZE = 50
MERGE_LOG_FILE = "merges.log"
REJECTED_FILE = "rejected.tsv"


class TagCreateBody(BaseModel):
    label: str
    meanings: list[str] = []


class LinkBody(BaseModel):
    portal_id: str
    tag_name: str


class RelationBody(BaseModel):
    kind: str
    target: str


class AcceptBody(BaseModel):
    survivor: str


def tag_to_json(tag: GlobalTag) -> dict:
    return {
        "slug": tag.slug,
        "label": tag.label,
        "meanings": list(tag.meanings),
        "relations": [
            {"kind": kind.value, "target": target} for kind, target in tag.relations
        ],
        "local_links": [
            {"portal_id": portal_id, "tag_name": name}
            for portal_id, name in tag.local_links
        ],
        "created_at": format_timestamp(tag.created_at),
        "updated_at": format_timestamp(tag.updated_at),
    }


class CurationState:
    """Portal snapshots plus persisted curator decisions.

    Snapshot mutation is serialized per portal; rejected suggestion ids
    survive restarts via a record file in the store directory.
    """

    def __init__(
        self,
        corpus_dir: Path,
        store_dir: Path,
        provider: LexiconProvider | None,
        threshold: float,
        now: Callable[[], datetime] = utc_now,
    ):
        self.corpus_dir = corpus_dir
        self.store_dir = store_dir
        self.provider = provider
        self.threshold = threshold
        self.now = now
        self._locks: dict[str, threading.Lock] = {}
        self._locks_guard = threading.Lock()
        self._rejected: set[tuple[str, str]] = set()
        self._load_rejected()

    def portal_lock(self, portal_id: str) -> threading.Lock:
        with self._locks_guard:
            return self._locks.setdefault(portal_id, threading.Lock())

    def portal_ids(self) -> list[str]:
        return sorted(p.stem for p in self.corpus_dir.glob("*.snap"))

    def load_portal(self, portal_id: str) -> PortalSnapshot:
        path = snapshot_path(self.corpus_dir, portal_id)
        if not path.exists():
            raise NotFoundError(portal_id)
        return load_snapshot(path)

    def corpus(self) -> Corpus:
        return Corpus([self.load_portal(pid) for pid in self.portal_ids()])

    def suggestions(
        self, snapshot: PortalSnapshot, tiers: tuple[int, ...]
    ) -> list[MergeSuggestion]:
        items = suggest(
            snapshot, tiers=tiers, provider=self.provider, threshold=self.threshold
        )
        return [
            s
            for s in items
            if (snapshot.portal_id, s.suggestion_id) not in self._rejected
        ]

    def reject(self, portal_id: str, suggestion_id: str) -> None:
        self._rejected.add((portal_id, suggestion_id))
        path = self.store_dir / REJECTED_FILE
        record = format_record(
            (portal_id, suggestion_id, format_timestamp(self.now()))
        )
        with open(path, "a", encoding="utf-8") as handle:
            handle.write(record + "\n")

    def _load_rejected(self) -> None:
        path = self.store_dir / REJECTED_FILE
        if not path.exists():
            return
        for line in path.read_text(encoding="utf-8").split("\n"):
            if not line:
                continue
            fields = parse_record(line)
            if len(fields) >= 2:
                self._rejected.add((fields[0], fields[1]))


def suggestion_to_json(s: MergeSuggestion, snapshot: PortalSnapshot) -> dict:
    usage = {t.name: t.usage_count for t in snapshot.tags}
    members = []
    for name in s.members:
        members.append(
            {
                "name": name,
                "usage_count": usage.get(name, 0),
                "datasets": [
                    ds.dataset_id for ds in snapshot.datasets if name in ds.tag_names
                ],
            }
        )
    return {
        "suggestion_id": s.suggestion_id,
        "tier": s.tier,
        "confidence": s.confidence,
        "members": members,
        "proposed_survivor": s.proposed_survivor,
        "evidence": s.evidence,
        "status": s.status,
    }


def create_app(
    corpus_dir: Path | str,
    store: TagStore,
    provider: LexiconProvider | None = None,
    threshold: float = DEFAULT_THRESHOLD,
    server_base: str = DEFAULT_SERVER_BASE,
    ui_dir: Path | str | None = None,
    now: Callable[[], datetime] = utc_now,
) -> FastAPI:
    corpus_dir = Path(corpus_dir)
    state = CurationState(corpus_dir, store.directory, provider, threshold, now=now)
    app = FastAPI(title="odtags tag server", version="1")
    app.state.store = store
    app.state.curation = state

    def portal_bases() -> dict[str, str]:
        bases = {}
        for portal_id in state.portal_ids():
            try:
                bases[portal_id] = state.load_portal(portal_id).base_url
            except Exception:
                continue
        return bases

    def ttl_response(text: str) -> Response:
        return Response(content=text, media_type="text/turtle; charset=utf-8")

    # ------------------------------------------------------------------
    # global tags

    @app.get("/api/v1/tags")
    def list_tags(q: str = Query(default=""), page: int = Query(default=1, ge=1)):
        matches = store.search(q)
        start = (page - 1) * PAGE_SIZE
        return {
            "total": len(matches),
            "page": page,
            "page_size": PAGE_SIZE,
            "tags": [tag_to_json(t) for t in matches[start : start + PAGE_SIZE]],
        }

    @app.post("/api/v1/tags", status_code=201)
    def create_tag(body: TagCreateBody):
        try:
            tag = store.create(body.label, body.meanings)
        except ConflictError as exc:
            raise HTTPException(409, f"slug already exists: {exc}") from exc
        except ValidationError as exc:
            raise HTTPException(422, str(exc)) from exc
        return tag_to_json(tag)

    @app.get("/api/v1/export.ttl")
    def export_all():
        return ttl_response(
            export_turtle(
                store.all_tags(),
                server_base=server_base,
                portal_bases=portal_bases(),
                corpus=state.corpus(),
            )
        )

    @app.get("/api/v1/tags/{slug}.ttl")
    def export_tag(slug: str):
        try:
            tag = store.get(slug)
        except NotFoundError as exc:
            raise HTTPException(404, f"unknown tag {slug!r}") from exc
        return ttl_response(
            export_turtle(
                [tag],
                server_base=server_base,
                portal_bases=portal_bases(),
                corpus=state.corpus(),
            )
        )

    @app.get("/api/v1/tags/{slug}")
    def get_tag(slug: str):
        try:
            return tag_to_json(store.get(slug))
        except NotFoundError as exc:
            raise HTTPException(404, f"unknown tag {slug!r}") from exc

    @app.post("/api/v1/tags/{slug}/links")
    def add_link(slug: str, body: LinkBody, response: Response):
        try:
            already = (body.portal_id, body.tag_name) in store.get(slug).local_links
            tag = store.link_local_tag(slug, body.portal_id, body.tag_name)
        except NotFoundError as exc:
            raise HTTPException(404, f"unknown tag {slug!r}") from exc
        except ValidationError as exc:
            raise HTTPException(422, str(exc)) from exc
        response.status_code = 200 if already else 201
        return tag_to_json(tag)

    @app.delete("/api/v1/tags/{slug}/links")
    def remove_link(slug: str, portal_id: str, tag_name: str):
        try:
            tag = store.unlink_local_tag(slug, portal_id, tag_name)
        except NotFoundError as exc:
            raise HTTPException(404, str(exc)) from exc
        return tag_to_json(tag)

    @app.post("/api/v1/tags/{slug}/relations")
    def add_relation(slug: str, body: RelationBody, response: Response):
        try:
            kind = RelationKind(body.kind)
        except ValueError as exc:
            raise HTTPException(422, f"unknown relation kind {body.kind!r}") from exc
        try:
            before = store.get(slug).relations if store.has(slug) else ()
            store.relate(slug, kind, body.target)
        except NotFoundError as exc:
            raise HTTPException(404, str(exc)) from exc
        except ValidationError as exc:
            raise HTTPException(422, str(exc)) from exc
        response.status_code = 200 if (kind, body.target) in before else 201
        return tag_to_json(store.get(slug))

    @app.delete("/api/v1/tags/{slug}/relations")
    def remove_relation(slug: str, kind: str, target: str):
        try:
            relation = RelationKind(kind)
        except ValueError as exc:
            raise HTTPException(422, f"unknown relation kind {kind!r}") from exc
        try:
            store.unrelate(slug, relation, target)
        except NotFoundError as exc:
            raise HTTPException(404, str(exc)) from exc
        return tag_to_json(store.get(slug))

    # ------------------------------------------------------------------
    # curation

    @app.get("/api/v1/portals")
    def list_portals():
        portals = []
        for portal_id in state.portal_ids():
            snapshot = state.load_portal(portal_id)
            portals.append(
                {
                    "portal_id": portal_id,
                    "base_url": snapshot.base_url,
                    "locale": snapshot.locale,
                    "dataset_count": len(snapshot.datasets),
                    "tag_count": len(snapshot.tags),
                }
            )
        return {"portals": portals}

    def load_portal_or_404(portal_id: str) -> PortalSnapshot:
        try:
            return state.load_portal(portal_id)
        except NotFoundError as exc:
            raise HTTPException(404, f"unknown portal {portal_id!r}") from exc

    @app.get("/api/v1/portals/{portal_id}/tags")
    def portal_tags(portal_id: str):
        snapshot = load_portal_or_404(portal_id)
        return {
            "portal_id": portal_id,
            "tags": [
                {"name": t.name, "usage_count": t.usage_count, "origin": t.origin}
                for t in snapshot.tags
            ],
        }

    @app.get("/api/v1/portals/{portal_id}/suggestions")
    def portal_suggestions(portal_id: str, tier: int | None = Query(default=None)):
        if tier is not None and tier not in (1, 2, 3):
            raise HTTPException(422, "tier must be 1, 2, or 3")
        snapshot = load_portal_or_404(portal_id)
        tiers = (tier,) if tier else (1, 2, 3)
        items = state.suggestions(snapshot, tiers)
        return {
            "portal_id": portal_id,
            "suggestions": [suggestion_to_json(s, snapshot) for s in items],
        }

    @app.post("/api/v1/portals/{portal_id}/suggestions/{sid}/accept")
    def accept_suggestion(portal_id: str, sid: str, body: AcceptBody):
        with state.portal_lock(portal_id):
            snapshot = load_portal_or_404(portal_id)
            current = {s.suggestion_id: s for s in state.suggestions(snapshot, (1, 2, 3))}
            suggestion = current.get(sid)
            if suggestion is None:
                raise HTTPException(
                    410, f"suggestion {sid} is stale; refresh the queue"
                )
            if body.survivor not in suggestion.members:
                raise HTTPException(422, f"survivor {body.survivor!r} not in members")
            try:
                merged, entry = apply_merge(
                    snapshot, suggestion, survivor=body.survivor, now=state.now
                )
            except StaleSuggestionError as exc:
                raise HTTPException(410, str(exc)) from exc
            if entry is not None:
                save_snapshot(merged, snapshot_path(corpus_dir, portal_id))
                append_merge_log(corpus_dir / MERGE_LOG_FILE, entry)
            return {
                "applied": entry is not None,
                "portal_id": portal_id,
                "survivor": body.survivor,
                "tag_count": len(merged.tags),
            }

    @app.post("/api/v1/portals/{portal_id}/suggestions/{sid}/reject")
    def reject_suggestion(portal_id: str, sid: str):
        with state.portal_lock(portal_id):
            snapshot = load_portal_or_404(portal_id)
            current = {s.suggestion_id for s in state.suggestions(snapshot, (1, 2, 3))}
            if sid not in current:
                raise HTTPException(
                    410, f"suggestion {sid} is stale; refresh the queue"
                )
            state.reject(portal_id, sid)
        return {"rejected": sid, "portal_id": portal_id}

    if ui_dir is not None and Path(ui_dir).is_dir():
        from fastapi.staticfiles import StaticFiles

        app.mount("/", StaticFiles(directory=str(ui_dir), html=True), name="ui")

    return app
