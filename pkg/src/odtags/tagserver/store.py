"""Persistent store for global tags.

Mutations append to a journal before they are acknowledged; replaying
the journal from an empty store reproduces the live state exactly,
which doubles as the crash-recovery path and the consistency oracle in
tests. A compacted state snapshot bounds journal growth; journal lines
carry sequence numbers so replay after a partial compaction stays
correct.

Readers are never blocked: the whole (tags, relations) state is one
tuple swapped atomically after each acknowledged write, so a reader
sees either the state before a mutation or after it, never a partial
one.
"""

from __future__ import annotations

import os
import threading
from dataclasses import dataclass, replace
from datetime import datetime
from enum import Enum
from pathlib import Path
from typing import Callable, Iterable

from ..normalize import canonicalize
from ..records import (
    atomic_write_text,
    format_record,
    format_timestamp,
    parse_record,
    parse_timestamp,
    utc_now,
)

JOURNAL_FILE = "journal.log"
STATE_FILE = "state.snap"


class ConflictError(Exception):
    """Slug already taken."""


class NotFoundError(KeyError):
    """No tag under that slug."""


class ValidationError(ValueError):
    """Request violates a store invariant."""


class RelationKind(str, Enum):
    BROADER = "broader"
    NARROWER = "narrower"
    RELATED = "related"
    SAME_AS = "sameAs"


#: Inverse pairs are stored in one normalized direction and mirrored on
#: read: broader(a, b) implies narrower(b, a); related and sameAs are
#: symmetric.
_SYMMETRIC = {RelationKind.RELATED, RelationKind.SAME_AS}

Relation = tuple[str, RelationKind, str]


@dataclass(frozen=True)
class GlobalTag:
    slug: str
    label: str
    meanings: tuple[str, ...]
    relations: tuple[tuple[RelationKind, str], ...]
    local_links: tuple[tuple[str, str], ...]
    created_at: datetime
    updated_at: datetime


def derive_slug(label: str) -> str:
    slug = canonicalize(label)
    if not slug:
        raise ValidationError(f"label {label!r} yields an empty slug")
    return slug


@dataclass(frozen=True)
class _TagRecord:
    """Internal tag state without materialized relations."""

    slug: str
    label: str
    meanings: tuple[str, ...]
    local_links: tuple[tuple[str, str], ...]
    created_at: datetime
    updated_at: datetime


_State = tuple[dict[str, _TagRecord], frozenset[Relation]]


class TagStore:
    """Journal-backed store; one writer at a time, lock-free readers."""

    def __init__(
        self,
        directory: Path | str,
        now: Callable[[], datetime] = utc_now,
        fsync: bool = True,
    ):
        self.directory = Path(directory)
        self.directory.mkdir(parents=True, exist_ok=True)
        self.now = now
        self.fsync = fsync
        self._write_lock = threading.Lock()
        self._state: _State = ({}, frozenset())
        self._seq = 0
        self._load()
        self._journal = open(self.journal_path, "a", encoding="utf-8")

    # ------------------------------------------------------------------
    # paths and lifecycle

    @property
    def journal_path(self) -> Path:
        return self.directory / JOURNAL_FILE

    @property
    def state_path(self) -> Path:
        return self.directory / STATE_FILE

    def close(self) -> None:
        if self._journal is not None:
            self._journal.close()
            self._journal = None

    def __enter__(self) -> "TagStore":
        return self

    def __exit__(self, *exc) -> None:
        self.close()

    # ------------------------------------------------------------------
    # reads (one atomic state fetch; no locking)

    def get(self, slug: str) -> GlobalTag:
        tags, relations = self._state
        record = tags.get(slug)
        if record is None:
            raise NotFoundError(slug)
        return _materialize(record, relations)

    def has(self, slug: str) -> bool:
        return slug in self._state[0]

    def slugs(self) -> list[str]:
        return sorted(self._state[0])

    def all_tags(self) -> list[GlobalTag]:
        tags, relations = self._state
        return [_materialize(tags[slug], relations) for slug in sorted(tags)]

    def search(self, query: str) -> list[GlobalTag]:
        """Match slug, label, or linked local tag names by canonical
        substring; ranked by match strength, then slug."""
        key = canonicalize(query)
        tags, relations = self._state
        if not key:
            return [_materialize(tags[s], relations) for s in sorted(tags)]
        ranked = []
        for slug in sorted(tags):
            record = tags[slug]
            rank = None
            if slug == key:
                rank = 0
            elif slug.startswith(key):
                rank = 1
            elif key in slug:
                rank = 2
            elif key in canonicalize(record.label):
                rank = 3
            elif any(key in canonicalize(name) for _, name in record.local_links):
                rank = 4
            if rank is not None:
                ranked.append((rank, slug, record))
        ranked.sort(key=lambda item: (item[0], item[1]))
        return [_materialize(record, relations) for _, _, record in ranked]

    # ------------------------------------------------------------------
    # mutations (serialized; journal append precedes acknowledgment)

    def create(self, label: str, meanings: Iterable[str] = ()) -> GlobalTag:
        label = label.strip()
        if not label:
            raise ValidationError("label must be non-empty")
        meanings = tuple(dict.fromkeys(meanings))
        for iri in meanings:
            if "://" not in iri:
                raise ValidationError(f"meaning {iri!r} is not an absolute IRI")
        slug = derive_slug(label)
        with self._write_lock:
            tags, relations = self._state
            if slug in tags:
                raise ConflictError(slug)
            ts = self.now()
            self._append("create", slug, label, *meanings, ts=ts)
            record = _TagRecord(
                slug=slug,
                label=label,
                meanings=meanings,
                local_links=(),
                created_at=ts,
                updated_at=ts,
            )
            self._state = ({**tags, slug: record}, relations)
            return _materialize(record, relations)

    def link_local_tag(self, slug: str, portal_id: str, tag_name: str) -> GlobalTag:
        if not portal_id or not tag_name:
            raise ValidationError("portal_id and tag_name must be non-empty")
        with self._write_lock:
            tags, relations = self._state
            record = self._require(tags, slug)
            link = (portal_id, tag_name)
            if link in record.local_links:
                return _materialize(record, relations)
            ts = self.now()
            self._append("link", slug, portal_id, tag_name, ts=ts)
            record = replace(
                record, local_links=record.local_links + (link,), updated_at=ts
            )
            self._state = ({**tags, slug: record}, relations)
            return _materialize(record, relations)

    def unlink_local_tag(self, slug: str, portal_id: str, tag_name: str) -> GlobalTag:
        with self._write_lock:
            tags, relations = self._state
            record = self._require(tags, slug)
            link = (portal_id, tag_name)
            if link not in record.local_links:
                raise NotFoundError(f"{slug}: no link {link}")
            ts = self.now()
            self._append("unlink", slug, portal_id, tag_name, ts=ts)
            record = replace(
                record,
                local_links=tuple(l for l in record.local_links if l != link),
                updated_at=ts,
            )
            self._state = ({**tags, slug: record}, relations)
            return _materialize(record, relations)

    def relate(self, slug_a: str, kind: RelationKind, slug_b: str) -> None:
        kind = RelationKind(kind)
        if slug_a == slug_b:
            raise ValidationError("a tag cannot relate to itself")
        with self._write_lock:
            tags, relations = self._state
            self._require(tags, slug_a)
            self._require(tags, slug_b)
            normalized = _normalize_relation(slug_a, kind, slug_b)
            if normalized in relations:
                return
            ts = self.now()
            self._append("relate", normalized[0], normalized[1].value, normalized[2], ts=ts)
            self._state = _with_relation(tags, relations, normalized, ts, add=True)

    def unrelate(self, slug_a: str, kind: RelationKind, slug_b: str) -> None:
        kind = RelationKind(kind)
        with self._write_lock:
            tags, relations = self._state
            normalized = _normalize_relation(slug_a, kind, slug_b)
            if normalized not in relations:
                raise NotFoundError(f"no relation {slug_a} {kind.value} {slug_b}")
            ts = self.now()
            self._append("unrelate", normalized[0], normalized[1].value, normalized[2], ts=ts)
            self._state = _with_relation(tags, relations, normalized, ts, add=False)

    # ------------------------------------------------------------------
    # internals

    @staticmethod
    def _require(tags: dict[str, _TagRecord], slug: str) -> _TagRecord:
        record = tags.get(slug)
        if record is None:
            raise NotFoundError(slug)
        return record

    def _append(self, op: str, *fields: str, ts: datetime) -> None:
        self._seq += 1
        line = format_record((str(self._seq), format_timestamp(ts), op, *fields))
        self._journal.write(line + "\n")
        self._journal.flush()
        if self.fsync:
            os.fsync(self._journal.fileno())

    # ------------------------------------------------------------------
    # persistence

    def _load(self) -> None:
        tags: dict[str, _TagRecord] = {}
        relations: set[Relation] = set()
        if self.state_path.exists():
            self._load_state(self.state_path, tags, relations)
        if self.journal_path.exists():
            for line in self.journal_path.read_text(encoding="utf-8").split("\n"):
                if not line:
                    continue
                self._replay_line(line, tags, relations)
        self._state = (tags, frozenset(relations))

    def _load_state(
        self, path: Path, tags: dict[str, _TagRecord], relations: set[Relation]
    ) -> None:
        for line_no, line in enumerate(path.read_text(encoding="utf-8").split("\n"), 1):
            if not line:
                continue
            fields = parse_record(line)
            kind = fields[0]
            if kind == "snapshot":
                self._seq = int(fields[1])
            elif kind == "tag":
                slug, label, created, updated = fields[1:5]
                tags[slug] = _TagRecord(
                    slug=slug,
                    label=label,
                    meanings=tuple(fields[5:]),
                    local_links=(),
                    created_at=parse_timestamp(created),
                    updated_at=parse_timestamp(updated),
                )
            elif kind == "link":
                slug, portal_id, tag_name = fields[1:4]
                record = tags[slug]
                tags[slug] = replace(
                    record, local_links=record.local_links + ((portal_id, tag_name),)
                )
            elif kind == "rel":
                relations.add((fields[1], RelationKind(fields[2]), fields[3]))
            else:
                raise ValueError(f"{path}:{line_no}: unknown state record {kind!r}")

    def _replay_line(
        self, line: str, tags: dict[str, _TagRecord], relations: set[Relation]
    ) -> None:
        fields = parse_record(line)
        seq = int(fields[0])
        if seq <= self._seq:
            return
        self._seq = seq
        ts = parse_timestamp(fields[1])
        op = fields[2]
        args = fields[3:]
        if op == "create":
            slug, label = args[0], args[1]
            tags[slug] = _TagRecord(
                slug=slug,
                label=label,
                meanings=tuple(args[2:]),
                local_links=(),
                created_at=ts,
                updated_at=ts,
            )
        elif op == "link":
            slug, portal_id, tag_name = args
            record = tags[slug]
            link = (portal_id, tag_name)
            if link not in record.local_links:
                tags[slug] = replace(
                    record, local_links=record.local_links + (link,), updated_at=ts
                )
        elif op == "unlink":
            slug, portal_id, tag_name = args
            record = tags[slug]
            tags[slug] = replace(
                record,
                local_links=tuple(
                    l for l in record.local_links if l != (portal_id, tag_name)
                ),
                updated_at=ts,
            )
        elif op in ("relate", "unrelate"):
            relation = (args[0], RelationKind(args[1]), args[2])
            if op == "relate":
                relations.add(relation)
            else:
                relations.discard(relation)
            for slug in (args[0], args[2]):
                if slug in tags:
                    tags[slug] = replace(tags[slug], updated_at=ts)
        else:
            raise ValueError(f"unknown journal op {op!r}")

    def compact(self) -> None:
        """Fold the journal into the state snapshot.

        The snapshot is written atomically first; the journal is then
        truncated. Sequence numbers make a crash between the two steps
        harmless, because replay skips entries the snapshot covers.
        """
        with self._write_lock:
            tags, relations = self._state
            lines = [format_record(("snapshot", str(self._seq)))]
            for slug in sorted(tags):
                record = tags[slug]
                lines.append(
                    format_record(
                        (
                            "tag",
                            record.slug,
                            record.label,
                            format_timestamp(record.created_at),
                            format_timestamp(record.updated_at),
                            *record.meanings,
                        )
                    )
                )
                for portal_id, tag_name in record.local_links:
                    lines.append(format_record(("link", slug, portal_id, tag_name)))
            for a, kind, b in sorted(relations, key=lambda r: (r[0], r[1].value, r[2])):
                lines.append(format_record(("rel", a, kind.value, b)))
            atomic_write_text(self.state_path, "\n".join(lines) + "\n")
            self._journal.close()
            self._journal = open(self.journal_path, "w", encoding="utf-8")


def _normalize_relation(slug_a: str, kind: RelationKind, slug_b: str) -> Relation:
    if kind == RelationKind.NARROWER:
        return (slug_b, RelationKind.BROADER, slug_a)
    if kind in _SYMMETRIC:
        first, second = sorted((slug_a, slug_b))
        return (first, kind, second)
    return (slug_a, kind, slug_b)


def _with_relation(
    tags: dict[str, _TagRecord],
    relations: frozenset[Relation],
    relation: Relation,
    ts: datetime,
    add: bool,
) -> _State:
    updated = set(relations)
    if add:
        updated.add(relation)
    else:
        updated.discard(relation)
    a, _, b = relation
    new_tags = dict(tags)
    for slug in (a, b):
        if slug in new_tags:
            new_tags[slug] = replace(new_tags[slug], updated_at=ts)
    return (new_tags, frozenset(updated))


def _materialize(record: _TagRecord, relations: frozenset[Relation]) -> GlobalTag:
    effective: list[tuple[RelationKind, str]] = []
    for a, kind, b in relations:
        if kind == RelationKind.BROADER:
            if a == record.slug:
                effective.append((RelationKind.BROADER, b))
            if b == record.slug:
                effective.append((RelationKind.NARROWER, a))
        else:
            if a == record.slug:
                effective.append((kind, b))
            if b == record.slug:
                effective.append((kind, a))
    effective.sort(key=lambda r: (r[0].value, r[1]))
    return GlobalTag(
        slug=record.slug,
        label=record.label,
        meanings=record.meanings,
        relations=tuple(effective),
        local_links=record.local_links,
        created_at=record.created_at,
        updated_at=record.updated_at,
    )
