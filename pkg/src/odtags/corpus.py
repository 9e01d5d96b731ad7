"""Domain types for harvested portal metadata and the file-backed
snapshot store.

One portal snapshot is one ``.snap`` file of line-delimited records:
a ``portal`` header, one ``dataset`` record per dataset, then one
``tag`` record per local tag. Snapshots are treated as immutable
values once loaded; mutation-style operations return new snapshots.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from datetime import datetime
from pathlib import Path

from .normalize import canonicalize
from .records import (
    atomic_write_text,
    format_record,
    format_timestamp,
    parse_record,
    parse_timestamp,
    utc_now,
)

SNAPSHOT_SUFFIX = ".snap"

#: Where a tag name was observed during harvesting.
TAG_ORIGINS = ("datasets", "registry", "both")


class StorageError(Exception):
    """Snapshot file could not be read or written."""


class SnapshotParseError(ValueError):
    """Snapshot file is structurally malformed."""

    def __init__(self, path: Path | str, line_no: int, message: str):
        super().__init__(f"{path}:{line_no}: {message}")
        self.path = str(path)
        self.line_no = line_no


class SnapshotValidationError(ValueError):
    """A snapshot violates a domain invariant."""

    def __init__(self, invariant: str, message: str):
        super().__init__(f"{invariant}: {message}")
        self.invariant = invariant


@dataclass
class Dataset:
    dataset_id: str
    title: str
    tag_names: list[str] = field(default_factory=list)


@dataclass
class LocalTag:
    """A raw tag string as published by one portal.

    ``canonical`` is derived from ``name`` and kept in sync; it is never
    written to disk. ``origin`` records whether the name came from
    dataset metadata, the portal's tag registry, or both.
    """

    name: str
    usage_count: int = 0
    origin: str = "datasets"
    canonical: str = field(init=False)

    def __post_init__(self) -> None:
        self.canonical = canonicalize(self.name)


@dataclass
class PortalSnapshot:
    portal_id: str
    base_url: str
    locale: str
    fetched_at: datetime
    datasets: list[Dataset] = field(default_factory=list)
    tags: list[LocalTag] = field(default_factory=list)
    #: True when the locale was not discovered and fell back to "en".
    locale_estimated: bool = False

    def tag(self, name: str) -> LocalTag:
        for t in self.tags:
            if t.name == name:
                return t
        raise KeyError(name)

    def tag_names(self) -> set[str]:
        return {t.name for t in self.tags}


@dataclass
class Corpus:
    snapshots: list[PortalSnapshot] = field(default_factory=list)

    def __post_init__(self) -> None:
        ids = [s.portal_id for s in self.snapshots]
        if len(ids) != len(set(ids)):
            dupes = sorted({i for i in ids if ids.count(i) > 1})
            raise SnapshotValidationError(
                "portal-ids-distinct", f"duplicate portal ids: {', '.join(dupes)}"
            )

    def get(self, portal_id: str) -> PortalSnapshot:
        for s in self.snapshots:
            if s.portal_id == portal_id:
                return s
        raise KeyError(portal_id)

    def portal_ids(self) -> list[str]:
        return [s.portal_id for s in self.snapshots]


def new_snapshot(
    portal_id: str,
    base_url: str,
    locale: str,
    datasets: list[Dataset],
    extra_tags: list[LocalTag] | None = None,
    fetched_at: datetime | None = None,
    locale_estimated: bool = False,
) -> PortalSnapshot:
    """Build a snapshot from datasets, deriving the tag list.

    The tag list is the union of every name used by a dataset plus
    ``extra_tags`` (registry entries, possibly unused). Usage counts
    are computed here.
    """
    tags: dict[str, LocalTag] = {}
    for extra in extra_tags or []:
        tags[extra.name] = LocalTag(name=extra.name, origin=extra.origin)
    for ds in datasets:
        for name in ds.tag_names:
            if name not in tags:
                tags[name] = LocalTag(name=name)
            elif tags[name].origin == "registry":
                tags[name].origin = "both"
    snapshot = PortalSnapshot(
        portal_id=portal_id,
        base_url=base_url,
        locale=locale,
        fetched_at=fetched_at or utc_now(),
        datasets=datasets,
        tags=sorted(tags.values(), key=lambda t: t.name),
        locale_estimated=locale_estimated,
    )
    snapshot = recount_usage(snapshot)
    validate_snapshot(snapshot)
    return snapshot


def recount_usage(snapshot: PortalSnapshot) -> PortalSnapshot:
    """Return a snapshot whose usage counts match its datasets.

    Tags used by no dataset are retained with a count of zero.
    Idempotent.
    """
    counts: dict[str, int] = {}
    for ds in snapshot.datasets:
        for name in set(ds.tag_names):
            counts[name] = counts.get(name, 0) + 1
    tags = [replace(t, usage_count=counts.get(t.name, 0)) for t in snapshot.tags]
    return replace(snapshot, tags=tags)


def validate_snapshot(snapshot: PortalSnapshot) -> None:
    """Check every snapshot invariant, raising on the first violation."""
    if not snapshot.portal_id:
        raise SnapshotValidationError("portal-id-nonempty", "portal_id is empty")
    if not snapshot.locale:
        raise SnapshotValidationError("locale-nonempty", "locale is empty")

    seen_datasets: set[str] = set()
    for ds in snapshot.datasets:
        if not ds.dataset_id:
            raise SnapshotValidationError("dataset-id-nonempty", "dataset_id is empty")
        if ds.dataset_id in seen_datasets:
            raise SnapshotValidationError(
                "dataset-ids-unique", f"duplicate dataset id {ds.dataset_id!r}"
            )
        seen_datasets.add(ds.dataset_id)
        if len(ds.tag_names) != len(set(ds.tag_names)):
            raise SnapshotValidationError(
                "dataset-tags-unique",
                f"dataset {ds.dataset_id!r} lists a tag more than once",
            )

    names: set[str] = set()
    for tag in snapshot.tags:
        if not tag.name:
            raise SnapshotValidationError("tag-name-nonempty", "tag with empty name")
        if tag.name in names:
            raise SnapshotValidationError(
                "tag-names-unique", f"tag {tag.name!r} listed more than once"
            )
        if tag.origin not in TAG_ORIGINS:
            raise SnapshotValidationError(
                "tag-origin-known", f"tag {tag.name!r} has origin {tag.origin!r}"
            )
        names.add(tag.name)

    counts: dict[str, int] = {}
    for ds in snapshot.datasets:
        for name in set(ds.tag_names):
            if name not in names:
                raise SnapshotValidationError(
                    "dataset-tags-listed",
                    f"dataset {ds.dataset_id!r} references unlisted tag {name!r}",
                )
            counts[name] = counts.get(name, 0) + 1
    for tag in snapshot.tags:
        expected = counts.get(tag.name, 0)
        if tag.usage_count != expected:
            raise SnapshotValidationError(
                "usage-count-consistent",
                f"tag {tag.name!r} has usage_count {tag.usage_count}, datasets say {expected}",
            )


def save_snapshot(snapshot: PortalSnapshot, path: Path | str) -> None:
    """Write a snapshot atomically (temp file then rename)."""
    validate_snapshot(snapshot)
    lines = [
        format_record(
            (
                "portal",
                snapshot.portal_id,
                snapshot.base_url,
                snapshot.locale,
                "1" if snapshot.locale_estimated else "0",
                format_timestamp(snapshot.fetched_at),
            )
        )
    ]
    for ds in snapshot.datasets:
        lines.append(format_record(("dataset", ds.dataset_id, ds.title, *ds.tag_names)))
    for tag in snapshot.tags:
        lines.append(format_record(("tag", tag.name, str(tag.usage_count), tag.origin)))
    try:
        atomic_write_text(path, "\n".join(lines) + "\n")
    except OSError as exc:
        raise StorageError(f"cannot write snapshot {path}: {exc}") from exc


def load_snapshot(path: Path | str) -> PortalSnapshot:
    """Parse and fully re-validate a snapshot file."""
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise StorageError(f"cannot read snapshot {path}: {exc}") from exc

    header: PortalSnapshot | None = None
    datasets: list[Dataset] = []
    tags: list[LocalTag] = []
    for line_no, line in enumerate(text.split("\n"), 1):
        if not line:
            continue
        fields = parse_record(line)
        kind = fields[0]
        if kind == "portal":
            if header is not None:
                raise SnapshotParseError(path, line_no, "second portal header")
            if len(fields) != 6:
                raise SnapshotParseError(path, line_no, "portal header needs 6 fields")
            try:
                fetched_at = parse_timestamp(fields[5])
            except ValueError as exc:
                raise SnapshotParseError(path, line_no, f"bad timestamp: {exc}") from exc
            header = PortalSnapshot(
                portal_id=fields[1],
                base_url=fields[2],
                locale=fields[3],
                fetched_at=fetched_at,
                locale_estimated=fields[4] == "1",
            )
        elif kind == "dataset":
            if header is None:
                raise SnapshotParseError(path, line_no, "dataset before portal header")
            if len(fields) < 3:
                raise SnapshotParseError(path, line_no, "dataset needs id and title")
            datasets.append(Dataset(fields[1], fields[2], list(fields[3:])))
        elif kind == "tag":
            if header is None:
                raise SnapshotParseError(path, line_no, "tag before portal header")
            if len(fields) != 4:
                raise SnapshotParseError(path, line_no, "tag record needs 4 fields")
            try:
                usage = int(fields[2])
            except ValueError as exc:
                raise SnapshotParseError(path, line_no, "usage count not an integer") from exc
            if usage < 0:
                raise SnapshotParseError(path, line_no, "usage count negative")
            tags.append(LocalTag(name=fields[1], usage_count=usage, origin=fields[3]))
        else:
            raise SnapshotParseError(path, line_no, f"unknown record kind {kind!r}")

    if header is None:
        raise SnapshotParseError(path, 1, "missing portal header")
    header.datasets = datasets
    header.tags = tags
    validate_snapshot(header)
    return header


def snapshot_path(corpus_dir: Path | str, portal_id: str) -> Path:
    return Path(corpus_dir) / f"{portal_id}{SNAPSHOT_SUFFIX}"


def save_corpus(corpus: Corpus, corpus_dir: Path | str) -> None:
    for snapshot in corpus.snapshots:
        save_snapshot(snapshot, snapshot_path(corpus_dir, snapshot.portal_id))


def load_corpus(corpus_dir: Path | str) -> Corpus:
    """Load every ``.snap`` file in a directory, ordered by portal id."""
    corpus_dir = Path(corpus_dir)
    snapshots = []
    if corpus_dir.exists():
        for path in sorted(corpus_dir.glob(f"*{SNAPSHOT_SUFFIX}")):
            snapshots.append(load_snapshot(path))
    snapshots.sort(key=lambda s: s.portal_id)
    return Corpus(snapshots=snapshots)
