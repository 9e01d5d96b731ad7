"""Tiered merge suggestions and curator-approved merge application.

Three suggestion tiers in decreasing confidence: tags sharing a
canonical key (tier 1), cluster representatives within edit distance
two (tier 2), and semantically similar representatives per a provider
(tier 3). Suggestions are clusters, not raw pairs, so curators review
each group once. Applied merges are appended to a replayable log.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field, replace
from datetime import datetime
from pathlib import Path

from .corpus import Corpus, Dataset, LocalTag, PortalSnapshot, recount_usage
from .lexlookup import to_iso639_3
from .metrics import canonical_clusters
from .normalize import fuzzy_eligible, levenshtein_within
from .records import format_record, format_timestamp, parse_record, parse_timestamp, utc_now
from .semsim import DEFAULT_THRESHOLD, LexiconProvider

CONFIDENCE_BY_TIER = {1: "high", 2: "medium", 3: "low"}


class StaleSuggestionError(Exception):
    """Snapshot changed since the suggestion was computed; re-suggest."""


@dataclass
class MergeSuggestion:
    suggestion_id: str
    portal_id: str
    tier: int
    members: list[str]
    proposed_survivor: str
    evidence: dict[str, str]
    confidence: str
    status: str = "pending"


@dataclass
class MergeLogEntry:
    portal_id: str
    survivor: str
    members: list[str]
    timestamp: datetime


def suggestion_id(portal_id: str, members: list[str], tier: int) -> str:
    """Stable id: hash of portal, sorted member names, and tier."""
    digest = hashlib.sha256()
    digest.update(portal_id.encode("utf-8"))
    digest.update(b"\x00")
    digest.update(str(tier).encode("ascii"))
    for name in sorted(members):
        digest.update(b"\x00")
        digest.update(name.encode("utf-8"))
    return digest.hexdigest()[:16]


def pick_survivor(snapshot: PortalSnapshot, members: list[str]) -> str:
    """Default survivor: most used; ties prefer an all-lowercase
    spelling, then the lexicographically smallest."""
    usage = {t.name: t.usage_count for t in snapshot.tags}
    best = max(usage.get(m, 0) for m in members)
    tied = [m for m in members if usage.get(m, 0) == best]
    lowercase = [m for m in tied if m == m.lower()]
    return min(lowercase) if lowercase else min(tied)


def _suggestion(
    snapshot: PortalSnapshot, tier: int, members: list[str], evidence: dict[str, str]
) -> MergeSuggestion:
    ordered = sorted(members)
    return MergeSuggestion(
        suggestion_id=suggestion_id(snapshot.portal_id, ordered, tier),
        portal_id=snapshot.portal_id,
        tier=tier,
        members=ordered,
        proposed_survivor=pick_survivor(snapshot, ordered),
        evidence=evidence,
        confidence=CONFIDENCE_BY_TIER[tier],
    )


def suggest_tier1(snapshot: PortalSnapshot) -> list[MergeSuggestion]:
    """One suggestion per canonical-key cluster of two or more tags."""
    suggestions = []
    for key, names in sorted(canonical_clusters(snapshot).items()):
        if len(names) >= 2:
            suggestions.append(
                _suggestion(snapshot, 1, names, {"canonical": key})
            )
    return suggestions


def _cluster_representatives(snapshot: PortalSnapshot) -> dict[str, str]:
    """Map each canonical key to its cluster's survivor raw name."""
    return {
        key: pick_survivor(snapshot, names)
        for key, names in canonical_clusters(snapshot).items()
    }


def _eligible_key_pairs(keys: list[str], k: int):
    """Distinct fuzzy-eligible key pairs within distance k, by length band."""
    eligible = sorted(key for key in keys if fuzzy_eligible(key))
    by_length: dict[int, list[str]] = {}
    for key in eligible:
        by_length.setdefault(len(key), []).append(key)
    for key in eligible:
        for length in range(len(key), len(key) + k + 1):
            for other in by_length.get(length, ()):
                if length == len(key) and other <= key:
                    continue
                dist = levenshtein_within(key, other, k)
                if dist is not None and dist >= 1:
                    yield key, other, dist


def suggest_tier2(snapshot: PortalSnapshot) -> list[MergeSuggestion]:
    """Pairs of cluster representatives at canonical edit distance 1-2.

    Keys containing digits or shorter than four characters never
    appear; pairs inside one tier-1 cluster cannot appear because the
    keys compared here are distinct by construction.
    """
    representatives = _cluster_representatives(snapshot)
    suggestions = []
    for key_a, key_b, dist in _eligible_key_pairs(list(representatives), 2):
        members = [representatives[key_a], representatives[key_b]]
        suggestions.append(
            _suggestion(
                snapshot,
                2,
                members,
                {"distance": str(dist), "canonical_a": key_a, "canonical_b": key_b},
            )
        )
    suggestions.sort(key=lambda s: s.members)
    return suggestions


def suggest_tier3(
    snapshot: PortalSnapshot,
    provider: LexiconProvider,
    threshold: float = DEFAULT_THRESHOLD,
) -> list[MergeSuggestion]:
    """Semantically similar representative pairs not covered by tiers 1-2."""
    representatives = _cluster_representatives(snapshot)
    try:
        language = to_iso639_3(snapshot.locale)
    except ValueError:
        language = None
    covered = {
        frozenset((a, b)) for a, b, _ in _eligible_key_pairs(list(representatives), 2)
    }
    keys = sorted(
        key
        for key in representatives
        if fuzzy_eligible(key) and provider.knows(key, language)
    )
    suggestions = []
    for i, key_a in enumerate(keys):
        for key_b in keys[i + 1:]:
            if frozenset((key_a, key_b)) in covered:
                continue
            score = provider.similarity(key_a, key_b, language)
            if score >= threshold:
                members = [representatives[key_a], representatives[key_b]]
                suggestions.append(
                    _suggestion(
                        snapshot,
                        3,
                        members,
                        {"score": f"{score:.4f}", "threshold": f"{threshold:.4f}"},
                    )
                )
    suggestions.sort(key=lambda s: s.members)
    return suggestions


def suggest(
    snapshot: PortalSnapshot,
    tiers: tuple[int, ...] = (1, 2, 3),
    provider: LexiconProvider | None = None,
    threshold: float = DEFAULT_THRESHOLD,
) -> list[MergeSuggestion]:
    """All suggestions for the requested tiers, ordered tier then id."""
    out: list[MergeSuggestion] = []
    if 1 in tiers:
        out.extend(suggest_tier1(snapshot))
    if 2 in tiers:
        out.extend(suggest_tier2(snapshot))
    if 3 in tiers and provider is not None:
        out.extend(suggest_tier3(snapshot, provider, threshold))
    out.sort(key=lambda s: (s.tier, s.suggestion_id))
    return out


def merge_tags(
    snapshot: PortalSnapshot, members: list[str], survivor: str
) -> PortalSnapshot:
    """Core merge: every dataset tagged with a member carries the
    survivor instead, duplicates collapsed, counts recomputed."""
    drop = set(members) - {survivor}
    datasets = []
    for ds in snapshot.datasets:
        if any(name in drop for name in ds.tag_names):
            new_names: list[str] = []
            for name in ds.tag_names:
                target = survivor if name in drop or name == survivor else name
                if target not in new_names:
                    new_names.append(target)
            datasets.append(Dataset(ds.dataset_id, ds.title, new_names))
        else:
            datasets.append(ds)
    origins = set()
    dropped_any = False
    survivor_listed = False
    for tag in snapshot.tags:
        if tag.name == survivor:
            origins.add(tag.origin)
            survivor_listed = True
        elif tag.name in drop:
            origins.add(tag.origin)
            dropped_any = True
    if origins == {"datasets"}:
        origin = "datasets"
    elif origins == {"registry"}:
        origin = "registry"
    else:
        origin = "both"
    tags = [t for t in snapshot.tags if t.name not in drop]
    tags = [replace(t, origin=origin) if t.name == survivor else t for t in tags]
    if dropped_any and not survivor_listed:
        tags.append(LocalTag(name=survivor, origin=origin))
        tags.sort(key=lambda t: t.name)
    return recount_usage(replace(snapshot, datasets=datasets, tags=tags))


def apply_merge(
    snapshot: PortalSnapshot,
    suggestion: MergeSuggestion,
    survivor: str | None = None,
    now=utc_now,
) -> tuple[PortalSnapshot, MergeLogEntry | None]:
    """Apply a suggestion, returning the new snapshot and a log entry.

    Idempotent per suggestion: if the merge already happened (survivor
    present, all other members gone) the snapshot is returned unchanged
    with no log entry. A partially-missing member set means the
    snapshot diverged from the suggestion, which is a stale-suggestion
    error.
    """
    survivor = survivor or suggestion.proposed_survivor
    if survivor not in suggestion.members:
        raise ValueError(f"survivor {survivor!r} is not a member of the suggestion")
    if suggestion.status == "rejected":
        raise ValueError("suggestion was rejected")
    present = snapshot.tag_names()
    missing = [m for m in suggestion.members if m not in present]
    if not missing:
        merged = merge_tags(snapshot, suggestion.members, survivor)
        entry = MergeLogEntry(
            portal_id=snapshot.portal_id,
            survivor=survivor,
            members=sorted(suggestion.members),
            timestamp=now(),
        )
        return merged, entry
    if set(missing) == set(suggestion.members) - {survivor} and survivor in present:
        return snapshot, None
    raise StaleSuggestionError(
        f"members {missing} no longer exist in portal {snapshot.portal_id!r}"
    )


@dataclass
class ReductionRow:
    portal_id: str
    tag_count: int
    tier1_removable: int
    tier1_fraction: float
    tier2_pairs: int
    tier2_fraction: float


@dataclass
class ReductionReport:
    rows: list[ReductionRow] = field(default_factory=list)

    @property
    def total_tags(self) -> int:
        return sum(r.tag_count for r in self.rows)

    @property
    def total_tier1_removable(self) -> int:
        return sum(r.tier1_removable for r in self.rows)

    @property
    def total_tier2_pairs(self) -> int:
        return sum(r.tier2_pairs for r in self.rows)

    def to_text(self) -> str:
        from .metrics import REFERENCE_SURVEY

        lines = ["portal_id\ttag_count\ttier1_removable\ttier1_fraction\ttier2_pairs\ttier2_fraction"]
        for r in self.rows:
            lines.append(
                f"{r.portal_id}\t{r.tag_count}\t{r.tier1_removable}\t"
                f"{r.tier1_fraction:.4f}\t{r.tier2_pairs}\t{r.tier2_fraction:.4f}"
            )
        total = self.total_tags
        lines.append(
            f"TOTAL\t{total}\t{self.total_tier1_removable}\t"
            f"{self.total_tier1_removable / total if total else 0.0:.4f}\t"
            f"{self.total_tier2_pairs}\t"
            f"{self.total_tier2_pairs / total if total else 0.0:.4f}"
        )
        lines.append(
            "reference (2015 survey, not reproducible here): "
            f"tier-1 removable {REFERENCE_SURVEY['tier1_removable']} "
            f"({REFERENCE_SURVEY['tier1_removable_fraction']:.1%}), "
            f"distance<=2 pairs {REFERENCE_SURVEY['tier2_pairs']} "
            f"({REFERENCE_SURVEY['tier2_pair_fraction']:.1%})"
        )
        return "\n".join(lines) + "\n"


def reduction_report(corpus: Corpus) -> ReductionReport:
    """How many tags the cleanup tiers could remove or pair up.

    Tier-1 removable counts each duplicate cluster at size minus one;
    tier-2 pairs are counted between cluster representatives, i.e.
    after the tier-1 collapse. Fractions are against the portal's tag
    count.
    """
    report = ReductionReport()
    for snapshot in corpus.snapshots:
        clusters = canonical_clusters(snapshot)
        removable = sum(len(names) - 1 for names in clusters.values())
        pairs = sum(1 for _ in _eligible_key_pairs(list(clusters), 2))
        count = len(snapshot.tags)
        report.rows.append(
            ReductionRow(
                portal_id=snapshot.portal_id,
                tag_count=count,
                tier1_removable=removable,
                tier1_fraction=removable / count if count else 0.0,
                tier2_pairs=pairs,
                tier2_fraction=pairs / count if count else 0.0,
            )
        )
    return report


# Merge log: `portal_id  survivor  member1,member2  timestamp` records.
# Commas inside member names are escaped so the join stays parseable.


def _encode_members(members: list[str]) -> str:
    return ",".join(m.replace("\\", "\\\\").replace(",", "\\,") for m in members)


def _decode_members(encoded: str) -> list[str]:
    members = []
    current: list[str] = []
    i = 0
    while i < len(encoded):
        c = encoded[i]
        if c == "\\" and i + 1 < len(encoded):
            current.append(encoded[i + 1])
            i += 2
        elif c == ",":
            members.append("".join(current))
            current = []
            i += 1
        else:
            current.append(c)
            i += 1
    members.append("".join(current))
    return members


def append_merge_log(path: Path | str, entry: MergeLogEntry) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    record = format_record(
        (
            entry.portal_id,
            entry.survivor,
            _encode_members(entry.members),
            format_timestamp(entry.timestamp),
        )
    )
    with open(path, "a", encoding="utf-8") as handle:
        handle.write(record + "\n")


def read_merge_log(path: Path | str) -> list[MergeLogEntry]:
    path = Path(path)
    if not path.exists():
        return []
    entries = []
    for line in path.read_text(encoding="utf-8").split("\n"):
        if not line:
            continue
        fields = parse_record(line)
        if len(fields) != 4:
            raise ValueError(f"malformed merge log line: {line!r}")
        entries.append(
            MergeLogEntry(
                portal_id=fields[0],
                survivor=fields[1],
                members=_decode_members(fields[2]),
                timestamp=parse_timestamp(fields[3]),
            )
        )
    return entries


def replay_merge_log(
    snapshot: PortalSnapshot, entries: list[MergeLogEntry]
) -> PortalSnapshot:
    """Re-apply logged merges; reproduces the merged snapshot exactly."""
    current = snapshot
    for entry in entries:
        if entry.portal_id != snapshot.portal_id:
            continue
        current = merge_tags(current, entry.members, entry.survivor)
    return current
