"""Batch-create global tags from the most portal-frequent corpus tags.

The procedure: rank unique canonical tags by how many portals use
them, look up meanings for the top candidates, expand each with
translations and synonyms, link every matching local tag (original
spelling and variants), create global tags up to a budget, and finally
relate the created tags that a similarity provider scores highly.

A lookup outage aborts the run but leaves a checkpoint with all
completed lookups, so the next run resumes instead of re-fetching.
"""

from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass, field
from pathlib import Path

from ..corpus import Corpus
from ..lexlookup import LexLookupError, to_iso639_3, translations_and_synonyms
from ..normalize import canonicalize
from ..records import format_record, parse_record
from ..semsim import DEFAULT_THRESHOLD, LexiconProvider
from .store import ConflictError, RelationKind, TagStore, derive_slug


class SeedingAborted(RuntimeError):
    """Lookup outage; progress saved for resumption."""

    def __init__(self, key: str, checkpoint_path: Path | None, cause: Exception):
        where = f"; checkpoint at {checkpoint_path}" if checkpoint_path else ""
        super().__init__(f"lookup failed for {key!r}: {cause}{where}")
        self.key = key
        self.checkpoint_path = checkpoint_path


@dataclass
class SeedCandidate:
    rank: int
    key: str
    portal_count: int
    total_usage: int
    locale: str
    label: str
    meanings: list[str] = field(default_factory=list)
    variants: list[tuple[str, str]] = field(default_factory=list)
    links: list[tuple[str, str]] = field(default_factory=list)
    exact_link_count: int = 0
    created: bool = False
    slug: str | None = None
    note: str = ""

    @property
    def variant_link_count(self) -> int:
        return len(self.links) - self.exact_link_count


@dataclass
class SeedingReport:
    top_n: int
    create_n: int
    candidates: list[SeedCandidate] = field(default_factory=list)
    related: list[tuple[str, str, float]] = field(default_factory=list)

    @property
    def created_count(self) -> int:
        return sum(1 for c in self.candidates if c.created)

    def to_text(self) -> str:
        """Deterministic report; contains no wall-clock data."""
        lines = [
            f"seeding: top {self.top_n} candidates, create budget {self.create_n}",
            "rank\tkey\tportals\tusage\tmeanings\tvariants\texact_links\ttotal_links\tcreated\tnote",
        ]
        for c in self.candidates:
            lines.append(
                "\t".join(
                    [
                        str(c.rank),
                        c.key,
                        str(c.portal_count),
                        str(c.total_usage),
                        str(len(c.meanings)),
                        str(len(c.variants)),
                        str(c.exact_link_count),
                        str(len(c.links)),
                        "yes" if c.created else "no",
                        c.note or (c.slug or ""),
                    ]
                )
            )
        for a, b, score in self.related:
            lines.append(f"related\t{a}\t{b}\t{score:.4f}")
        lines.append(f"created {self.created_count} global tags")
        return "\n".join(lines) + "\n"


def _rank_candidates(corpus: Corpus) -> list[SeedCandidate]:
    portals: dict[str, set[str]] = defaultdict(set)
    usage: dict[str, int] = defaultdict(int)
    raw_usage: dict[str, dict[str, int]] = defaultdict(lambda: defaultdict(int))
    locale_portals: dict[str, dict[str, int]] = defaultdict(lambda: defaultdict(int))
    locale_usage: dict[str, dict[str, int]] = defaultdict(lambda: defaultdict(int))
    for snapshot in corpus.snapshots:
        for tag in snapshot.tags:
            key = tag.canonical
            if not key:
                continue
            portals[key].add(snapshot.portal_id)
            usage[key] += tag.usage_count
            raw_usage[key][tag.name] += tag.usage_count
            locale_portals[key][snapshot.locale] += 1
            locale_usage[key][snapshot.locale] += tag.usage_count

    def dominant_locale(key: str) -> str:
        candidates = sorted(
            locale_portals[key],
            key=lambda loc: (-locale_portals[key][loc], -locale_usage[key][loc], loc),
        )
        return candidates[0]

    def label(key: str) -> str:
        spellings = raw_usage[key]
        return sorted(spellings, key=lambda name: (-spellings[name], name))[0]

    ranked = sorted(
        portals, key=lambda key: (-len(portals[key]), -usage[key], key)
    )
    return [
        SeedCandidate(
            rank=i + 1,
            key=key,
            portal_count=len(portals[key]),
            total_usage=usage[key],
            locale=dominant_locale(key),
            label=label(key),
        )
        for i, key in enumerate(ranked)
    ]


def _matches_by_key(corpus: Corpus) -> dict[str, list[tuple[str, str]]]:
    matches: dict[str, list[tuple[str, str]]] = defaultdict(list)
    for snapshot in corpus.snapshots:
        for tag in snapshot.tags:
            if tag.canonical:
                matches[tag.canonical].append((snapshot.portal_id, tag.name))
    for pairs in matches.values():
        pairs.sort()
    return matches


def _load_checkpoint(path: Path) -> dict[str, tuple[list[str], list[tuple[str, str]]]]:
    done: dict[str, tuple[list[str], list[tuple[str, str]]]] = {}
    if not path.exists():
        return done
    for line in path.read_text(encoding="utf-8").split("\n"):
        if not line:
            continue
        fields = parse_record(line)
        if fields[0] == "cand":
            done[fields[1]] = ([], [])
        elif fields[0] == "mean" and fields[1] in done:
            done[fields[1]][0].append(fields[2])
        elif fields[0] == "var" and fields[1] in done:
            lang, _, term = fields[2].partition(":")
            done[fields[1]][1].append((lang, term))
    return done


def _append_checkpoint(path: Path, candidate: SeedCandidate) -> None:
    lines = [format_record(("cand", candidate.key))]
    for iri in candidate.meanings:
        lines.append(format_record(("mean", candidate.key, iri)))
    for lang, term in candidate.variants:
        lines.append(format_record(("var", candidate.key, f"{lang}:{term}")))
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "a", encoding="utf-8") as handle:
        handle.write("\n".join(lines) + "\n")


def seed_from_corpus(
    corpus: Corpus,
    lookup,
    provider: LexiconProvider,
    store: TagStore,
    top_n: int = 200,
    create_n: int = 100,
    require_meanings: bool = False,
    related_threshold: float = DEFAULT_THRESHOLD,
    checkpoint_path: Path | str | None = None,
) -> SeedingReport:
    """Run the five-step seeding procedure; fully deterministic given
    fixed corpus, lookup table, and lexicon."""
    if not corpus.snapshots:
        raise ValueError("corpus is empty")
    report = SeedingReport(top_n=top_n, create_n=create_n)
    candidates = _rank_candidates(corpus)[:top_n]
    matches = _matches_by_key(corpus)
    checkpoint = Path(checkpoint_path) if checkpoint_path else None
    resumed = _load_checkpoint(checkpoint) if checkpoint else {}

    for candidate in candidates:
        if candidate.key in resumed:
            candidate.meanings, candidate.variants = resumed[candidate.key]
            candidate.note = ""
        else:
            try:
                language = to_iso639_3(candidate.locale)
            except ValueError:
                language = None
            if language is None:
                candidate.note = "unknown-locale"
            else:
                try:
                    entry = lookup.lookup(candidate.key, language)
                except LexLookupError as exc:
                    raise SeedingAborted(candidate.key, checkpoint, exc) from exc
                candidate.meanings = list(entry.means)
                candidate.variants = translations_and_synonyms(entry)
                if checkpoint:
                    _append_checkpoint(checkpoint, candidate)

        links: dict[tuple[str, str], None] = {}
        for pair in matches.get(candidate.key, ()):
            links[pair] = None
        candidate.exact_link_count = len(links)
        for _, term in candidate.variants:
            variant_key = canonicalize(term)
            if variant_key and variant_key != candidate.key:
                for pair in matches.get(variant_key, ()):
                    links[pair] = None
        candidate.links = sorted(links)
        report.candidates.append(candidate)

    created: list[SeedCandidate] = []
    for candidate in report.candidates:
        if len(created) >= create_n:
            candidate.note = candidate.note or "over-create-budget"
            continue
        if require_meanings and not candidate.meanings:
            candidate.note = "no-meanings"
            continue
        slug = derive_slug(candidate.label)
        if store.has(slug):
            candidate.note = "already-exists"
            candidate.slug = slug
            for portal_id, name in candidate.links:
                store.link_local_tag(slug, portal_id, name)
            continue
        try:
            tag = store.create(candidate.label, candidate.meanings)
        except ConflictError:
            candidate.note = "slug-conflict"
            continue
        candidate.created = True
        candidate.slug = tag.slug
        for portal_id, name in candidate.links:
            store.link_local_tag(tag.slug, portal_id, name)
        created.append(candidate)

    created_slugs = sorted(c.slug for c in created if c.slug)
    for slug in created_slugs:
        pool = set(created_slugs) - {slug}
        for other, score in provider.related_candidates(
            slug, pool, related_threshold, language=None
        ):
            if slug < other:
                store.relate(slug, RelationKind.RELATED, other)
                report.related.append((slug, other, score))

    if checkpoint and checkpoint.exists():
        checkpoint.unlink()
    return report
