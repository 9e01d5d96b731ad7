"""Local and global tag-quality metrics over a corpus of portal
snapshots, plus CSV/table report emission.

Local metrics describe one portal (share of tags used only once, mean
tags per dataset, share of near-duplicate tags). Global metrics look
across portals (canonical keys shared between portals) and at how many
tags can be grounded in a term-lookup service.
"""

from __future__ import annotations

import csv
import io
from collections import defaultdict
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Protocol

from .corpus import Corpus, PortalSnapshot
from .normalize import fuzzy_eligible, levenshtein_within

#: Headline numbers from a 2015 survey of 90 public CKAN portals, kept
#: only as report footnotes for context; they are not reproducible from
#: local fixtures.
REFERENCE_SURVEY = {
    "portals": 90,
    "datasets": 389_913,
    "total_tags": 220_567,
    "unique_tags": 148_657,
    "avg_tags_per_portal": 2451,
    "avg_tags_per_dataset": 3.88,
    "coincident_tags": 73_316,
    "coincident_fraction_of_total": 0.33,
    "expressiveness_associated": 0.2346,
    "expressiveness_not_associated": 0.6838,
    "expressiveness_not_considered": 0.0816,
    "expressiveness_associated_weighted": 0.2371,
    "expressiveness_not_associated_weighted": 0.6420,
    "expressiveness_not_considered_weighted": 0.1209,
    "tier1_removable": 14_168,
    "tier1_removable_fraction": 0.064,
    "tier2_pairs": 35_066,
    "tier2_pair_fraction": 0.158,
}

REPORT_COLUMNS = [
    "portal_id",
    "dataset_count",
    "tag_count",
    "used_once_fraction",
    "avg_tags_per_dataset",
    "similar_pair_count",
    "similar_tag_fraction",
]

HISTOGRAM_BINS = 20


class LexicalLookup(Protocol):
    """Anything that can resolve a term in a language to meanings."""

    def lookup(self, term: str, language: str): ...


class ExpressivenessAborted(RuntimeError):
    """Lookup outage mid-metric; carries partial progress."""

    def __init__(self, term: str, done: int, total: int, cause: Exception):
        super().__init__(
            f"lookup failed for {term!r} after {done}/{total} terms: {cause}"
        )
        self.term = term
        self.done = done
        self.total = total


@dataclass
class PortalMetrics:
    portal_id: str
    tag_count: int
    dataset_count: int
    used_once_fraction: float
    avg_tags_per_dataset: float
    similar_pair_count: int
    similar_tag_fraction: float


@dataclass
class ExpressivenessReport:
    associated_fraction: float
    not_associated_fraction: float
    not_considered_fraction: float
    associated_weighted: float
    not_associated_weighted: float
    not_considered_weighted: float
    term_count: int
    #: Portals whose locale was defaulted, so the language sent to the
    #: lookup service is an estimate.
    estimated_locale_portals: list[str] = field(default_factory=list)


@dataclass
class CorpusMetrics:
    portal_count: int
    total_tags: int
    unique_canonical_tags: int
    coincident_tag_count: int
    coincident_fraction_of_total: float
    coincident_fraction_of_unique: float
    expressiveness: ExpressivenessReport | None = None


def tag_reuse(snapshot: PortalSnapshot) -> float:
    """Fraction of tags used by exactly one dataset (0 when no tags)."""
    if not snapshot.tags:
        return 0.0
    once = sum(1 for t in snapshot.tags if t.usage_count == 1)
    return once / len(snapshot.tags)


def tags_per_dataset(snapshot: PortalSnapshot) -> float:
    if not snapshot.datasets:
        return 0.0
    return sum(len(d.tag_names) for d in snapshot.datasets) / len(snapshot.datasets)


def canonical_clusters(snapshot: PortalSnapshot) -> dict[str, list[str]]:
    """Group raw tag names by canonical key, skipping empty keys.

    Tags whose canonical key is empty (no letters or digits survive
    canonicalization) are not comparable and never form clusters.
    """
    clusters: dict[str, list[str]] = defaultdict(list)
    for tag in snapshot.tags:
        if tag.canonical:
            clusters[tag.canonical].append(tag.name)
    return {k: sorted(v) for k, v in clusters.items()}


def similar_pairs(
    snapshot: PortalSnapshot, mode: str = "canonical", k: int = 2
) -> list[tuple[str, str]]:
    """Unordered pairs of raw tag names considered similar.

    ``canonical`` mode pairs tags whose canonical keys are equal but
    whose raw names differ. ``lev`` mode pairs fuzzy-eligible tags with
    distinct canonical keys at edit distance 1..k (k must be 1 or 2).
    Candidate pruning groups keys into length bands, which is safe
    because the distance is bounded below by the length difference.
    """
    clusters = canonical_clusters(snapshot)
    pairs: list[tuple[str, str]] = []
    if mode == "canonical":
        for names in clusters.values():
            for i in range(len(names)):
                for j in range(i + 1, len(names)):
                    pairs.append((names[i], names[j]))
    elif mode == "lev":
        if k not in (1, 2):
            raise ValueError(f"lev mode needs k in {{1, 2}}, got {k}")
        eligible = sorted(key for key in clusters if fuzzy_eligible(key))
        by_length: dict[int, list[str]] = defaultdict(list)
        for key in eligible:
            by_length[len(key)].append(key)
        for key in eligible:
            for length in range(len(key), len(key) + k + 1):
                for other in by_length.get(length, ()):
                    if length == len(key) and other <= key:
                        continue
                    dist = levenshtein_within(key, other, k)
                    if dist is not None and dist >= 1:
                        for a in clusters[key]:
                            for b in clusters[other]:
                                pairs.append((min(a, b), max(a, b)))
    else:
        raise ValueError(f"unknown similarity mode {mode!r}")
    return sorted(set((min(a, b), max(a, b)) for a, b in pairs))


def similar_fraction(snapshot: PortalSnapshot) -> float:
    """Share of tags sitting in a canonical-duplicate cluster."""
    if not snapshot.tags:
        return 0.0
    covered = sum(
        len(names) for names in canonical_clusters(snapshot).values() if len(names) >= 2
    )
    return covered / len(snapshot.tags)


def portal_metrics(snapshot: PortalSnapshot) -> PortalMetrics:
    pairs = similar_pairs(snapshot, mode="canonical")
    return PortalMetrics(
        portal_id=snapshot.portal_id,
        tag_count=len(snapshot.tags),
        dataset_count=len(snapshot.datasets),
        used_once_fraction=tag_reuse(snapshot),
        avg_tags_per_dataset=tags_per_dataset(snapshot),
        similar_pair_count=len(pairs),
        similar_tag_fraction=similar_fraction(snapshot),
    )


def coincident_tags(corpus: Corpus) -> dict[str, int]:
    """Canonical keys present in two or more portals, with portal counts."""
    portals_by_key: dict[str, set[str]] = defaultdict(set)
    for snapshot in corpus.snapshots:
        for tag in snapshot.tags:
            if tag.canonical:
                portals_by_key[tag.canonical].add(snapshot.portal_id)
    return {
        key: len(portals)
        for key, portals in sorted(portals_by_key.items())
        if len(portals) >= 2
    }


def _not_considered(key: str) -> bool:
    return len(key) <= 3 or any(c.isdigit() for c in key)


def expressiveness(corpus: Corpus, lookup: LexicalLookup) -> ExpressivenessReport:
    """Classify every unique canonical tag by lookup grounding.

    A key is NotConsidered when it contains a digit or is at most three
    characters long (lookups on those are mostly noise). Otherwise it is
    Associated when the lookup in any locale of a portal using it yields
    at least one meaning IRI, else NotAssociated. Weighted fractions use
    the tag's summed usage count across the corpus.

    Raises ExpressivenessAborted on a lookup failure rather than
    reporting fractions computed from a partial scan.
    """
    locales: dict[str, set[str]] = defaultdict(set)
    weights: dict[str, int] = defaultdict(int)
    for snapshot in corpus.snapshots:
        for tag in snapshot.tags:
            key = tag.canonical
            locales[key].add(snapshot.locale)
            weights[key] += tag.usage_count

    keys = sorted(locales)
    counts = {"associated": 0, "not_associated": 0, "not_considered": 0}
    weighted = {"associated": 0, "not_associated": 0, "not_considered": 0}
    for done, key in enumerate(keys):
        if _not_considered(key):
            bucket = "not_considered"
        else:
            bucket = "not_associated"
            for locale in sorted(locales[key]):
                try:
                    entry = lookup.lookup(key, locale)
                except Exception as exc:
                    raise ExpressivenessAborted(key, done, len(keys), exc) from exc
                if entry.means:
                    bucket = "associated"
                    break
        counts[bucket] += 1
        weighted[bucket] += weights[key]

    total = len(keys)
    total_weight = sum(weighted.values())
    estimated = [s.portal_id for s in corpus.snapshots if s.locale_estimated]
    return ExpressivenessReport(
        associated_fraction=counts["associated"] / total if total else 0.0,
        not_associated_fraction=counts["not_associated"] / total if total else 0.0,
        not_considered_fraction=counts["not_considered"] / total if total else 0.0,
        associated_weighted=weighted["associated"] / total_weight if total_weight else 0.0,
        not_associated_weighted=weighted["not_associated"] / total_weight if total_weight else 0.0,
        not_considered_weighted=weighted["not_considered"] / total_weight if total_weight else 0.0,
        term_count=total,
        estimated_locale_portals=estimated,
    )


def corpus_metrics(corpus: Corpus, lookup: LexicalLookup | None = None) -> CorpusMetrics:
    total_tags = sum(len(s.tags) for s in corpus.snapshots)
    unique_keys: set[str] = set()
    for snapshot in corpus.snapshots:
        for tag in snapshot.tags:
            if tag.canonical:
                unique_keys.add(tag.canonical)
    coincident = coincident_tags(corpus)
    coincident_entries = sum(
        1
        for snapshot in corpus.snapshots
        for tag in snapshot.tags
        if tag.canonical in coincident
    )
    return CorpusMetrics(
        portal_count=len(corpus.snapshots),
        total_tags=total_tags,
        unique_canonical_tags=len(unique_keys),
        coincident_tag_count=len(coincident),
        coincident_fraction_of_total=coincident_entries / total_tags if total_tags else 0.0,
        coincident_fraction_of_unique=(
            len(coincident) / len(unique_keys) if unique_keys else 0.0
        ),
        expressiveness=expressiveness(corpus, lookup) if lookup is not None else None,
    )


def _portal_rows(per_portal: Iterable[PortalMetrics]) -> list[list[str]]:
    rows = []
    for m in sorted(per_portal, key=lambda m: m.portal_id):
        rows.append(
            [
                m.portal_id,
                str(m.dataset_count),
                str(m.tag_count),
                f"{m.used_once_fraction:.6f}",
                f"{m.avg_tags_per_dataset:.6f}",
                str(m.similar_pair_count),
                f"{m.similar_tag_fraction:.6f}",
            ]
        )
    return rows


def _summary_row(corpus: Corpus, per_portal: list[PortalMetrics]) -> list[str]:
    datasets = sum(m.dataset_count for m in per_portal)
    tags = sum(m.tag_count for m in per_portal)
    used_once = sum(
        1 for s in corpus.snapshots for t in s.tags if t.usage_count == 1
    )
    tagged = sum(
        len(d.tag_names) for s in corpus.snapshots for d in s.datasets
    )
    similar_pairs_total = sum(m.similar_pair_count for m in per_portal)
    similar_tags = sum(
        m.similar_tag_fraction * m.tag_count for m in per_portal
    )
    return [
        "TOTAL",
        str(datasets),
        str(tags),
        f"{used_once / tags if tags else 0.0:.6f}",
        f"{tagged / datasets if datasets else 0.0:.6f}",
        str(similar_pairs_total),
        f"{similar_tags / tags if tags else 0.0:.6f}",
    ]


def render_report(corpus: Corpus, fmt: str = "csv") -> str:
    """Render per-portal metric rows plus a corpus summary row.

    ``csv`` keeps exactly the documented columns. ``table`` renders an
    aligned text table and appends the survey reference footnote.
    """
    per_portal = [portal_metrics(s) for s in corpus.snapshots]
    rows = _portal_rows(per_portal)
    if corpus.snapshots:
        rows.append(_summary_row(corpus, per_portal))
    if fmt == "csv":
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(REPORT_COLUMNS)
        writer.writerows(rows)
        return buf.getvalue()
    if fmt == "table":
        widths = [
            max(len(REPORT_COLUMNS[i]), *(len(r[i]) for r in rows)) if rows else len(REPORT_COLUMNS[i])
            for i in range(len(REPORT_COLUMNS))
        ]
        lines = ["  ".join(c.ljust(widths[i]) for i, c in enumerate(REPORT_COLUMNS))]
        lines.append("  ".join("-" * w for w in widths))
        for row in rows:
            lines.append("  ".join(c.ljust(widths[i]) for i, c in enumerate(row)))
        lines.append("")
        lines.append(
            "reference (2015 survey of 90 CKAN portals): "
            f"avg tags/dataset {REFERENCE_SURVEY['avg_tags_per_dataset']}, "
            f"coincident tags {REFERENCE_SURVEY['coincident_tags']} "
            f"({REFERENCE_SURVEY['coincident_fraction_of_total']:.0%} of total)"
        )
        return "\n".join(lines) + "\n"
    raise ValueError(f"unknown report format {fmt!r}")


def emit_report(corpus: Corpus, path: Path | str, fmt: str = "csv") -> None:
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    Path(path).write_text(render_report(corpus, fmt), encoding="utf-8")


def histogram(values: list[float], upper: float | None = None) -> list[tuple[float, float, int]]:
    """Fixed 20-bin histogram; bins span [0, 1] or [0, max(values)]."""
    if upper is None:
        upper = 1.0
    if upper <= 0:
        upper = 1.0
    width = upper / HISTOGRAM_BINS
    counts = [0] * HISTOGRAM_BINS
    for v in values:
        idx = min(int(v / width), HISTOGRAM_BINS - 1)
        counts[idx] += 1
    return [(i * width, (i + 1) * width, counts[i]) for i in range(HISTOGRAM_BINS)]


def render_histograms(corpus: Corpus) -> str:
    """Distribution data behind the per-portal metrics, as CSV."""
    per_portal = [portal_metrics(s) for s in corpus.snapshots]
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["metric", "bin_lo", "bin_hi", "portal_count"])
    series = [
        ("used_once_fraction", [m.used_once_fraction for m in per_portal], 1.0),
        ("similar_tag_fraction", [m.similar_tag_fraction for m in per_portal], 1.0),
        (
            "avg_tags_per_dataset",
            [m.avg_tags_per_dataset for m in per_portal],
            max((m.avg_tags_per_dataset for m in per_portal), default=1.0),
        ),
    ]
    for name, values, upper in series:
        for lo, hi, count in histogram(values, upper):
            writer.writerow([name, f"{lo:.6f}", f"{hi:.6f}", str(count)])
    return buf.getvalue()
