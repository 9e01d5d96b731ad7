"""Shared fixture builders and independent oracles.

Everything here is deterministic: generators take explicit seeds and
the hand-built corpora are fully enumerated so tests can assert exact
values.

The three-portal metrics corpus (expected values are hand-computed in
the tests that use it):

  alpha (en, http://alpha.example.org), registry tag "unused":
    a1 "City budget 2015":  Budget, budget, finance, 2015
    a2 "Budget execution":  budget, finance
    a3 "Health indicators": health, Health Care
    a4 "Road map":          transport, gdp
  bravo (de, http://bravo.example.org):
    b1 "Haushalt 2015": Haushalt, budget
    b2 "Haushaltsplan": Haushalt
    b3 "Gesundheit":    gesundheit, Gesundheit
  charlie (pt, http://charlie.example.org):
    c1 "Orçamento municipal": orçamento, budget
    c2 "Saúde pública":       saúde, Saude
"""

from __future__ import annotations

import random
from datetime import datetime, timezone

from odtags.corpus import Corpus, Dataset, LocalTag, PortalSnapshot, new_snapshot
from odtags.lexlookup import StaticLookup
from odtags.normalize import canonicalize, fuzzy_eligible
from odtags.transport import ReplayTransport

FIXED_TIME = datetime(2026, 1, 1, 12, 0, 0, tzinfo=timezone.utc)


def fixed_clock() -> datetime:
    return FIXED_TIME


# ---------------------------------------------------------------------------
# independent edit-distance oracle (full-matrix DP, no sharing with src)


def dp_levenshtein(a: str, b: str) -> int:
    rows = len(a) + 1
    cols = len(b) + 1
    table = [[0] * cols for _ in range(rows)]
    for i in range(rows):
        table[i][0] = i
    for j in range(cols):
        table[0][j] = j
    for i in range(1, rows):
        for j in range(1, cols):
            cost = 0 if a[i - 1] == b[j - 1] else 1
            table[i][j] = min(
                table[i - 1][j] + 1,
                table[i][j - 1] + 1,
                table[i - 1][j - 1] + cost,
            )
    return table[rows - 1][cols - 1]


# ---------------------------------------------------------------------------
# random string generation for canonicalization / distance properties

_CHAR_POOLS = [
    "abcdefghijklmnopqrstuvwxyz",
    "ABCDEFGHIJKLMNOPQRSTUVWXYZ",
    "0123456789",
    " -_./,;:!?'\"()[]&%$#@+*",
    "áàâãäéèêëíìîïóòôõöúùûüçñýÁÀÂÃÄÉÈÊËÍÌÎÏÓÒÔÕÖÚÙÛÜÇÑ",
    "ßẞæÆøØåÅœŒðÐþÞ",
    "αβγδεζηθΑΒΓΔΕΖΗΘωΩ",
    "абвгдежзиклмнАБВГДЕЖЗИКЛМН",
    "日本語データ中文标签",
    "̧̀́̈̌",  # combining marks
]


def random_string(rng: random.Random, max_len: int = 30) -> str:
    length = rng.randint(0, max_len)
    chars = []
    for _ in range(length):
        pool = rng.choice(_CHAR_POOLS)
        chars.append(rng.choice(pool))
    return "".join(chars)


def random_ascii_word(rng: random.Random, lo: int = 1, hi: int = 30) -> str:
    length = rng.randint(lo, hi)
    return "".join(rng.choice("abcdefghijklmnopqrstuvwxyz-0123456789") for _ in range(length))


# ---------------------------------------------------------------------------
# tier fixture: 500 tags, 40 canonical clusters, 25 close pairs


CLUSTER_PHRASES = [
    "public health", "urban planning", "water quality", "air pollution",
    "renewable energy", "waste management", "road safety", "social housing",
    "public transport", "crime statistics", "school enrollment",
    "hospital capacity", "unemployment rate", "municipal budget",
    "election results", "land registry", "building permits",
    "traffic accidents", "energy consumption", "population census",
    "climate monitoring", "forest inventory", "river levels",
    "noise complaints", "parking zones", "bicycle lanes", "street lighting",
    "food inspection", "business licenses", "property values",
    "tourism arrivals", "cultural events", "library catalog",
    "sports facilities", "green spaces", "recycling centers",
    "emergency services", "tax revenue", "digital services",
    "procurement contracts",
]

ELIGIBLE_PAIRS = [
    ("worker", "workers"),
    ("widow", "window"),
    ("centre", "center"),
    ("labour", "labor"),
    ("analyse", "analyze"),
    ("colour", "color"),
    ("transporte", "transportes"),
    ("escola", "escolas"),
    ("statistik", "statistiken"),
    ("monument", "monuments"),
    ("theatre", "theater"),
    ("favourite", "favorite"),
    ("agricultura", "agricultural"),
    ("biodiversity", "biodiversité"),
    ("museum", "museums"),
]

INELIGIBLE_PAIRS = [
    ("budget-2010", "budget-2011"),
    ("census-2020", "census-2021"),
    ("report-2015", "report-2016"),
    ("survey-2018", "survey-2019"),
    ("plan-2030", "plan-2031"),
    ("gdp", "gnp"),
    ("tax", "vat"),
    ("air", "aid"),
    ("map", "gap"),
    ("co2", "co2e"),
]

FILLER_COUNT = 350


def _cluster_variants(phrase: str, size: int) -> list[str]:
    forms = [
        phrase,
        phrase.title(),
        phrase.replace(" ", "_"),
        phrase.upper(),
    ]
    return forms[:size]


def tier_fixture_tags() -> tuple[list[str], list[list[str]], list[tuple[str, str]]]:
    """Raw tag names for the tier fixture.

    Returns (all 500 names, the 40 injected clusters, the 15 eligible
    close pairs). Construction is self-checking: it verifies with the
    DP oracle that exactly the injected pairs sit at distance <= 2
    among eligible keys and that clusters are the only key collisions.
    """
    clusters = []
    for i, phrase in enumerate(CLUSTER_PHRASES):
        size = 2 if i % 2 == 0 else 3
        clusters.append(_cluster_variants(phrase, size))
    names: list[str] = [name for cluster in clusters for name in cluster]
    for a, b in ELIGIBLE_PAIRS + INELIGIBLE_PAIRS:
        names.extend((a, b))
    names.extend(f"indicator-{i:03d}-series" for i in range(FILLER_COUNT))

    assert len(names) == 500, f"fixture has {len(names)} tags, wanted 500"
    assert len(set(names)) == 500, "fixture tag names must be unique"

    by_key: dict[str, list[str]] = {}
    for name in names:
        by_key.setdefault(canonicalize(name), []).append(name)
    collided = {key: group for key, group in by_key.items() if len(group) >= 2}
    expected_clusters = {canonicalize(c[0]): sorted(c) for c in clusters}
    assert {k: sorted(v) for k, v in collided.items()} == expected_clusters, (
        "unexpected canonical collisions in fixture"
    )

    eligible_keys = sorted(k for k in by_key if fuzzy_eligible(k))
    expected_close = {
        frozenset((canonicalize(a), canonicalize(b))) for a, b in ELIGIBLE_PAIRS
    }
    close = set()
    for i, key_a in enumerate(eligible_keys):
        for key_b in eligible_keys[i + 1:]:
            if abs(len(key_a) - len(key_b)) <= 2 and dp_levenshtein(key_a, key_b) <= 2:
                close.add(frozenset((key_a, key_b)))
    assert close == expected_close, (
        f"accidental close pairs: {close ^ expected_close}"
    )
    return names, clusters, ELIGIBLE_PAIRS


def tier_fixture_snapshot(seed: int = 7) -> PortalSnapshot:
    names, _, _ = tier_fixture_tags()
    rng = random.Random(seed)
    datasets = []
    for i in range(150):
        count = rng.randint(1, 6)
        tag_names = sorted(rng.sample(names, count))
        datasets.append(Dataset(f"ds-{i:03d}", f"Fixture dataset {i}", tag_names))
    unused = [LocalTag(name=n) for n in names]
    return new_snapshot(
        portal_id="tiered",
        base_url="http://tiered.example.org",
        locale="en",
        datasets=datasets,
        extra_tags=unused,
        fetched_at=FIXED_TIME,
    )


# ---------------------------------------------------------------------------
# oracle-equivalence snapshot: dense collision structure, up to 2000 tags


def oracle_snapshot(tag_count: int, seed: int = 99) -> PortalSnapshot:
    rng = random.Random(seed)
    names: list[str] = []
    seen: set[str] = set()
    accents = {"a": "á", "e": "é", "i": "í", "o": "ô", "u": "ü", "c": "ç"}
    while len(names) < tag_count:
        roll = rng.random()
        if names and roll < 0.15:
            # case/accent variant of an existing tag (canonical duplicate)
            base = rng.choice(names)
            variant = []
            for ch in base:
                if ch.isalpha() and rng.random() < 0.4:
                    ch = ch.upper() if rng.random() < 0.6 else accents.get(ch, ch)
                variant.append(ch)
            candidate = "".join(variant)
        elif names and roll < 0.35:
            # small edit of an existing tag (close pair candidate)
            base = list(rng.choice(names))
            for _ in range(rng.randint(1, 2)):
                op = rng.randint(0, 2)
                pos = rng.randrange(len(base) + (op == 1)) if base else 0
                letter = rng.choice("abcdefghijklmnopqrstuvwxyz")
                if op == 0 and base:
                    base[pos % len(base)] = letter
                elif op == 1:
                    base.insert(pos, letter)
                elif base:
                    del base[pos % len(base)]
            candidate = "".join(base)
        else:
            candidate = random_ascii_word(rng, 3, 18)
        if candidate and candidate not in seen:
            seen.add(candidate)
            names.append(candidate)
    datasets = []
    for i in range(tag_count // 10):
        tag_names = sorted(rng.sample(names, rng.randint(1, 5)))
        datasets.append(Dataset(f"d{i:04d}", f"generated {i}", tag_names))
    return new_snapshot(
        portal_id="generated",
        base_url="http://generated.example.org",
        locale="en",
        datasets=datasets,
        extra_tags=[LocalTag(name=n) for n in names],
        fetched_at=FIXED_TIME,
    )


# ---------------------------------------------------------------------------
# hand-built three-portal corpus (enumeration in module docstring)


def metrics_corpus() -> Corpus:
    alpha = new_snapshot(
        portal_id="alpha",
        base_url="http://alpha.example.org",
        locale="en",
        datasets=[
            Dataset("a1", "City budget 2015", ["Budget", "budget", "finance", "2015"]),
            Dataset("a2", "Budget execution", ["budget", "finance"]),
            Dataset("a3", "Health indicators", ["health", "Health Care"]),
            Dataset("a4", "Road map", ["transport", "gdp"]),
        ],
        extra_tags=[LocalTag(name="unused", origin="registry")],
        fetched_at=FIXED_TIME,
    )
    bravo = new_snapshot(
        portal_id="bravo",
        base_url="http://bravo.example.org",
        locale="de",
        datasets=[
            Dataset("b1", "Haushalt 2015", ["Haushalt", "budget"]),
            Dataset("b2", "Haushaltsplan", ["Haushalt"]),
            Dataset("b3", "Gesundheit", ["gesundheit", "Gesundheit"]),
        ],
        fetched_at=FIXED_TIME,
    )
    charlie = new_snapshot(
        portal_id="charlie",
        base_url="http://charlie.example.org",
        locale="pt",
        datasets=[
            Dataset("c1", "Orçamento municipal", ["orçamento", "budget"]),
            Dataset("c2", "Saúde pública", ["saúde", "Saude"]),
        ],
        fetched_at=FIXED_TIME,
    )
    return Corpus([alpha, bravo, charlie])


def metrics_lookup() -> StaticLookup:
    """Lookup table paired with the three-portal corpus."""
    table = StaticLookup()
    table.add("eng", "budget", "means", "http://lex.example.org/meaning/budget")
    table.add("eng", "budget", "translation", "deu:Haushalt")
    table.add("eng", "budget", "translation", "por:orçamento")
    table.add("eng", "budget", "seealso", "http://lex.example.org/term/eng/fund")
    table.add("eng", "health", "means", "http://lex.example.org/meaning/health")
    table.add("eng", "transport", "means", "http://lex.example.org/meaning/transport")
    table.add("deu", "haushalt", "means", "http://lex.example.org/meaning/budget")
    table.add("deu", "haushalt", "translation", "eng:budget")
    table.add("por", "saude", "means", "http://lex.example.org/meaning/health")
    return table


SEED_LEXICON = """\
L1\teng\tbudget
L1\tdeu\tHaushalt
L1\tpor\torçamento
L2\teng\thealth
L2\tdeu\tGesundheit
L2\tpor\tsaúde
L3\teng\tautumn
L3\teng\tfall
L4\teng\tfinance
L1\tPARENT\tL4
"""


# ---------------------------------------------------------------------------
# CKAN replay fixtures


TAG_POOL = ["budget", "health", "transport", "education", "environment"]


def ckan_fixture(
    base_url: str,
    dataset_count: int,
    page_size: int = 100,
    registry_extra: list[str] | None = None,
    transport: ReplayTransport | None = None,
) -> ReplayTransport:
    """Record the canned responses one CKAN portal would give."""
    transport = transport or ReplayTransport()
    datasets = []
    for i in range(dataset_count):
        tags = [TAG_POOL[i % len(TAG_POOL)], TAG_POOL[(i + 1) % len(TAG_POOL)]]
        datasets.append(
            {
                "name": f"ds-{i:04d}",
                "title": f"Dataset {i}",
                "tags": [{"name": t} for t in tags],
                "ignored_field": {"nested": True},
            }
        )
    pages = max(1, -(-dataset_count // page_size))
    for page in range(pages):
        start = page * page_size
        transport.add_json(
            f"{base_url}/api/3/action/package_search?rows={page_size}&start={start}",
            {
                "success": True,
                "result": {
                    "count": dataset_count,
                    "results": datasets[start : start + page_size],
                },
            },
        )
    used = sorted({t["name"] for ds in datasets for t in ds["tags"]})
    transport.add_json(
        f"{base_url}/api/3/action/tag_list",
        {"success": True, "result": used + sorted(registry_extra or [])},
    )
    return transport
