"""Client for a Lexvo-style term lookup service.

A lookup resolves (term, language) to meaning IRIs, see-also IRIs, and
translations. Responses are cached per language in tab-separated files
so repeated runs stay offline, and a table-backed implementation exists
for tests and fixtures.
"""

from __future__ import annotations

import threading
import xml.etree.ElementTree as ET
from dataclasses import dataclass, field
from pathlib import Path
from urllib.parse import quote, unquote

from .normalize import canonicalize
from .records import format_record, parse_record
from .transport import HttpTransport, Transport, TransportError

DEFAULT_BASE_URL = "http://www.lexvo.org/data/term"

#: Two-letter portal locales mapped to the three-letter codes the
#: lookup service speaks. Covers the languages seen in CKAN portals.
ISO_639_1_TO_3 = {
    "ar": "ara", "bg": "bul", "ca": "cat", "cs": "ces", "da": "dan",
    "de": "deu", "el": "ell", "en": "eng", "es": "spa", "et": "est",
    "eu": "eus", "fi": "fin", "fr": "fra", "ga": "gle", "gl": "glg",
    "he": "heb", "hr": "hrv", "hu": "hun", "id": "ind", "is": "isl",
    "it": "ita", "ja": "jpn", "ko": "kor", "lt": "lit", "lv": "lav",
    "mt": "mlt", "nl": "nld", "no": "nor", "pl": "pol", "pt": "por",
    "ro": "ron", "ru": "rus", "sk": "slk", "sl": "slv", "sr": "srp",
    "sv": "swe", "th": "tha", "tr": "tur", "uk": "ukr", "vi": "vie",
    "zh": "zho",
}

_PREDICATE_KINDS = {
    "means": "means",
    "seealso": "seealso",
    "translation": "translation",
    "translate": "translation",
}


class LexLookupError(Exception):
    """Lookup request failed (network or service error)."""


class LexProtocolError(LexLookupError):
    """Response arrived but could not be interpreted."""

    def __init__(self, message: str, payload: str):
        excerpt = payload[:200].replace("\n", " ")
        super().__init__(f"{message}; payload starts: {excerpt!r}")


@dataclass
class LexicalEntry:
    term: str
    language: str
    means: list[str] = field(default_factory=list)
    see_also: list[str] = field(default_factory=list)
    translations: list[tuple[str, str]] = field(default_factory=list)

    def is_empty(self) -> bool:
        return not (self.means or self.see_also or self.translations)


def to_iso639_3(code: str) -> str:
    """Map a portal locale to a three-letter language code.

    Accepts three-letter codes as-is and two-letter codes (optionally
    with a region subtag, "pt-br") via the built-in table.
    """
    if not code:
        raise ValueError("empty language code")
    primary = code.lower().split("-")[0].split("_")[0]
    if len(primary) == 3 and primary.isalpha():
        return primary
    mapped = ISO_639_1_TO_3.get(primary)
    if mapped is None:
        raise ValueError(f"unknown language code {code!r}")
    return mapped


def _is_absolute_iri(value: str) -> bool:
    return "://" in value


def _decode_term_iri(iri: str) -> tuple[str, str] | None:
    """Decode ``.../term/{lang}/{encoded}`` IRIs to (language, term)."""
    marker = "/term/"
    pos = iri.find(marker)
    if pos < 0:
        return None
    rest = iri[pos + len(marker):]
    parts = rest.split("/", 1)
    if len(parts) != 2 or not parts[0] or not parts[1]:
        return None
    lang, encoded = parts
    if not (lang.isalpha() and len(lang) == 3):
        return None
    return lang.lower(), unquote(encoded)


def _sorted_entry(entry: LexicalEntry) -> LexicalEntry:
    entry.means = sorted(set(entry.means))
    entry.see_also = sorted(set(entry.see_also))
    translations = {
        (lang, term)
        for lang, term in entry.translations
        if lang != entry.language
    }
    entry.translations = sorted(
        translations, key=lambda t: (t[0], canonicalize(t[1]), t[1])
    )
    return entry


def _parse_ntriples(entry: LexicalEntry, text: str) -> None:
    for raw_line in text.splitlines():
        line = raw_line.strip()
        if not line or line.startswith("#"):
            continue
        if not line.endswith("."):
            continue
        parts = line[:-1].strip().split(None, 2)
        if len(parts) != 3:
            continue
        _, pred, obj = parts
        kind = _predicate_kind(pred.strip("<>"))
        if kind is None:
            continue
        if obj.startswith("<") and obj.endswith(">"):
            _add_object(entry, kind, obj[1:-1], None)
        elif obj.startswith('"'):
            literal, _, suffix = obj[1:].rpartition('"')
            lang = None
            if suffix.startswith("@"):
                lang = suffix[1:].split("^")[0]
            _add_object(entry, kind, literal, lang)


def _parse_rdf_xml(entry: LexicalEntry, text: str) -> None:
    try:
        root = ET.fromstring(text)
    except ET.ParseError as exc:
        raise LexProtocolError(f"bad RDF/XML: {exc}", text) from exc
    rdf_ns = "{http://www.w3.org/1999/02/22-rdf-syntax-ns#}"
    xml_ns = "{http://www.w3.org/XML/1998/namespace}"
    for element in root.iter():
        local = element.tag.rsplit("}", 1)[-1]
        kind = _PREDICATE_KINDS.get(local.lower())
        if kind is None:
            continue
        resource = element.get(f"{rdf_ns}resource")
        if resource:
            _add_object(entry, kind, resource, None)
        elif element.text and element.text.strip():
            _add_object(entry, kind, element.text.strip(), element.get(f"{xml_ns}lang"))


def _predicate_kind(iri: str) -> str | None:
    local = iri.rsplit("/", 1)[-1].rsplit("#", 1)[-1]
    return _PREDICATE_KINDS.get(local.lower())


def _add_object(entry: LexicalEntry, kind: str, value: str, lang: str | None) -> None:
    if kind == "means":
        if _is_absolute_iri(value):
            entry.means.append(value)
    elif kind == "seealso":
        if _is_absolute_iri(value):
            entry.see_also.append(value)
    elif kind == "translation":
        if _is_absolute_iri(value):
            decoded = _decode_term_iri(value)
            if decoded:
                entry.translations.append(decoded)
        elif lang:
            try:
                entry.translations.append((to_iso639_3(lang), value))
            except ValueError:
                pass


def parse_lookup_response(term: str, language: str, text: str) -> LexicalEntry:
    """Extract the consumed predicates from an RDF response.

    Only triples whose predicate local-name is ``means``, ``seeAlso``,
    ``translation``, or ``translate`` are read; everything else in the
    document is ignored. Handles the N-Triples shape and a lenient
    RDF/XML scan.
    """
    entry = LexicalEntry(term=term, language=language)
    stripped = text.lstrip()
    if stripped.startswith("<?xml") or stripped.startswith("<rdf"):
        _parse_rdf_xml(entry, text)
    else:
        _parse_ntriples(entry, text)
    return _sorted_entry(entry)


class LexvoClient:
    """Term lookup over HTTP with a persistent per-language cache.

    Lookups for the same (language, term) key are answered from cache
    without touching the transport; concurrent cache misses for one key
    are coalesced into a single request.
    """

    def __init__(
        self,
        transport: Transport | None = None,
        cache_dir: Path | str | None = None,
        base_url: str = DEFAULT_BASE_URL,
    ):
        self.transport = transport or HttpTransport()
        self.base_url = base_url.rstrip("/")
        self.cache_dir = Path(cache_dir) / "lex" if cache_dir else None
        self._cache: dict[tuple[str, str], LexicalEntry] = {}
        self._loaded_languages: set[str] = set()
        self._lock = threading.Lock()
        self._inflight: dict[tuple[str, str], threading.Event] = {}
        self._failures: dict[tuple[str, str], Exception] = {}

    def lookup(self, term: str, language: str) -> LexicalEntry:
        if not term:
            raise ValueError("term must be non-empty")
        lang = to_iso639_3(language)
        key = (lang, term)
        while True:
            with self._lock:
                self._ensure_language_loaded(lang)
                if key in self._cache:
                    return self._cache[key]
                event = self._inflight.get(key)
                if event is None:
                    event = threading.Event()
                    self._inflight[key] = event
                    break
            event.wait()
            with self._lock:
                failure = self._failures.pop(key, None)
            if failure is not None:
                raise failure

        try:
            entry = self._fetch(term, lang)
            with self._lock:
                self._append_cache_record(lang, entry)
                self._cache[key] = entry
            return entry
        except Exception as exc:
            with self._lock:
                self._failures[key] = exc
            raise
        finally:
            with self._lock:
                self._inflight.pop(key, None)
            event.set()

    def _fetch(self, term: str, lang: str) -> LexicalEntry:
        url = f"{self.base_url}/{lang}/{quote(term, safe='')}"
        try:
            response = self.transport.get(url)
        except TransportError as exc:
            raise LexLookupError(f"lookup transport failed: {exc}") from exc
        if response.status == 404:
            return LexicalEntry(term=term, language=lang)
        if response.status != 200:
            raise LexLookupError(f"lookup returned HTTP {response.status} for {url}")
        return parse_lookup_response(term, lang, response.text)

    # Cache file layout: one file per language, records term/kind/value.
    # The "queried" record marks terms the service knew nothing about.

    def _cache_path(self, lang: str) -> Path | None:
        if self.cache_dir is None:
            return None
        return self.cache_dir / f"{lang}.tsv"

    def _ensure_language_loaded(self, lang: str) -> None:
        if lang in self._loaded_languages:
            return
        self._loaded_languages.add(lang)
        path = self._cache_path(lang)
        if path is None or not path.exists():
            return
        entries: dict[str, LexicalEntry] = {}
        for line in path.read_text(encoding="utf-8").split("\n"):
            if not line:
                continue
            fields = parse_record(line)
            if len(fields) != 3:
                continue
            term, kind, value = fields
            entry = entries.setdefault(term, LexicalEntry(term=term, language=lang))
            if kind == "means":
                entry.means.append(value)
            elif kind == "seealso":
                entry.see_also.append(value)
            elif kind == "translation":
                t_lang, _, t_term = value.partition(":")
                if t_lang and t_term:
                    entry.translations.append((t_lang, t_term))
        for term, entry in entries.items():
            self._cache[(lang, term)] = _sorted_entry(entry)

    def _append_cache_record(self, lang: str, entry: LexicalEntry) -> None:
        path = self._cache_path(lang)
        if path is None:
            return
        path.parent.mkdir(parents=True, exist_ok=True)
        lines = [format_record((entry.term, "queried", "1"))]
        for iri in entry.means:
            lines.append(format_record((entry.term, "means", iri)))
        for iri in entry.see_also:
            lines.append(format_record((entry.term, "seealso", iri)))
        for t_lang, t_term in entry.translations:
            lines.append(format_record((entry.term, "translation", f"{t_lang}:{t_term}")))
        with open(path, "a", encoding="utf-8") as handle:
            handle.write("\n".join(lines) + "\n")


class StaticLookup:
    """Dict-backed lookup used by tests and offline runs.

    Table rows are ``language<TAB>term<TAB>kind<TAB>value`` with kind in
    means / seealso / translation (value ``lang:term``).
    """

    def __init__(self, entries: dict[tuple[str, str], LexicalEntry] | None = None):
        self.entries = entries or {}
        self.calls: list[tuple[str, str]] = []

    @classmethod
    def from_tsv(cls, path: Path | str) -> "StaticLookup":
        table = cls()
        for line in Path(path).read_text(encoding="utf-8").split("\n"):
            if not line or line.startswith("#"):
                continue
            fields = parse_record(line)
            if len(fields) != 4:
                continue
            lang, term, kind, value = fields
            table.add(lang, term, kind, value)
        for key, entry in table.entries.items():
            table.entries[key] = _sorted_entry(entry)
        return table

    def add(self, lang: str, term: str, kind: str, value: str) -> None:
        entry = self.entries.setdefault(
            (lang, term), LexicalEntry(term=term, language=lang)
        )
        if kind == "means":
            entry.means.append(value)
        elif kind == "seealso":
            entry.see_also.append(value)
        elif kind == "translation":
            t_lang, _, t_term = value.partition(":")
            entry.translations.append((t_lang, t_term))
        _sorted_entry(entry)

    def lookup(self, term: str, language: str) -> LexicalEntry:
        if not term:
            raise ValueError("term must be non-empty")
        lang = to_iso639_3(language)
        self.calls.append((lang, term))
        entry = self.entries.get((lang, term))
        if entry is None:
            return LexicalEntry(term=term, language=lang)
        return entry


def translations_and_synonyms(entry: LexicalEntry) -> list[tuple[str, str]]:
    """Translations plus same-language synonyms decoded from see-also
    links, deduplicated and in canonical-key order.

    A see-also IRI of term shape (``.../term/{lang}/{term}``) in the
    entry's own language is a synonym; other see-also targets are
    opaque and skipped.
    """
    variants: set[tuple[str, str]] = set(entry.translations)
    for iri in entry.see_also:
        decoded = _decode_term_iri(iri)
        if decoded and decoded[0] == entry.language:
            variants.add(decoded)
    variants.discard((entry.language, entry.term))
    return sorted(variants, key=lambda t: (t[0], canonicalize(t[1]), t[1]))
