"""Turtle export of global tags, plus a parser for the emitted subset.

Each global tag becomes a typed tag resource with its label, meaning
IRIs, tagged local-tag resources, and concept relations. When portal
base URLs are known, dataset resources additionally point at their
global tag. The exporter never emits blank nodes, so graph comparison
is plain triple-set equality; the bundled parser understands exactly
the shapes written here (prefix declarations, IRIs, prefixed names,
plain literals, semicolon-chained predicates).
"""

from __future__ import annotations

import re
from urllib.parse import quote, unquote

from ..corpus import Corpus
from .store import GlobalTag, RelationKind

DEFAULT_SERVER_BASE = "http://tags.example.org"

NAMESPACES = {
    "rdf": "http://www.w3.org/1999/02/22-rdf-syntax-ns#",
    "rdfs": "http://www.w3.org/2000/01/rdf-schema#",
    "skos": "http://www.w3.org/2004/02/skos/core#",
    "owl": "http://www.w3.org/2002/07/owl#",
    "muto": "http://purl.org/muto/core#",
}

RDF_TYPE = NAMESPACES["rdf"] + "type"
RDFS_LABEL = NAMESPACES["rdfs"] + "label"
MUTO_TAG = NAMESPACES["muto"] + "Tag"
MUTO_HAS_MEANING = NAMESPACES["muto"] + "hasMeaning"
MUTO_TAGGED_RESOURCE = NAMESPACES["muto"] + "taggedResource"
MUTO_HAS_TAG = NAMESPACES["muto"] + "hasTag"

_RELATION_PREDICATES = {
    RelationKind.BROADER: NAMESPACES["skos"] + "broader",
    RelationKind.NARROWER: NAMESPACES["skos"] + "narrower",
    RelationKind.RELATED: NAMESPACES["skos"] + "related",
    RelationKind.SAME_AS: NAMESPACES["owl"] + "sameAs",
}

#: The complete set of classes and predicates an export may contain.
VOCABULARY = frozenset(
    [RDF_TYPE, RDFS_LABEL, MUTO_TAG, MUTO_HAS_MEANING, MUTO_TAGGED_RESOURCE, MUTO_HAS_TAG]
    + [iri for iri in _RELATION_PREDICATES.values()]
)

#: (subject, predicate, object); objects are ("iri", value) or ("literal", value).
Triple = tuple[str, str, tuple[str, str]]


def tag_iri(server_base: str, slug: str) -> str:
    return f"{server_base.rstrip('/')}/tags/{quote(slug, safe='')}"


def local_tag_iri(portal_id: str, name: str, portal_bases: dict[str, str] | None) -> str:
    """IRI of one local tag: under the portal when its base URL is
    known, else under the corpus scheme."""
    base = (portal_bases or {}).get(portal_id)
    if base:
        return f"{base.rstrip('/')}/tag/{quote(name, safe='')}"
    return f"corpus://{quote(portal_id, safe='')}/tag/{quote(name, safe='')}"


def decode_local_tag_iri(
    iri: str, portal_bases: dict[str, str] | None
) -> tuple[str, str] | None:
    """Inverse of local_tag_iri, for rebuilding links from a graph."""
    for portal_id, base in (portal_bases or {}).items():
        prefix = f"{base.rstrip('/')}/tag/"
        if iri.startswith(prefix):
            return portal_id, unquote(iri[len(prefix):])
    match = re.fullmatch(r"corpus://([^/]+)/tag/(.+)", iri)
    if match:
        return unquote(match.group(1)), unquote(match.group(2))
    return None


def dataset_iri(base_url: str, dataset_id: str) -> str:
    return f"{base_url.rstrip('/')}/dataset/{quote(dataset_id, safe='')}"


def tag_triples(
    tag: GlobalTag,
    server_base: str = DEFAULT_SERVER_BASE,
    portal_bases: dict[str, str] | None = None,
    corpus: Corpus | None = None,
) -> list[Triple]:
    """All triples describing one global tag.

    Relations are the tag's effective view, so exporting both ends of a
    broader/narrower pair yields both directions. Dataset-side triples
    (dataset resource pointing at the global tag) are emitted only for
    links whose portal base URL is known via the corpus.
    """
    iri = tag_iri(server_base, tag.slug)
    triples: list[Triple] = [
        (iri, RDF_TYPE, ("iri", MUTO_TAG)),
        (iri, RDFS_LABEL, ("literal", tag.label)),
    ]
    for meaning in tag.meanings:
        triples.append((iri, MUTO_HAS_MEANING, ("iri", meaning)))
    for portal_id, name in tag.local_links:
        triples.append(
            (iri, MUTO_TAGGED_RESOURCE, ("iri", local_tag_iri(portal_id, name, portal_bases)))
        )
    for kind, target in tag.relations:
        triples.append(
            (iri, _RELATION_PREDICATES[kind], ("iri", tag_iri(server_base, target)))
        )
    if corpus is not None:
        for portal_id, name in tag.local_links:
            try:
                snapshot = corpus.get(portal_id)
            except KeyError:
                continue
            for ds in snapshot.datasets:
                if name in ds.tag_names:
                    triples.append(
                        (
                            dataset_iri(snapshot.base_url, ds.dataset_id),
                            MUTO_HAS_TAG,
                            ("iri", iri),
                        )
                    )
    return triples


def _shrink(iri: str) -> str:
    for prefix, namespace in NAMESPACES.items():
        if iri.startswith(namespace):
            local = iri[len(namespace):]
            if re.fullmatch(r"[A-Za-z][A-Za-z0-9_]*", local):
                return f"{prefix}:{local}"
    return f"<{iri}>"


def _literal(value: str) -> str:
    escaped = (
        value.replace("\\", "\\\\")
        .replace('"', '\\"')
        .replace("\n", "\\n")
        .replace("\r", "\\r")
        .replace("\t", "\\t")
    )
    return f'"{escaped}"'


def _render_object(obj: tuple[str, str]) -> str:
    kind, value = obj
    if kind == "iri":
        return _shrink(value)
    return _literal(value)


def export_turtle(
    tags: list[GlobalTag],
    server_base: str = DEFAULT_SERVER_BASE,
    portal_bases: dict[str, str] | None = None,
    corpus: Corpus | None = None,
) -> str:
    """Serialize tags to Turtle, one subject block per resource."""
    by_subject: dict[str, list[Triple]] = {}
    order: list[str] = []
    for tag in sorted(tags, key=lambda t: t.slug):
        for triple in tag_triples(tag, server_base, portal_bases, corpus):
            if triple[0] not in by_subject:
                by_subject[triple[0]] = []
                order.append(triple[0])
            if triple not in by_subject[triple[0]]:
                by_subject[triple[0]].append(triple)

    lines = [f"@prefix {p}: <{ns}> ." for p, ns in NAMESPACES.items()]
    lines.append("")
    for subject in order:
        triples = by_subject[subject]
        lines.append(f"<{subject}>")
        for i, (_, predicate, obj) in enumerate(triples):
            pred = "a" if predicate == RDF_TYPE else _shrink(predicate)
            terminator = " ." if i == len(triples) - 1 else " ;"
            lines.append(f"    {pred} {_render_object(obj)}{terminator}")
        lines.append("")
    return "\n".join(lines)


_TOKEN = re.compile(
    r"""
    (?P<iri><[^>]*>)
  | (?P<literal>"(?:[^"\\]|\\.)*")
  | (?P<punct>[;,.])
  | (?P<word>@?[A-Za-z][A-Za-z0-9_:-]*)
    """,
    re.VERBOSE,
)

_LITERAL_UNESCAPES = {"\\": "\\", '"': '"', "n": "\n", "r": "\r", "t": "\t"}


class TurtleParseError(ValueError):
    pass


def _unescape_literal(raw: str) -> str:
    body = raw[1:-1]
    out: list[str] = []
    i = 0
    while i < len(body):
        c = body[i]
        if c == "\\" and i + 1 < len(body):
            out.append(_LITERAL_UNESCAPES.get(body[i + 1], body[i + 1]))
            i += 2
        else:
            out.append(c)
            i += 1
    return "".join(out)


def parse_turtle(text: str) -> set[Triple]:
    """Parse the Turtle subset this module emits into a triple set."""
    tokens: list[tuple[str, str]] = []
    for match in _TOKEN.finditer(text):
        kind = match.lastgroup
        tokens.append((kind, match.group()))

    prefixes: dict[str, str] = {}
    triples: set[Triple] = set()
    pos = 0

    def resolve_iri(kind: str, value: str) -> str:
        if kind == "iri":
            return value[1:-1]
        if kind == "word":
            if value == "a":
                return RDF_TYPE
            prefix, _, local = value.partition(":")
            if prefix in prefixes:
                return prefixes[prefix] + local
        raise TurtleParseError(f"cannot resolve {value!r} as an IRI")

    while pos < len(tokens):
        kind, value = tokens[pos]
        if kind == "word" and value == "@prefix":
            prefix = tokens[pos + 1][1].rstrip(":")
            namespace = tokens[pos + 2][1][1:-1]
            if tokens[pos + 3][1] != ".":
                raise TurtleParseError("@prefix not terminated")
            prefixes[prefix] = namespace
            pos += 4
            continue
        subject = resolve_iri(kind, value)
        pos += 1
        while True:
            pkind, pvalue = tokens[pos]
            predicate = resolve_iri(pkind, pvalue)
            okind, ovalue = tokens[pos + 1]
            if okind == "literal":
                obj = ("literal", _unescape_literal(ovalue))
            else:
                obj = ("iri", resolve_iri(okind, ovalue))
            triples.add((subject, predicate, obj))
            punct = tokens[pos + 2][1]
            pos += 3
            if punct == ".":
                break
            if punct != ";":
                raise TurtleParseError(f"unexpected {punct!r} in predicate list")
    return triples
