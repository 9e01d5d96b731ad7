"""Lexicon-backed semantic similarity provider.

Backs the speculative (tier 3) merge suggestions and related-tag
discovery. The lexicon is a plain file of synsets: terms grouped by
shared meaning, with optional parent links forming a hierarchy. Two
terms in one synset score 1.0; otherwise the score decays with the
shortest hierarchy path between their synsets.
"""

from __future__ import annotations

from collections import defaultdict, deque
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

from .normalize import canonicalize
from .records import parse_record

DEFAULT_THRESHOLD = 0.9

PARENT_MARKER = "PARENT"


class LexiconError(ValueError):
    """Lexicon file is malformed or its hierarchy has a cycle."""


@dataclass
class Lexicon:
    """Synsets plus hierarchy, indexed for canonical-key queries."""

    synsets: dict[str, set[tuple[str, str]]] = field(default_factory=dict)
    parents: dict[str, set[str]] = field(default_factory=dict)
    _by_term: dict[tuple[str, str], set[str]] = field(default_factory=dict, repr=False)
    _by_key: dict[str, set[str]] = field(default_factory=dict, repr=False)
    _neighbors: dict[str, set[str]] = field(default_factory=dict, repr=False)

    def add_term(self, synset_id: str, language: str, term: str) -> None:
        key = canonicalize(term)
        if not key:
            raise LexiconError(f"term {term!r} canonicalizes to nothing")
        self.synsets.setdefault(synset_id, set()).add((language, key))
        self._by_term.setdefault((language, key), set()).add(synset_id)
        self._by_key.setdefault(key, set()).add(synset_id)

    def add_parent(self, child: str, parent: str) -> None:
        self.parents.setdefault(child, set()).add(parent)

    def finish(self) -> "Lexicon":
        self._check_acyclic()
        neighbors: dict[str, set[str]] = defaultdict(set)
        for child, parents in self.parents.items():
            for parent in parents:
                neighbors[child].add(parent)
                neighbors[parent].add(child)
        self._neighbors = dict(neighbors)
        return self

    def _check_acyclic(self) -> None:
        state: dict[str, int] = {}

        def visit(node: str) -> None:
            state[node] = 1
            for parent in self.parents.get(node, ()):
                mark = state.get(parent)
                if mark == 1:
                    raise LexiconError(f"hierarchy cycle through {parent!r}")
                if mark is None:
                    visit(parent)
            state[node] = 2

        for node in list(self.parents):
            if state.get(node) is None:
                visit(node)

    def synsets_for(self, key: str, language: str | None = None) -> set[str]:
        if language is None:
            return self._by_key.get(key, set())
        return self._by_term.get((language, key), set())

    def knows(self, key: str, language: str | None = None) -> bool:
        return bool(self.synsets_for(key, language))

    def hierarchy_distance(self, sources: set[str], targets: set[str]) -> int | None:
        """Shortest undirected path length between two synset groups."""
        if sources & targets:
            return 0
        seen = set(sources)
        frontier = deque((s, 0) for s in sources)
        while frontier:
            node, dist = frontier.popleft()
            for neighbor in self._neighbors.get(node, ()):
                if neighbor in targets:
                    return dist + 1
                if neighbor not in seen:
                    seen.add(neighbor)
                    frontier.append((neighbor, dist + 1))
        return None


def load_lexicon(path: Path | str) -> Lexicon:
    """Load a lexicon file.

    Rows are ``synset_id<TAB>language<TAB>term`` for members and
    ``synset_id<TAB>PARENT<TAB>synset_id`` for hierarchy links.
    """
    lexicon = Lexicon()
    for line_no, line in enumerate(Path(path).read_text(encoding="utf-8").split("\n"), 1):
        if not line or line.startswith("#"):
            continue
        fields = parse_record(line)
        if len(fields) != 3:
            raise LexiconError(f"{path}:{line_no}: expected 3 fields, got {len(fields)}")
        if fields[1] == PARENT_MARKER:
            lexicon.add_parent(fields[0], fields[2])
        else:
            lexicon.add_term(fields[0], fields[1], fields[2])
    return lexicon.finish()


def bundled_lexicon() -> Lexicon:
    """The starter lexicon shipped with the package."""
    ref = resources.files("odtags").joinpath("data/lexicon.tsv")
    with resources.as_file(ref) as path:
        return load_lexicon(path)


class LexiconProvider:
    """Similarity provider over a loaded, immutable lexicon."""

    def __init__(self, lexicon: Lexicon):
        self.lexicon = lexicon

    def knows(self, key: str, language: str | None = None) -> bool:
        return self.lexicon.knows(key, language)

    def similarity(self, a: str, b: str, language: str | None = None) -> float:
        """Score in [0, 1]; identity is 1, unknown terms score 0.

        Terms sharing a synset score 1.0; otherwise the score is
        1 / (1 + shortest hierarchy distance), and 0.0 with no path.
        """
        if a == b:
            return 1.0
        sa = self.lexicon.synsets_for(a, language)
        sb = self.lexicon.synsets_for(b, language)
        if not sa or not sb:
            return 0.0
        if sa & sb:
            return 1.0
        dist = self.lexicon.hierarchy_distance(sa, sb)
        if dist is None:
            return 0.0
        return 1.0 / (1.0 + dist)

    def related_candidates(
        self,
        key: str,
        pool: set[str],
        threshold: float = DEFAULT_THRESHOLD,
        language: str | None = None,
    ) -> list[tuple[str, float]]:
        """Pool members at or above the threshold, best first.

        Only lexicon-known members are considered, so a threshold of 0
        ranks every known pool member. Ties break lexicographically.
        """
        if not 0.0 <= threshold <= 1.0:
            raise ValueError(f"threshold must be in [0, 1], got {threshold}")
        scored = []
        for member in sorted(pool):
            if not self.lexicon.knows(member, language):
                continue
            score = self.similarity(key, member, language)
            if score >= threshold:
                scored.append((member, score))
        scored.sort(key=lambda item: (-item[1], item[0]))
        return scored
