"""Tag canonicalization, edit distance, and fuzzy-merge eligibility.

Every similarity decision in the toolkit goes through the canonical key
produced here: tags are compared after compatibility decomposition,
accent stripping, lowercasing, and collapsing separator runs to single
hyphens. Keys are plain ``str`` values; the canonical form is a fixed
point of :func:`canonicalize`.
"""

from __future__ import annotations

import unicodedata

_ALNUM = frozenset("abcdefghijklmnopqrstuvwxyz0123456789")
_DIGITS = frozenset("0123456789")


def canonicalize(raw: str) -> str:
    """Reduce a raw tag to its comparison key.

    The pipeline is: NFKD compatibility decomposition, removal of
    combining marks, lowercasing, then each maximal run of characters
    outside [a-z0-9] becomes one hyphen. Leading and trailing hyphens
    are stripped, so ``"Saúde Pública"`` becomes ``"saude-publica"``.

    Non-Latin letters are not transliterated; they fall into the
    separator class, so a tag written entirely in another script maps
    to the empty key. Callers must treat empty keys as non-comparable.
    """
    out: list[str] = []
    pending_sep = False
    for ch in unicodedata.normalize("NFKD", raw):
        if unicodedata.combining(ch):
            continue
        for low in ch.lower():
            if low in _ALNUM:
                if pending_sep and out:
                    out.append("-")
                pending_sep = False
                out.append(low)
            else:
                pending_sep = True
    return "".join(out)


def levenshtein(a: str, b: str) -> int:
    """Unit-cost edit distance between two strings.

    Counted over Unicode scalar values: the minimal number of single
    character insertions, deletions, and substitutions turning ``a``
    into ``b``.
    """
    if a == b:
        return 0
    # Iterate over the longer string so the rolling row stays short.
    if len(a) < len(b):
        a, b = b, a
    if not b:
        return len(a)
    prev = list(range(len(b) + 1))
    for i, ca in enumerate(a, 1):
        cur = [i]
        for j, cb in enumerate(b, 1):
            cur.append(min(prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + (ca != cb)))
        prev = cur
    return prev[-1]


def levenshtein_within(a: str, b: str, limit: int) -> int | None:
    """Edit distance if it is at most ``limit``, else None.

    Banded dynamic program: only cells within ``limit`` of the diagonal
    are computed, and the scan aborts as soon as a whole row exceeds the
    bound. Meant for the distance<=2 candidate checks, where most pairs
    fail early.
    """
    if limit < 0:
        return None
    na, nb = len(a), len(b)
    if abs(na - nb) > limit:
        return None
    if na == 0:
        return nb
    if nb == 0:
        return na
    inf = limit + 1
    prev = {j: j for j in range(min(nb, limit) + 1)}
    for i in range(1, na + 1):
        lo = max(0, i - limit)
        hi = min(nb, i + limit)
        cur: dict[int, int] = {}
        if lo == 0:
            cur[0] = i
            lo = 1
        for j in range(lo, hi + 1):
            cost = prev.get(j - 1, inf) + (a[i - 1] != b[j - 1])
            dele = prev.get(j, inf) + 1
            ins = cur.get(j - 1, inf) + 1
            cur[j] = min(cost, dele, ins)
        if min(cur.values()) > limit:
            return None
        prev = cur
    dist = prev.get(nb, inf)
    return dist if dist <= limit else None


def fuzzy_eligible(canonical: str) -> bool:
    """Whether a canonical key may take part in edit-distance merging.

    Keys containing digits are excluded (year tags such as
    ``budget-2010`` would otherwise pair with every neighbouring year),
    as are keys shorter than 4 characters, where one edit rewrites too
    much of the string.
    """
    if len(canonical) < 4:
        return False
    return not any(c in _DIGITS for c in canonical)
