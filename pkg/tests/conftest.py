from __future__ import annotations

import pytest

from fixtures import SEED_LEXICON, metrics_corpus, metrics_lookup

from odtags.semsim import LexiconProvider, load_lexicon


@pytest.fixture
def corpus3():
    return metrics_corpus()


@pytest.fixture
def lookup3():
    return metrics_lookup()


@pytest.fixture
def seed_lexicon(tmp_path):
    path = tmp_path / "lexicon.tsv"
    path.write_text(SEED_LEXICON, encoding="utf-8")
    return LexiconProvider(load_lexicon(path))
