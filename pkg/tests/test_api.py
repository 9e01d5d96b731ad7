from __future__ import annotations

import pytest
from fastapi.testclient import TestClient

from fixtures import SEED_LEXICON, fixed_clock, metrics_corpus

from odtags.corpus import load_snapshot, save_corpus, snapshot_path
from odtags.semsim import LexiconProvider, load_lexicon
from odtags.tagserver.api import create_app
from odtags.tagserver.rdf import parse_turtle
from odtags.tagserver.store import TagStore


@pytest.fixture
def client(tmp_path):
    corpus_dir = tmp_path / "corpus"
    save_corpus(metrics_corpus(), corpus_dir)
    lexicon_path = tmp_path / "lexicon.tsv"
    lexicon_path.write_text(SEED_LEXICON, encoding="utf-8")
    store = TagStore(tmp_path / "store", now=fixed_clock, fsync=False)
    app = create_app(
        corpus_dir,
        store,
        provider=LexiconProvider(load_lexicon(lexicon_path)),
        threshold=0.9,
        now=fixed_clock,
    )
    with TestClient(app) as c:
        c.corpus_dir = corpus_dir
        yield c
    store.close()


def make_tag(client, label="Food", meanings=()):
    response = client.post(
        "/api/v1/tags", json={"label": label, "meanings": list(meanings)}
    )
    assert response.status_code == 201, response.text
    return response.json()


class TestTagEndpoints:
    def test_create_and_get(self, client):
        body = make_tag(client, "Budget", ["http://dbpedia.org/resource/Budget"])
        assert body["slug"] == "budget"
        got = client.get("/api/v1/tags/budget")
        assert got.status_code == 200
        assert got.json()["label"] == "Budget"
        assert got.json()["created_at"] == "2026-01-01T12:00:00Z"

    def test_duplicate_is_409(self, client):
        make_tag(client, "Budget")
        assert client.post("/api/v1/tags", json={"label": "budget"}).status_code == 409

    def test_invalid_label_is_422(self, client):
        assert client.post("/api/v1/tags", json={"label": "!!!"}).status_code == 422

    def test_unknown_slug_is_404(self, client):
        assert client.get("/api/v1/tags/ghost").status_code == 404

    def test_search_and_paging(self, client):
        make_tag(client, "Budget")
        make_tag(client, "Budget Analysis")
        make_tag(client, "Food")
        hits = client.get("/api/v1/tags", params={"q": "budg"}).json()
        assert [t["slug"] for t in hits["tags"]] == ["budget", "budget-analysis"]
        everything = client.get("/api/v1/tags").json()
        assert everything["total"] == 3

    def test_links_idempotent(self, client):
        make_tag(client, "Food")
        payload = {"portal_id": "charlie", "tag_name": "alimentos"}
        first = client.post("/api/v1/tags/food/links", json=payload)
        second = client.post("/api/v1/tags/food/links", json=payload)
        assert first.status_code == 201
        assert second.status_code == 200
        assert second.json()["local_links"] == [
            {"portal_id": "charlie", "tag_name": "alimentos"}
        ]
        removed = client.request(
            "DELETE", "/api/v1/tags/food/links", params=payload
        )
        assert removed.status_code == 200
        assert removed.json()["local_links"] == []

    def test_relations_inverse_on_read(self, client):
        make_tag(client, "Budget")
        make_tag(client, "Finance")
        response = client.post(
            "/api/v1/tags/budget/relations",
            json={"kind": "broader", "target": "finance"},
        )
        assert response.status_code == 201
        finance = client.get("/api/v1/tags/finance").json()
        assert {"kind": "narrower", "target": "budget"} in finance["relations"]
        repeat = client.post(
            "/api/v1/tags/finance/relations",
            json={"kind": "narrower", "target": "budget"},
        )
        assert repeat.status_code == 200

    def test_self_relation_is_422(self, client):
        make_tag(client, "Budget")
        response = client.post(
            "/api/v1/tags/budget/relations",
            json={"kind": "sameAs", "target": "budget"},
        )
        assert response.status_code == 422

    def test_unknown_relation_target_is_404(self, client):
        make_tag(client, "Budget")
        response = client.post(
            "/api/v1/tags/budget/relations",
            json={"kind": "related", "target": "ghost"},
        )
        assert response.status_code == 404

    def test_turtle_endpoints(self, client):
        make_tag(client, "Budget", ["http://dbpedia.org/resource/Budget"])
        client.post(
            "/api/v1/tags/budget/links",
            json={"portal_id": "alpha", "tag_name": "budget"},
        )
        single = client.get("/api/v1/tags/budget.ttl")
        assert single.status_code == 200
        assert single.headers["content-type"].startswith("text/turtle")
        triples = parse_turtle(single.text)
        # dataset-side links resolve through the corpus snapshots
        assert any("alpha.example.org/dataset/" in s for s, _, _ in triples)
        everything = client.get("/api/v1/export.ttl")
        assert parse_turtle(everything.text) >= triples
        assert client.get("/api/v1/tags/ghost.ttl").status_code == 404


class TestCurationEndpoints:
    def test_portals_listing(self, client):
        portals = client.get("/api/v1/portals").json()["portals"]
        assert [p["portal_id"] for p in portals] == ["alpha", "bravo", "charlie"]
        alpha = portals[0]
        assert alpha["dataset_count"] == 4 and alpha["tag_count"] == 9

    def test_unknown_portal_404(self, client):
        assert client.get("/api/v1/portals/nope/suggestions").status_code == 404

    def test_suggestion_listing_filters_by_tier(self, client):
        all_items = client.get("/api/v1/portals/alpha/suggestions").json()["suggestions"]
        assert len(all_items) == 1
        (item,) = all_items
        assert item["tier"] == 1
        assert {m["name"] for m in item["members"]} == {"Budget", "budget"}
        member = next(m for m in item["members"] if m["name"] == "budget")
        assert member["usage_count"] == 2
        assert member["datasets"] == ["a1", "a2"]
        tier2 = client.get(
            "/api/v1/portals/alpha/suggestions", params={"tier": 2}
        ).json()["suggestions"]
        assert tier2 == []

    def test_accept_applies_merge_and_shrinks_queue(self, client):
        (item,) = client.get("/api/v1/portals/alpha/suggestions").json()["suggestions"]
        response = client.post(
            f"/api/v1/portals/alpha/suggestions/{item['suggestion_id']}/accept",
            json={"survivor": "budget"},
        )
        assert response.status_code == 200
        assert response.json()["applied"] is True
        assert response.json()["tag_count"] == 8
        remaining = client.get("/api/v1/portals/alpha/suggestions").json()["suggestions"]
        assert remaining == []
        snapshot = load_snapshot(snapshot_path(client.corpus_dir, "alpha"))
        assert "Budget" not in {t.name for t in snapshot.tags}
        assert snapshot.tag("budget").usage_count == 2
        assert (client.corpus_dir / "merges.log").exists()

    def test_accept_stale_id_is_410(self, client):
        response = client.post(
            "/api/v1/portals/alpha/suggestions/deadbeefdeadbeef/accept",
            json={"survivor": "budget"},
        )
        assert response.status_code == 410

    def test_accept_twice_is_410(self, client):
        (item,) = client.get("/api/v1/portals/alpha/suggestions").json()["suggestions"]
        url = f"/api/v1/portals/alpha/suggestions/{item['suggestion_id']}/accept"
        assert client.post(url, json={"survivor": "budget"}).status_code == 200
        assert client.post(url, json={"survivor": "budget"}).status_code == 410

    def test_accept_with_bad_survivor_is_422(self, client):
        (item,) = client.get("/api/v1/portals/alpha/suggestions").json()["suggestions"]
        response = client.post(
            f"/api/v1/portals/alpha/suggestions/{item['suggestion_id']}/accept",
            json={"survivor": "unrelated"},
        )
        assert response.status_code == 422

    def test_reject_persists(self, client):
        (item,) = client.get("/api/v1/portals/bravo/suggestions").json()["suggestions"]
        response = client.post(
            f"/api/v1/portals/bravo/suggestions/{item['suggestion_id']}/reject"
        )
        assert response.status_code == 200
        assert client.get("/api/v1/portals/bravo/suggestions").json()["suggestions"] == []
        # survives the rejection file round trip
        snapshot = load_snapshot(snapshot_path(client.corpus_dir, "bravo"))
        assert "Gesundheit" in {t.name for t in snapshot.tags}

    def test_portal_tag_listing(self, client):
        tags = client.get("/api/v1/portals/charlie/tags").json()["tags"]
        assert {t["name"] for t in tags} == {"orçamento", "budget", "saúde", "Saude"}
