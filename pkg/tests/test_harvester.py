from __future__ import annotations

import threading

import pytest

from fixtures import ckan_fixture, fixed_clock

from odtags.harvester import HarvestError, PortalEndpoint, harvest, harvest_all
from odtags.transport import ReplayTransport


def endpoint(base="http://portal.example.org", **kw):
    return PortalEndpoint(portal_id="portal", base_url=base, **kw)


class TestEndpoint:
    def test_scheme_validated(self):
        with pytest.raises(ValueError):
            PortalEndpoint(portal_id="x", base_url="ftp://nope.example.org")

    def test_page_size_validated(self):
        with pytest.raises(ValueError):
            PortalEndpoint(portal_id="x", base_url="http://x.org", page_size=0)


class TestHarvest:
    def test_fixture_portal(self):
        transport = ReplayTransport()
        base = "http://portal.example.org"
        transport.add_json(
            f"{base}/api/3/action/package_search?rows=100&start=0",
            {
                "success": True,
                "result": {
                    "count": 3,
                    "results": [
                        {"name": "d1", "title": "One", "tags": [{"name": "budget"}, {"name": "health"}]},
                        {"name": "d2", "title": "Two", "tags": [{"name": "budget"}, {"name": "transport"}]},
                        {"name": "d3", "title": "Three", "tags": [{"name": "education"}]},
                    ],
                },
            },
        )
        transport.add_json(
            f"{base}/api/3/action/tag_list",
            {"success": True, "result": ["budget", "health", "transport", "education", "environment"]},
        )
        snapshot = harvest(endpoint(locale_override="en"), transport, now=fixed_clock)
        assert len(snapshot.datasets) == 3
        assert len(snapshot.tags) == 5
        assert snapshot.tag("budget").usage_count == 2
        assert snapshot.tag("environment").usage_count == 0
        assert snapshot.tag("environment").origin == "registry"
        assert snapshot.tag("budget").origin == "both"
        assert snapshot.locale_estimated is False

    def test_empty_portal_no_error(self):
        transport = ckan_fixture("http://portal.example.org", 0)
        snapshot = harvest(endpoint(), transport, now=fixed_clock)
        assert snapshot.datasets == []
        assert snapshot.locale == "en"
        assert snapshot.locale_estimated is True

    def test_success_false_raises_with_phase(self):
        transport = ReplayTransport()
        transport.add_json(
            "http://portal.example.org/api/3/action/package_search?rows=100&start=0",
            {"success": False, "error": {"message": "disabled"}},
        )
        with pytest.raises(HarvestError) as err:
            harvest(endpoint(), transport, now=fixed_clock)
        assert err.value.phase == "catalog-search"

    def test_unreachable_raises(self):
        with pytest.raises(HarvestError):
            harvest(endpoint(), ReplayTransport(), now=fixed_clock)

    def test_tag_list_failure_has_phase(self):
        transport = ReplayTransport()
        transport.add_json(
            "http://portal.example.org/api/3/action/package_search?rows=100&start=0",
            {"success": True, "result": {"count": 0, "results": []}},
        )
        transport.add_json(
            "http://portal.example.org/api/3/action/tag_list",
            {"success": False},
        )
        with pytest.raises(HarvestError) as err:
            harvest(endpoint(), transport, now=fixed_clock)
        assert err.value.phase == "tag-list"

    def test_http_error_status_carried(self):
        transport = ReplayTransport()
        transport.add(
            "http://portal.example.org/api/3/action/package_search?rows=100&start=0",
            "gone",
            status=503,
        )
        with pytest.raises(HarvestError) as err:
            harvest(endpoint(), transport, now=fixed_clock)
        assert err.value.status == 503

    @pytest.mark.parametrize("count,expected_calls", [(0, 1), (1, 1), (250, 3)])
    def test_paging_exhaustiveness(self, count, expected_calls):
        transport = ckan_fixture("http://portal.example.org", count)
        snapshot = harvest(endpoint(), transport, now=fixed_clock)
        assert len(snapshot.datasets) == count
        assert len(transport.calls_matching("package_search")) == expected_calls
        assert len({d.dataset_id for d in snapshot.datasets}) == count

    def test_overlapping_pages_dedupe_first_wins(self):
        base = "http://portal.example.org"
        transport = ReplayTransport()
        transport.add_json(
            f"{base}/api/3/action/package_search?rows=2&start=0",
            {
                "success": True,
                "result": {
                    "count": 3,
                    "results": [
                        {"name": "d1", "title": "first", "tags": []},
                        {"name": "d2", "title": "", "tags": []},
                    ],
                },
            },
        )
        transport.add_json(
            f"{base}/api/3/action/package_search?rows=2&start=2",
            {
                "success": True,
                "result": {
                    "count": 3,
                    "results": [
                        {"name": "d1", "title": "duplicate", "tags": []},
                        {"name": "d3", "title": "", "tags": []},
                    ],
                },
            },
        )
        transport.add_json(
            f"{base}/api/3/action/tag_list", {"success": True, "result": []}
        )
        snapshot = harvest(endpoint(page_size=2), transport, now=fixed_clock)
        ids = [d.dataset_id for d in snapshot.datasets]
        assert ids == ["d1", "d2", "d3"]
        assert snapshot.datasets[0].title == "first"

    def test_max_datasets_cap(self):
        transport = ckan_fixture("http://portal.example.org", 250)
        snapshot = harvest(endpoint(max_datasets=120), transport, now=fixed_clock)
        assert len(snapshot.datasets) == 120


class TestHarvestAll:
    def make_endpoints(self, transport):
        endpoints = []
        for name in ("alpha", "bravo", "charlie"):
            base = f"http://{name}.example.org"
            ckan_fixture(base, 5, transport=transport)
            endpoints.append(PortalEndpoint(portal_id=name, base_url=base))
        return endpoints

    def test_one_failing_portal_reported(self):
        transport = ReplayTransport()
        endpoints = self.make_endpoints(transport)
        endpoints.append(
            PortalEndpoint(portal_id="broken", base_url="http://broken.example.org")
        )
        corpus, failures = harvest_all(endpoints, parallelism=2, transport=transport, now=fixed_clock)
        assert corpus.portal_ids() == ["alpha", "bravo", "charlie"]
        assert [f.portal_id for f in failures] == ["broken"]
        assert failures[0].phase == "catalog-search"

    def test_empty_endpoint_list(self):
        corpus, failures = harvest_all([], parallelism=1, transport=ReplayTransport())
        assert corpus.snapshots == [] and failures == []

    def test_parallelism_determinism(self):
        t1 = ReplayTransport()
        t2 = ReplayTransport()
        seq = harvest_all(self.make_endpoints(t1), parallelism=1, transport=t1, now=fixed_clock)
        par = harvest_all(self.make_endpoints(t2), parallelism=4, transport=t2, now=fixed_clock)
        assert seq[0] == par[0]
        assert seq[1] == par[1]

    def test_parallelism_validated(self):
        with pytest.raises(ValueError):
            harvest_all([], parallelism=0)

    def test_bounded_inflight_requests(self):
        lock = threading.Lock()
        state = {"inflight": 0, "peak": 0}
        inner = ReplayTransport()
        endpoints = self.make_endpoints(inner)

        class Counting:
            def get(self, url):
                with lock:
                    state["inflight"] += 1
                    state["peak"] = max(state["peak"], state["inflight"])
                try:
                    return inner.get(url)
                finally:
                    with lock:
                        state["inflight"] -= 1

        harvest_all(endpoints, parallelism=2, transport=Counting(), now=fixed_clock)
        assert state["peak"] <= 2
