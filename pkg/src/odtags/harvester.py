"""Fetch portal metadata over the CKAN Action API and build snapshots.

Harvesting pages through the catalog-search endpoint (one request per
page, not per dataset) and unions dataset tags with the portal's
registered tag list. The transport is injectable, so fixtures replay
recorded responses and no test touches the network.
"""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from datetime import datetime
from typing import Callable
from urllib.parse import urlsplit

from .corpus import Corpus, Dataset, LocalTag, PortalSnapshot, new_snapshot
from .records import utc_now
from .transport import HttpTransport, Transport, TransportError

logger = logging.getLogger(__name__)

DEFAULT_PAGE_SIZE = 100
DEFAULT_LOCALE = "en"


class HarvestError(Exception):
    """One portal failed; carries the endpoint, phase, and HTTP status."""

    def __init__(self, portal_id: str, phase: str, message: str, status: int | None = None):
        detail = f"[{portal_id}/{phase}]"
        if status is not None:
            detail += f" HTTP {status}"
        super().__init__(f"{detail} {message}")
        self.portal_id = portal_id
        self.phase = phase
        self.status = status


@dataclass
class PortalEndpoint:
    portal_id: str
    base_url: str
    locale_override: str | None = None
    page_size: int = DEFAULT_PAGE_SIZE
    max_datasets: int | None = None

    def __post_init__(self) -> None:
        scheme = urlsplit(self.base_url).scheme
        if scheme not in ("http", "https"):
            raise ValueError(f"base_url must be http(s), got {self.base_url!r}")
        if self.page_size < 1:
            raise ValueError("page_size must be positive")

    def action_url(self, action: str, **params) -> str:
        url = f"{self.base_url.rstrip('/')}/api/3/action/{action}"
        if params:
            query = "&".join(f"{k}={v}" for k, v in params.items())
            url = f"{url}?{query}"
        return url


@dataclass
class HarvestFailure:
    portal_id: str
    phase: str
    message: str
    status: int | None = None


def _fetch_envelope(endpoint: PortalEndpoint, transport: Transport, phase: str, url: str):
    try:
        response = transport.get(url)
    except TransportError as exc:
        raise HarvestError(endpoint.portal_id, phase, str(exc)) from exc
    if response.status != 200:
        raise HarvestError(
            endpoint.portal_id, phase, f"unexpected status for {url}", response.status
        )
    try:
        envelope = response.json()
    except ValueError as exc:
        raise HarvestError(endpoint.portal_id, phase, f"invalid JSON: {exc}", response.status) from exc
    if not isinstance(envelope, dict) or not envelope.get("success"):
        raise HarvestError(
            endpoint.portal_id, phase, "API returned success=false", response.status
        )
    return envelope.get("result")


def harvest(
    endpoint: PortalEndpoint,
    transport: Transport | None = None,
    now: Callable[[], datetime] = utc_now,
) -> PortalSnapshot:
    """Harvest one portal into a snapshot.

    Makes ceil(datasets / page_size) catalog-search calls (one for an
    empty portal), then one tag-list call. Duplicate dataset ids across
    pages keep the first occurrence.
    """
    transport = transport or HttpTransport()
    datasets: list[Dataset] = []
    seen_ids: set[str] = set()
    start = 0
    total = None
    while True:
        url = endpoint.action_url(
            "package_search", rows=endpoint.page_size, start=start
        )
        result = _fetch_envelope(endpoint, transport, "catalog-search", url)
        if not isinstance(result, dict):
            raise HarvestError(endpoint.portal_id, "catalog-search", "missing result object")
        total = int(result.get("count", 0))
        rows = result.get("results") or []
        for row in rows:
            dataset_id = row.get("name")
            if not dataset_id or dataset_id in seen_ids:
                continue
            seen_ids.add(dataset_id)
            tag_names: list[str] = []
            for tag in row.get("tags") or []:
                name = tag.get("name") if isinstance(tag, dict) else None
                if name and name not in tag_names:
                    tag_names.append(name)
            datasets.append(Dataset(dataset_id, row.get("title") or "", tag_names))
            if endpoint.max_datasets is not None and len(datasets) >= endpoint.max_datasets:
                break
        if endpoint.max_datasets is not None and len(datasets) >= endpoint.max_datasets:
            break
        start += endpoint.page_size
        if start >= total or not rows:
            break

    registry = _fetch_envelope(
        endpoint, transport, "tag-list", endpoint.action_url("tag_list")
    )
    extra_tags = []
    dataset_names = {name for ds in datasets for name in ds.tag_names}
    if isinstance(registry, list):
        for name in registry:
            if isinstance(name, str) and name:
                origin = "both" if name in dataset_names else "registry"
                extra_tags.append(LocalTag(name=name, origin=origin))

    locale = endpoint.locale_override or DEFAULT_LOCALE
    snapshot = new_snapshot(
        portal_id=endpoint.portal_id,
        base_url=endpoint.base_url,
        locale=locale.lower(),
        datasets=datasets,
        extra_tags=extra_tags,
        fetched_at=now(),
        locale_estimated=endpoint.locale_override is None,
    )
    logger.info(
        "harvested %s: %d datasets, %d tags",
        endpoint.portal_id,
        len(snapshot.datasets),
        len(snapshot.tags),
    )
    return snapshot


def harvest_all(
    endpoints: list[PortalEndpoint],
    parallelism: int = 4,
    transport: Transport | None = None,
    now: Callable[[], datetime] = utc_now,
) -> tuple[Corpus, list[HarvestFailure]]:
    """Harvest portals concurrently; failures are reported, not fatal.

    At most ``parallelism`` harvests run at once. The returned corpus
    and failure list are ordered by portal id, so results do not depend
    on completion order.
    """
    if parallelism < 1:
        raise ValueError("parallelism must be >= 1")
    transport = transport or HttpTransport()
    snapshots: list[PortalSnapshot] = []
    failures: list[HarvestFailure] = []

    def run(endpoint: PortalEndpoint) -> PortalSnapshot:
        return harvest(endpoint, transport=transport, now=now)

    with ThreadPoolExecutor(max_workers=parallelism) as pool:
        futures = {pool.submit(run, ep): ep for ep in endpoints}
        for future, endpoint in futures.items():
            try:
                snapshots.append(future.result())
            except HarvestError as exc:
                logger.warning("portal %s failed: %s", endpoint.portal_id, exc)
                failures.append(
                    HarvestFailure(
                        portal_id=exc.portal_id,
                        phase=exc.phase,
                        message=str(exc),
                        status=exc.status,
                    )
                )

    snapshots.sort(key=lambda s: s.portal_id)
    failures.sort(key=lambda f: f.portal_id)
    return Corpus(snapshots=snapshots), failures
