"""Ordered descriptive-image retrieval: search, filter, download, persist.

A provider returns ranked thumbnail results for a URL query; results failing
the photo-like policy are dropped, and the first ``max_images`` survivors are
downloaded in rank order as ``01.jpg`` ... ``NN.jpg``.  A failed download
leaves its ordinal as a gap (no renumbering), so rank-to-ordinal provenance
stays intact.  A ``meta.json`` sidecar records the provenance per ordinal.

Two providers are built in: a configurable HTTP JSON provider and a
deterministic local mock for tests and offline runs.
"""

from __future__ import annotations

import hashlib
import io
import json
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple
from urllib.parse import quote, urlsplit

import requests
from PIL import Image

from .ingest import DatasetManifest
from .ioutil import atomic_write_bytes, atomic_write_text

DEFAULT_MIMES = frozenset({"image/jpeg", "image/png", "image/webp"})
ICON_MAX_EDGE = 128


class FetchError(RuntimeError):
    def __init__(self, message: str, retryable: bool = False):
        super().__init__(message)
        self.retryable = retryable


@dataclass(frozen=True)
class SearchResult:
    rank: int
    thumbnail_url: str
    width: int
    height: int
    mime: str


@dataclass(frozen=True)
class FetchPolicy:
    max_images: int = 20
    min_edge_px: int = 64
    allowed_mimes: frozenset = DEFAULT_MIMES
    request_timeout: float = 10.0
    max_concurrent: int = 4
    per_host_delay: float = 0.0

    def __post_init__(self):
        if not 1 <= self.max_images <= 20:
            raise ValueError("max_images must be in [1, 20]")
        if self.min_edge_px < 1:
            raise ValueError("min_edge_px must be >= 1")


def photo_like(result: SearchResult, policy: FetchPolicy) -> bool:
    """Keep raster results of usable size; drop vector formats and icons."""
    if result.mime not in policy.allowed_mimes:
        return False
    if result.width < policy.min_edge_px or result.height < policy.min_edge_px:
        return False
    # square-and-small is the icon heuristic
    if result.width == result.height and result.width <= ICON_MAX_EDGE:
        return False
    return True


class _HostThrottle:
    """Enforces a minimum delay between requests to the same host."""

    def __init__(self, delay: float):
        self.delay = delay
        self._lock = threading.Lock()
        self._last: Dict[str, float] = {}

    def wait(self, url: str) -> None:
        if self.delay <= 0:
            return
        host = urlsplit(url).netloc
        while True:
            with self._lock:
                now = time.monotonic()
                due = self._last.get(host, 0.0) + self.delay
                if now >= due:
                    self._last[host] = now
                    return
            time.sleep(due - now)


# Providers ------------------------------------------------------------------


@dataclass(frozen=True)
class ProviderConfig:
    """Field mapping for a generic JSON image-search endpoint."""

    endpoint_template: str  # e.g. "http://host/search?q={query}"
    results_path: str = "results"  # dot path into the response document
    rank_field: str = "rank"
    url_field: str = "url"
    width_field: str = "width"
    height_field: str = "height"
    mime_field: str = "mime"
    auth_header: Optional[str] = None
    auth_env: Optional[str] = None

    @classmethod
    def from_file(cls, path: Path) -> "ProviderConfig":
        return cls(**json.loads(Path(path).read_text(encoding="utf-8")))


class HttpJsonProvider:
    def __init__(self, config: ProviderConfig, throttle: Optional[_HostThrottle] = None):
        self.config = config
        self.session = requests.Session()
        self.throttle = throttle or _HostThrottle(0.0)
        if config.auth_header and config.auth_env:
            import os

            token = os.environ.get(config.auth_env)
            if token:
                self.session.headers[config.auth_header] = token

    def search(self, query: str, timeout: float = 10.0) -> List[SearchResult]:
        url = self.config.endpoint_template.format(query=quote(query, safe=""))
        self.throttle.wait(url)
        try:
            resp = self.session.get(url, timeout=timeout)
            resp.raise_for_status()
            doc = resp.json()
        except requests.RequestException as exc:
            raise FetchError(f"search failed for {query!r}: {exc}", retryable=True)
        node = doc
        for part in self.config.results_path.split("."):
            if part:
                node = node[part]
        results = []
        for item in node:
            results.append(
                SearchResult(
                    rank=int(item[self.config.rank_field]),
                    thumbnail_url=str(item[self.config.url_field]),
                    width=int(item[self.config.width_field]),
                    height=int(item[self.config.height_field]),
                    mime=str(item[self.config.mime_field]),
                )
            )
        results.sort(key=lambda r: r.rank)
        return results

    def fetch(self, result: SearchResult, timeout: float = 10.0) -> bytes:
        self.throttle.wait(result.thumbnail_url)
        try:
            resp = self.session.get(result.thumbnail_url, timeout=timeout)
            resp.raise_for_status()
        except requests.RequestException as exc:
            raise FetchError(
                f"download failed for rank {result.rank}: {exc}", retryable=True
            )
        return resp.content


class MockProvider:
    """Deterministic offline provider: result lists and bytes keyed on the query."""

    def __init__(self, seed: int = 0, results_per_query: Optional[int] = None):
        self.seed = seed
        self.results_per_query = results_per_query

    def _rng_int(self, *parts) -> int:
        key = ":".join(str(p) for p in (self.seed,) + parts).encode()
        return int.from_bytes(hashlib.blake2b(key, digest_size=8).digest(), "big")

    def search(self, query: str, timeout: float = 10.0) -> List[SearchResult]:
        n = self.results_per_query
        if n is None:
            n = 8 + self._rng_int(query, "count") % 18  # 8..25
        results = []
        for rank in range(1, n + 1):
            h = self._rng_int(query, rank)
            if h % 7 == 0:  # sprinkle non-photo results to exercise filtering
                mime, w, hgt = "image/svg+xml", 64, 64
            else:
                mime = "image/jpeg"
                w = 100 + h % 300
                hgt = 80 + (h >> 16) % 260
            results.append(SearchResult(rank, f"mock://{quote(query, safe='')}/{rank}", w, hgt, mime))
        return results

    def fetch(self, result: SearchResult, timeout: float = 10.0) -> bytes:
        shade = self._rng_int(result.thumbnail_url) % 256
        buf = io.BytesIO()
        Image.new("L", (result.width, result.height), color=shade).save(
            buf, format="JPEG", quality=60
        )
        return buf.getvalue()


# Fetching -------------------------------------------------------------------


@dataclass
class FetchOutcome:
    site_id: str
    query: str
    requested: int = 0
    filtered: int = 0
    saved: int = 0
    failed: Dict[int, str] = field(default_factory=dict)  # ordinal -> reason
    skipped: bool = False


def fetch_descriptive_images(
    query: str,
    site_id: str,
    provider,
    policy: FetchPolicy,
    dest_root: Path,
) -> FetchOutcome:
    """Fetch, filter and persist one site's ordered descriptive images."""
    site_dir = Path(dest_root) / site_id
    outcome = FetchOutcome(site_id=site_id, query=query)
    results = provider.search(query, timeout=policy.request_timeout)
    outcome.requested = len(results)
    survivors = [r for r in results if photo_like(r, policy)]
    outcome.filtered = len(results) - len(survivors)
    survivors = survivors[: policy.max_images]

    meta: Dict[str, dict] = {}
    lock = threading.Lock()

    def grab(job: Tuple[int, SearchResult]) -> None:
        ordinal, result = job
        name = f"{ordinal:02d}.jpg"
        target = site_dir / name
        try:
            if not (target.is_file() and target.stat().st_size > 0):
                data = provider.fetch(result, timeout=policy.request_timeout)
                atomic_write_bytes(target, data)
            with lock:
                outcome.saved += 1
                meta[name] = {
                    "rank": result.rank,
                    "source_url": result.thumbnail_url,
                    "width": result.width,
                    "height": result.height,
                    "mime": result.mime,
                }
        except FetchError as exc:
            with lock:
                outcome.failed[ordinal] = str(exc)

    jobs = list(enumerate(survivors, start=1))
    if policy.max_concurrent > 1 and len(jobs) > 1:
        with ThreadPoolExecutor(max_workers=policy.max_concurrent) as pool:
            list(pool.map(grab, jobs))
    else:
        for job in jobs:
            grab(job)

    site_dir.mkdir(parents=True, exist_ok=True)
    sidecar = {
        "site_id": site_id,
        "query": query,
        "images": {k: meta[k] for k in sorted(meta)},
        "failed_ordinals": {
            f"{o:02d}": reason for o, reason in sorted(outcome.failed.items())
        },
    }
    atomic_write_text(site_dir / "meta.json", json.dumps(sidecar, indent=2) + "\n")
    return outcome


def site_complete(site_dir: Path) -> bool:
    """A site is complete when a prior run left a sidecar with no failures."""
    meta_path = Path(site_dir) / "meta.json"
    if not meta_path.is_file():
        return False
    try:
        doc = json.loads(meta_path.read_text(encoding="utf-8"))
    except ValueError:
        return False
    return not doc.get("failed_ordinals")


@dataclass
class BatchReport:
    outcomes: List[FetchOutcome] = field(default_factory=list)

    @property
    def saved_total(self) -> int:
        return sum(o.saved for o in self.outcomes)

    @property
    def skipped_sites(self) -> int:
        return sum(1 for o in self.outcomes if o.skipped)


def batch_fetch(
    manifest: DatasetManifest,
    provider,
    policy: FetchPolicy,
    dest_root: Path,
    query_mode: str = "url",
    records: Optional[Sequence] = None,
) -> BatchReport:
    """Fetch every manifest record; resumable and never aborted by one site.

    ``query_mode`` selects the search string: the record's full URL, or just
    its host ("domain").  The choice is recorded in each site's sidecar.
    """
    report = BatchReport()
    for record in records if records is not None else manifest.records:
        site_dir = Path(dest_root) / record.site_id
        if site_complete(site_dir):
            report.outcomes.append(
                FetchOutcome(record.site_id, record.url, skipped=True)
            )
            continue
        if query_mode == "domain":
            query = urlsplit(record.url).netloc or record.url
        else:
            query = record.url
        try:
            report.outcomes.append(
                fetch_descriptive_images(query, record.site_id, provider, policy, dest_root)
            )
        except FetchError as exc:
            outcome = FetchOutcome(record.site_id, query)
            outcome.failed[0] = str(exc)
            report.outcomes.append(outcome)
    return report
