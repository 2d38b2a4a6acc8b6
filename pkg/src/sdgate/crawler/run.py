from __future__ import annotations

import json
import logging
import threading
import time
from collections import deque
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Callable, Mapping

import httpx

from ..extraction import extract_page
from ..store import EntityStore, StoreError
from .fetch import ERROR, FETCHED, NOT_MODIFIED, HostThrottle, PolitenessPolicy, Validators, fetch, host_of
from .links import DEFAULT_SKIP_PATTERNS, discover_links, in_scope, registrable_domain
from .robots import RobotsCache
from .schedule import DEFAULT_INTERVALS, CrawlState, PageState, SourceRecord, plan

logger = logging.getLogger("sdgate.crawler")


@dataclass(frozen=True)
class CrawlSettings:
    intervals: Mapping[str, float] = field(default_factory=lambda: dict(DEFAULT_INTERVALS))
    policy: PolitenessPolicy = PolitenessPolicy()
    depth: int = 1
    budget: int = 200
    skip_patterns: tuple[str, ...] = DEFAULT_SKIP_PATTERNS
    workers: int = 1


@dataclass
class SourceSummary:
    url: str
    attempted: int = 0
    fetched: int = 0
    not_modified: int = 0
    unchanged_hash: int = 0
    errored: int = 0
    robots_skipped: int = 0
    entities_extracted: int = 0
    entities_created: int = 0
    errors: list[str] = field(default_factory=list)

    @property
    def unchanged(self) -> int:
        return self.not_modified + self.unchanged_hash


@dataclass
class CrawlReport:
    started_at: float
    duration: float = 0.0
    sources: list[SourceSummary] = field(default_factory=list)

    def _sum(self, name: str) -> int:
        return sum(getattr(s, name) for s in self.sources)

    attempted = property(lambda self: self._sum("attempted"))
    fetched = property(lambda self: self._sum("fetched"))
    unchanged = property(lambda self: self._sum("unchanged"))
    errored = property(lambda self: self._sum("errored"))
    robots_skipped = property(lambda self: self._sum("robots_skipped"))
    entities_extracted = property(lambda self: self._sum("entities_extracted"))
    entities_created = property(lambda self: self._sum("entities_created"))

    def to_json(self) -> dict[str, Any]:
        return {
            "startedAt": self.started_at,
            "duration": round(self.duration, 6),
            "attempted": self.attempted,
            "fetched": self.fetched,
            "unchanged": self.unchanged,
            "errored": self.errored,
            "robotsSkipped": self.robots_skipped,
            "entitiesExtracted": self.entities_extracted,
            "entitiesCreated": self.entities_created,
            "sources": [{**asdict(s), "unchanged": s.unchanged} for s in self.sources],
        }


class CrawlLog:
    """Append-only JSON-lines record of every HTTP request the crawler makes."""

    def __init__(self, path: str | Path | None = None):
        self.path = Path(path) if path is not None else None
        self.records: list[dict] = []
        self._lock = threading.Lock()

    def __call__(self, record: dict) -> None:
        with self._lock:
            self.records.append(record)
            if self.path is not None:
                self.path.parent.mkdir(parents=True, exist_ok=True)
                with open(self.path, "a", encoding="utf-8") as fh:
                    fh.write(json.dumps(record, sort_keys=True) + "\n")


def _next_state(previous: PageState, result, now: float, policy: PolitenessPolicy, links: list[str] | None) -> PageState:
    if result.outcome == ERROR:
        count = previous.error_count + 1
        retry_at = None
        if result.retry_after is not None:
            delay = max(result.retry_after, min(policy.backoff_base * 2 ** (count - 1), policy.backoff_cap))
            retry_at = now + delay
        return PageState(previous.last_fetch, previous.last_hash, previous.etag, previous.last_modified,
                         count, retry_at, f"error: {result.error}", previous.links)
    return PageState(
        last_fetch=now,
        last_hash=result.content_hash,
        etag=result.validators.etag,
        last_modified=result.validators.last_modified,
        error_count=0,
        retry_at=None,
        status=result.outcome,
        links=links if links is not None else previous.links,
    )


class _Run:
    def __init__(self, store: EntityStore, state: CrawlState, settings: CrawlSettings, client: httpx.Client,
                 clock: Callable[[], float], log: CrawlLog, throttle: HostThrottle):
        self.store = store
        self.state = state
        self.settings = settings
        self.client = client
        self.clock = clock
        self.log = log
        self.throttle = throttle
        self.robots = RobotsCache(client, throttle, settings.policy, log)
        self.seen: set[str] = set()
        self.seen_lock = threading.Lock()

    def claim(self, url: str) -> bool:
        with self.seen_lock:
            if url in self.seen:
                return False
            self.seen.add(url)
            return True

    def crawl_source(self, source: SourceRecord) -> SourceSummary:
        summary = SourceSummary(source.url)
        depth_limit = source.depth if source.depth is not None else self.settings.depth
        budget = source.budget if source.budget is not None else self.settings.budget
        scope = {registrable_domain(source.url)}
        queue: deque[tuple[str, int]] = deque()
        if self.claim(source.url):
            queue.append((source.url, 0))
        policy = self.settings.policy
        while queue and summary.attempted < budget:
            url, depth = queue.popleft()
            if policy.respect_robots and not self.robots.allowed(url):
                summary.robots_skipped += 1
                logger.info("robots.txt disallows %s", url)
                continue
            previous = self.state.page(url)
            result = fetch(
                url,
                Validators(previous.etag, previous.last_modified),
                policy,
                client=self.client,
                throttle=self.throttle,
                stored_hash=previous.last_hash,
                in_scope=lambda u: in_scope(u, scope),
                log=self.log,
            )
            now = self.clock()
            summary.attempted += 1
            links: list[str] | None = None
            if result.outcome == FETCHED:
                base = result.final_url or url
                entities, extraction = extract_page(result.body, base, fetched_at=now, page_hash=result.content_hash)
                try:
                    merged = self.store.upsert(entities)
                except StoreError as exc:
                    # leave the page state untouched so the next run retries it
                    summary.errored += 1
                    summary.errors.append(f"{url}: store error {exc}")
                    continue
                summary.fetched += 1
                summary.entities_extracted += len(entities)
                summary.entities_created += merged.created
                links = discover_links(result.body, base, scope, depth_limit - depth, self.settings.skip_patterns)
            elif result.outcome == ERROR:
                summary.errored += 1
                summary.errors.append(f"{url}: {result.error}")
            elif result.outcome == NOT_MODIFIED:
                summary.not_modified += 1
            else:
                summary.unchanged_hash += 1
            page = _next_state(previous, result, now, policy, links)
            self.state.update(url, page)
            if result.outcome != ERROR and depth < depth_limit:
                for link in page.links:
                    if self.claim(link):
                        queue.append((link, depth + 1))
        return summary


def run_crawl(
    sources: list[SourceRecord],
    store: EntityStore,
    state: CrawlState,
    settings: CrawlSettings = CrawlSettings(),
    *,
    client: httpx.Client | None = None,
    force: bool = False,
    clock: Callable[[], float] = time.time,
    log: CrawlLog | None = None,
    throttle: HostThrottle | None = None,
) -> CrawlReport:
    """Fetch every due source (all enabled sources with ``force``) and ingest the results.

    With ``settings.workers == 1`` sources are processed strictly in plan order.
    With more workers, sources are grouped by host and each host is served by
    one thread, so per-host politeness holds regardless of concurrency.
    """
    started = clock()
    perf = time.perf_counter()
    report = CrawlReport(started_at=started)
    due = [s for s in sources if s.enabled] if force else plan(sources, started, settings.intervals)
    if force:
        due.sort(key=lambda s: s.url)
    own_client = client is None
    client = client or httpx.Client()
    try:
        run = _Run(store, state, settings, client, clock, log or CrawlLog(),
                   throttle or HostThrottle(settings.policy.delay))
        if settings.workers <= 1:
            report.sources = [run.crawl_source(s) for s in due]
        else:
            groups: dict[str, list[SourceRecord]] = {}
            for src in due:
                groups.setdefault(host_of(src.url), []).append(src)
            with ThreadPoolExecutor(max_workers=settings.workers) as pool:
                futures = {h: pool.submit(lambda group: [run.crawl_source(s) for s in group], g)
                           for h, g in groups.items()}
                by_url = {summary.url: summary for f in futures.values() for summary in f.result()}
            report.sources = [by_url[s.url] for s in due]
    finally:
        if own_client:
            client.close()
    report.duration = time.perf_counter() - perf
    return report
