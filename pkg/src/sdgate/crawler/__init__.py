"""Scheduled, polite crawling of registered sources."""

from .fetch import (
    ERROR,
    FETCHED,
    NOT_MODIFIED,
    UNCHANGED_HASH,
    FetchResult,
    HostThrottle,
    PolitenessPolicy,
    Validators,
    fetch,
)
from .links import discover_links, in_scope, registrable_domain
from .robots import RobotsCache
from .run import CrawlLog, CrawlReport, CrawlSettings, SourceSummary, run_crawl
from .schedule import (
    DEFAULT_INTERVALS,
    VOLATILITY_CLASSES,
    CrawlState,
    PageState,
    SourceError,
    SourceRecord,
    plan,
    read_source_list,
    write_source_list,
)

__all__ = [
    "DEFAULT_INTERVALS",
    "ERROR",
    "FETCHED",
    "NOT_MODIFIED",
    "UNCHANGED_HASH",
    "VOLATILITY_CLASSES",
    "CrawlLog",
    "CrawlReport",
    "CrawlSettings",
    "CrawlState",
    "FetchResult",
    "HostThrottle",
    "PageState",
    "PolitenessPolicy",
    "RobotsCache",
    "SourceError",
    "SourceRecord",
    "SourceSummary",
    "Validators",
    "discover_links",
    "fetch",
    "in_scope",
    "plan",
    "read_source_list",
    "registrable_domain",
    "run_crawl",
    "write_source_list",
]
