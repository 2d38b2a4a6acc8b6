from __future__ import annotations

import json
import math
import os
import threading
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Any, Iterable, Mapping

import yaml

VOLATILITY_CLASSES = ("static", "dynamic", "active")
DEFAULT_INTERVALS = {"static": 24 * 3600.0, "dynamic": 3600.0, "active": 300.0}


class SourceError(ValueError):
    pass


@dataclass(frozen=True)
class SourceRecord:
    url: str
    volatility: str
    last_fetch: float | None = None
    last_hash: str | None = None
    etag: str | None = None
    last_modified: str | None = None
    error_count: int = 0
    enabled: bool = True
    depth: int | None = None
    budget: int | None = None
    retry_at: float | None = None
    status: str | None = None

    def __post_init__(self) -> None:
        if self.volatility not in VOLATILITY_CLASSES:
            raise SourceError(f"invalid volatility class {self.volatility!r}; expected one of {VOLATILITY_CLASSES}")
        if self.error_count < 0:
            raise SourceError("error count must be non-negative")


def plan(sources: Iterable[SourceRecord], now: float, intervals: Mapping[str, float] = DEFAULT_INTERVALS) -> list[SourceRecord]:
    """Sources due for fetching, most stale first (ties by URL).

    A pending error backoff only ever postpones a source, never advances it.
    """
    due = []
    for src in sources:
        if not src.enabled:
            continue
        if src.retry_at is not None and now < src.retry_at:
            continue
        if src.last_fetch is None or now - src.last_fetch >= intervals[src.volatility]:
            due.append(src)

    def staleness(src: SourceRecord) -> float:
        return math.inf if src.last_fetch is None else now - src.last_fetch

    due.sort(key=lambda s: (-staleness(s), s.url))
    return due


# --- source list file -------------------------------------------------------------


def read_source_list(path: str | Path) -> list[dict[str, Any]]:
    path = Path(path)
    if not path.exists():
        return []
    data = yaml.safe_load(path.read_text(encoding="utf-8")) or {}
    entries = data.get("sources", []) if isinstance(data, dict) else data
    out = []
    for entry in entries or []:
        if "url" not in entry or "volatility" not in entry:
            raise SourceError(f"source entry {entry!r} needs url and volatility")
        if entry["volatility"] not in VOLATILITY_CLASSES:
            raise SourceError(f"invalid volatility class {entry['volatility']!r} for {entry['url']}")
        out.append(dict(entry))
    return out


def write_source_list(path: str | Path, entries: list[dict[str, Any]]) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    text = yaml.safe_dump({"sources": entries}, sort_keys=False)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(text, encoding="utf-8")
    os.replace(tmp, path)


# --- persisted crawl state --------------------------------------------------------


@dataclass
class PageState:
    last_fetch: float | None = None
    last_hash: str | None = None
    etag: str | None = None
    last_modified: str | None = None
    error_count: int = 0
    retry_at: float | None = None
    status: str | None = None
    links: list[str] = field(default_factory=list)


class CrawlState:
    """Per-URL fetch bookkeeping, written through to disk after every update."""

    def __init__(self, path: str | Path | None = None):
        self.path = Path(path) if path is not None else None
        self.pages: dict[str, PageState] = {}
        self._lock = threading.Lock()
        if self.path is not None and self.path.exists():
            raw = json.loads(self.path.read_text(encoding="utf-8"))
            self.pages = {url: PageState(**rec) for url, rec in raw.get("pages", {}).items()}

    def page(self, url: str) -> PageState:
        with self._lock:
            return replace(self.pages.get(url, PageState()))

    def update(self, url: str, page: PageState) -> None:
        with self._lock:
            self.pages[url] = page
            self._save()

    def _save(self) -> None:
        if self.path is None:
            return
        self.path.parent.mkdir(parents=True, exist_ok=True)
        payload = {"pages": {u: asdict(p) for u, p in sorted(self.pages.items())}}
        tmp = self.path.with_name(self.path.name + ".tmp")
        with open(tmp, "w", encoding="utf-8") as fh:
            json.dump(payload, fh, indent=1)
            fh.flush()
            os.fsync(fh.fileno())
        os.replace(tmp, self.path)

    def source_record(self, entry: Mapping[str, Any]) -> SourceRecord:
        page = self.pages.get(entry["url"], PageState())
        return SourceRecord(
            url=entry["url"],
            volatility=entry["volatility"],
            last_fetch=page.last_fetch,
            last_hash=page.last_hash,
            etag=page.etag,
            last_modified=page.last_modified,
            error_count=page.error_count,
            enabled=bool(entry.get("enabled", True)),
            depth=entry.get("depth"),
            budget=entry.get("budget"),
            retry_at=page.retry_at,
            status=page.status,
        )
