from __future__ import annotations

import email.utils
import hashlib
import threading
import time
from dataclasses import dataclass
from typing import Callable
from urllib.parse import urljoin, urlsplit

import httpx

FETCHED = "fetched"
NOT_MODIFIED = "not-modified"
UNCHANGED_HASH = "unchanged-hash"
ERROR = "error"

_REDIRECTS = {301, 302, 303, 307, 308}


@dataclass(frozen=True)
class PolitenessPolicy:
    delay: float = 1.0
    user_agent: str = "sdgate/0.1 (+schema.org structured-data crawler)"
    timeout: float = 10.0
    max_redirects: int = 5
    backoff_base: float = 60.0
    backoff_cap: float = 3600.0
    respect_robots: bool = True


@dataclass(frozen=True)
class Validators:
    etag: str | None = None
    last_modified: str | None = None


@dataclass(frozen=True)
class FetchResult:
    url: str
    outcome: str
    status: int | None = None
    body: str | None = None
    content_hash: str | None = None
    validators: Validators = Validators()
    final_url: str | None = None
    elapsed_ms: float = 0.0
    error: str | None = None
    retry_after: float | None = None  # seconds; None means do not retry early

    def __post_init__(self) -> None:
        if (self.body is not None) != (self.outcome == FETCHED):
            raise ValueError("body must be present exactly when the page was fetched")
        if self.outcome in (FETCHED, UNCHANGED_HASH) and self.content_hash is None:
            raise ValueError("content hash required for fetched or unchanged pages")


class HostThrottle:
    """Serializes request starts per host at least ``delay`` seconds apart."""

    def __init__(self, delay: float, clock: Callable[[], float] = time.monotonic, sleep: Callable[[float], None] = time.sleep):
        self.delay = delay
        self.clock = clock
        self.sleep = sleep
        self._last: dict[str, float] = {}
        self._locks: dict[str, threading.Lock] = {}
        self._guard = threading.Lock()

    def _lock_for(self, host: str) -> threading.Lock:
        with self._guard:
            return self._locks.setdefault(host, threading.Lock())

    def wait(self, host: str) -> float:
        """Block until ``host`` may be contacted; returns the recorded start time."""
        with self._lock_for(host):
            last = self._last.get(host)
            if last is not None:
                remaining = last + self.delay - self.clock()
                if remaining > 0:
                    self.sleep(remaining)
            start = self.clock()
            self._last[host] = start
            return start


def host_of(url: str) -> str:
    return urlsplit(url).netloc.lower()


def _retry_after(response: httpx.Response) -> float | None:
    value = response.headers.get("retry-after")
    if not value:
        return None
    if value.strip().isdigit():
        return float(value)
    parsed = email.utils.parsedate_to_datetime(value)
    return max(0.0, parsed.timestamp() - time.time()) if parsed else None


def fetch(
    url: str,
    validators: Validators,
    policy: PolitenessPolicy,
    *,
    client: httpx.Client,
    throttle: HostThrottle,
    stored_hash: str | None = None,
    in_scope: Callable[[str], bool] | None = None,
    log: Callable[[dict], None] | None = None,
) -> FetchResult:
    """Conditional GET with manual redirect handling so every hop is scope-checked."""
    start = time.perf_counter()
    current = url
    headers = {"User-Agent": policy.user_agent}
    if validators.etag:
        headers["If-None-Match"] = validators.etag
    if validators.last_modified:
        headers["If-Modified-Since"] = validators.last_modified

    def elapsed() -> float:
        return (time.perf_counter() - start) * 1000

    for hop in range(policy.max_redirects + 1):
        host = host_of(current)
        started = throttle.wait(host)
        record = {"url": current, "host": host, "start": started, "wall": time.time(), "kind": "page"}
        try:
            response = client.get(current, headers=headers, timeout=policy.timeout, follow_redirects=False)
        except httpx.HTTPError as exc:
            if log:
                log({**record, "status": None, "outcome": ERROR, "error": str(exc)})
            return FetchResult(url, ERROR, final_url=current, elapsed_ms=elapsed(), error=str(exc), retry_after=policy.backoff_base)
        if log:
            log({**record, "status": response.status_code})
        if response.status_code in _REDIRECTS and "location" in response.headers:
            target = urljoin(current, response.headers["location"])
            if in_scope is not None and not in_scope(target):
                return FetchResult(url, ERROR, response.status_code, final_url=current, elapsed_ms=elapsed(),
                                   error=f"redirect to out-of-scope {target}")
            current = target
            continue
        break
    else:
        return FetchResult(url, ERROR, final_url=current, elapsed_ms=elapsed(),
                           error=f"more than {policy.max_redirects} redirects")

    status = response.status_code
    new_validators = Validators(response.headers.get("etag") or validators.etag,
                                response.headers.get("last-modified") or validators.last_modified)
    if status == 304:
        return FetchResult(url, NOT_MODIFIED, status, content_hash=stored_hash, validators=validators,
                           final_url=current, elapsed_ms=elapsed())
    if 200 <= status < 300:
        digest = hashlib.sha256(response.content).hexdigest()
        if stored_hash is not None and digest == stored_hash:
            return FetchResult(url, UNCHANGED_HASH, status, content_hash=digest, validators=new_validators,
                               final_url=current, elapsed_ms=elapsed())
        return FetchResult(url, FETCHED, status, body=response.text, content_hash=digest,
                           validators=new_validators, final_url=current, elapsed_ms=elapsed())
    if status >= 500 or status == 429:
        return FetchResult(url, ERROR, status, final_url=current, elapsed_ms=elapsed(),
                           error=f"HTTP {status}", retry_after=_retry_after(response) or policy.backoff_base)
    return FetchResult(url, ERROR, status, final_url=current, elapsed_ms=elapsed(), error=f"HTTP {status}")
