from __future__ import annotations

import functools
import re
from typing import Iterable
from urllib.parse import urldefrag, urljoin, urlsplit

import tldextract
from bs4 import BeautifulSoup

from ..extraction.html import parse_html

DEFAULT_SKIP_PATTERNS = (
    r"^mailto:",
    r"^tel:",
    r"^javascript:",
    r"\.(?:pdf|zip|gz|tar|rar|7z|exe|dmg|iso|jpe?g|png|gif|webp|svg|ico|mp3|mp4|avi|mov|woff2?|ttf|css|js)(?:[?#].*)?$",
)


@functools.lru_cache(maxsize=1)
def _extractor() -> tldextract.TLDExtract:
    # bundled public-suffix snapshot only; never reaches the network
    return tldextract.TLDExtract(suffix_list_urls=(), cache_dir=None)


def registrable_domain(url: str) -> str:
    host = urlsplit(url).hostname or ""
    parts = _extractor()(host)
    if parts.suffix and parts.domain:
        return f"{parts.domain}.{parts.suffix}".lower()
    return host.lower()


def in_scope(url: str, domains: Iterable[str]) -> bool:
    if urlsplit(url).scheme not in ("http", "https"):
        return False
    return registrable_domain(url) in set(domains)


def discover_links(
    html: str | BeautifulSoup,
    base: str,
    scope: str | Iterable[str],
    depth: int = 1,
    skip_patterns: Iterable[str] = DEFAULT_SKIP_PATTERNS,
) -> list[str]:
    """Same-site anchor targets, absolute, fragment-free and de-duplicated."""
    if depth <= 0:
        return []
    domains = {scope} if isinstance(scope, str) else set(scope)
    skips = [re.compile(p, re.IGNORECASE) for p in skip_patterns]
    soup = parse_html(html)
    out: list[str] = []
    for anchor in soup.find_all(["a", "area"], href=True):
        href = anchor["href"].strip()
        if not href or any(p.search(href) for p in skips):
            continue
        url, _ = urldefrag(urljoin(base, href))
        if any(p.search(url) for p in skips) or not in_scope(url, domains):
            continue
        if url not in out:
            out.append(url)
    return out
