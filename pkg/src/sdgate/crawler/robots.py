from __future__ import annotations

import threading
import time
from typing import Callable
from urllib.parse import urlsplit
from urllib.robotparser import RobotFileParser

import httpx

from .fetch import HostThrottle, PolitenessPolicy, host_of


class RobotsCache:
    """robots.txt rules per host, fetched at most once per crawl run.

    A missing robots.txt (4xx) allows everything; an unreachable one (5xx or
    network error) disallows the whole host for this run.
    """

    def __init__(self, client: httpx.Client, throttle: HostThrottle, policy: PolitenessPolicy,
                 log: Callable[[dict], None] | None = None):
        self.client = client
        self.throttle = throttle
        self.policy = policy
        self.log = log
        self._parsers: dict[str, RobotFileParser] = {}
        self._lock = threading.Lock()

    def _load(self, url: str) -> RobotFileParser:
        parts = urlsplit(url)
        robots_url = f"{parts.scheme}://{parts.netloc}/robots.txt"
        parser = RobotFileParser(robots_url)
        host = host_of(url)
        started = self.throttle.wait(host)
        record = {"url": robots_url, "host": host, "start": started, "wall": time.time(), "kind": "robots"}
        try:
            response = self.client.get(robots_url, headers={"User-Agent": self.policy.user_agent},
                                       timeout=self.policy.timeout, follow_redirects=True)
        except httpx.HTTPError as exc:
            if self.log:
                self.log({**record, "status": None, "error": str(exc)})
            parser.disallow_all = True
            return parser
        if self.log:
            self.log({**record, "status": response.status_code})
        if response.status_code >= 500:
            parser.disallow_all = True
        elif response.status_code >= 400:
            parser.allow_all = True
        else:
            parser.parse(response.text.splitlines())
        return parser

    def allowed(self, url: str) -> bool:
        key = host_of(url)
        with self._lock:
            parser = self._parsers.get(key)
            if parser is None:
                parser = self._parsers[key] = self._load(url)
        return parser.can_fetch(self.policy.user_agent, url)
