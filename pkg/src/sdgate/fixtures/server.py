"""Local mini DMO site plus a fake hotel booking engine."""

from __future__ import annotations

import hashlib
import json
import threading
import time
from dataclasses import asdict, dataclass
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from importlib import resources
from pathlib import Path
from typing import Any
from urllib.parse import parse_qsl, urlsplit

LAST_MODIFIED = "Mon, 06 Jan 2025 09:00:00 GMT"
BOOKING_FIELDS = ("hotel", "room", "from")


def site_root() -> Path:
    return Path(str(resources.files("sdgate.fixtures") / "site"))


@dataclass(frozen=True)
class LoggedRequest:
    method: str
    path: str
    query: str
    content_type: str | None
    body: str
    status: int
    timestamp: float

    @property
    def url_path(self) -> str:
        return self.path + ("?" + self.query if self.query else "")


def confirmation(params: dict[str, str]) -> dict[str, Any]:
    digest = hashlib.sha256(json.dumps(params, sort_keys=True).encode()).hexdigest()[:8].upper()
    doc = {
        "@context": "https://schema.org",
        "@type": "LodgingReservation",
        "reservationId": f"R-{digest}",
        "reservationStatus": "https://schema.org/ReservationConfirmed",
        "reservationFor": {"@type": "Hotel", "identifier": params["hotel"]},
        "checkinTime": params["from"],
        "lodgingUnitDescription": params["room"],
    }
    if params.get("to"):
        doc["checkoutTime"] = params["to"]
    return doc


def rejection(missing: list[str]) -> dict[str, Any]:
    return {
        "@context": "https://schema.org",
        "@type": "LodgingReservation",
        "reservationStatus": "https://schema.org/ReservationCancelled",
        "disambiguatingDescription": "missing required field(s): " + ", ".join(missing),
    }


class _Handler(BaseHTTPRequestHandler):
    server: "_Server"
    protocol_version = "HTTP/1.1"
    disable_nagle_algorithm = True  # headers and body go out as separate writes

    def log_message(self, *args) -> None:  # keep test output quiet
        pass

    def _send(self, status: int, body: bytes = b"", headers: dict[str, str] | None = None) -> None:
        self.send_response(status)
        for k, v in (headers or {}).items():
            self.send_header(k, v)
        self.send_header("Content-Length", str(len(body)))
        self.end_headers()
        if self.command != "HEAD":
            self.wfile.write(body)

    def _log(self, status: int, body: str = "") -> None:
        parts = urlsplit(self.path)
        self.server.fixture.record(LoggedRequest(self.command, parts.path, parts.query,
                                                 self.headers.get("Content-Type"), body, status, time.time()))

    def do_GET(self) -> None:
        fixture = self.server.fixture
        path = urlsplit(self.path).path
        if path in fixture.faults:
            status = fixture.faults[path]
            self._log(status)
            return self._send(status, b"injected fault", {"Content-Type": "text/plain"})
        if path in fixture.redirects:
            self._log(302)
            return self._send(302, headers={"Location": fixture.redirects[path]})
        page = fixture.render(path)
        if page is None:
            self._log(404)
            return self._send(404, b"not found", {"Content-Type": "text/plain"})
        body, content_type = page
        etag = '"' + hashlib.sha256(body).hexdigest()[:16] + '"'
        headers = {"Content-Type": content_type, "ETag": etag, "Last-Modified": LAST_MODIFIED}
        if self.headers.get("If-None-Match") == etag:
            self._log(304)
            return self._send(304, headers={"ETag": etag})
        self._log(200)
        self._send(200, body, headers)

    do_HEAD = do_GET

    def do_POST(self) -> None:
        parts = urlsplit(self.path)
        length = int(self.headers.get("Content-Length") or 0)
        raw = self.rfile.read(length).decode("utf-8", errors="replace")
        if parts.path != "/reserve":
            self._log(404, raw)
            return self._send(404, b"not found", {"Content-Type": "text/plain"})
        params = dict(parse_qsl(parts.query, keep_blank_values=True))
        ctype = (self.headers.get("Content-Type") or "").split(";")[0].strip()
        if ctype == "application/json" and raw.strip():
            params.update({k: str(v) for k, v in json.loads(raw).items()})
        else:
            params.update(parse_qsl(raw, keep_blank_values=True))
        missing = [f for f in BOOKING_FIELDS if not params.get(f)]
        status, doc = (422, rejection(missing)) if missing else (200, confirmation(params))
        self._log(status, raw)
        self._send(status, json.dumps(doc, indent=2).encode(), {"Content-Type": "application/ld+json"})


class _Server(ThreadingHTTPServer):
    daemon_threads = True
    fixture: "FixtureServer"


class FixtureServer:
    """Serve the fixture site on loopback.

    ``{{origin}}`` in page sources is replaced by the server's own origin.
    ``faults`` maps a path to an HTTP status to return instead of the page;
    ``overrides`` maps a path to replacement page text.
    """

    def __init__(self, port: int = 0, root: Path | None = None, host: str = "127.0.0.1"):
        self.root = Path(root) if root is not None else site_root()
        self.faults: dict[str, int] = {}
        self.redirects: dict[str, str] = {}
        self.overrides: dict[str, str] = {}
        self._log: list[LoggedRequest] = []
        self._log_lock = threading.Lock()
        self._httpd = _Server((host, port), _Handler)
        self._httpd.fixture = self
        self.host, self.port = self._httpd.server_address[:2]
        self._thread = threading.Thread(target=self._httpd.serve_forever, args=(0.05,), daemon=True)

    @property
    def origin(self) -> str:
        return f"http://{self.host}:{self.port}"

    def url(self, path: str = "/") -> str:
        return self.origin + path

    def _file_for(self, path: str) -> Path | None:
        rel = path.lstrip("/")
        candidates = [self.root / "index.html"] if rel == "" else [self.root / rel, self.root / (rel + ".html")]
        if rel.endswith("/"):
            candidates = [self.root / rel / "index.html"]
        for cand in candidates:
            try:
                cand.resolve().relative_to(self.root.resolve())
            except ValueError:
                return None
            if cand.is_file():
                return cand
        return None

    def render(self, path: str) -> tuple[bytes, str] | None:
        if path in self.overrides:
            text = self.overrides[path]
        else:
            file = self._file_for(path)
            if file is None:
                return None
            text = file.read_text(encoding="utf-8")
            if file.suffix != ".html":
                return text.encode(), "text/plain; charset=utf-8"
        return text.replace("{{origin}}", self.origin).encode(), "text/html; charset=utf-8"

    def record(self, entry: LoggedRequest) -> None:
        with self._log_lock:
            self._log.append(entry)

    @property
    def requests(self) -> list[LoggedRequest]:
        with self._log_lock:
            return list(self._log)

    def booking_requests(self) -> list[LoggedRequest]:
        return [r for r in self.requests if r.method == "POST" and r.path == "/reserve"]

    def dump_log(self) -> list[dict[str, Any]]:
        return [asdict(r) for r in self.requests]

    def clear_log(self) -> None:
        with self._log_lock:
            self._log.clear()

    def start(self) -> "FixtureServer":
        self._thread.start()
        return self

    def stop(self) -> None:
        self._httpd.shutdown()
        self._httpd.server_close()
        self._thread.join(timeout=5)

    def __enter__(self) -> "FixtureServer":
        return self.start()

    def __exit__(self, *exc) -> None:
        self.stop()


def serve_fixtures(port: int = 0) -> FixtureServer:
    return FixtureServer(port).start()
