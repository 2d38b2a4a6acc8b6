from __future__ import annotations

import json
import logging
import threading
import time
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Any, Callable, Mapping
from urllib.parse import urlencode

import httpx

from ..crawler.fetch import HostThrottle, host_of
from .actions import ActionDescriptor, action_index, allowed_hosts
from .templates import TemplateError, expand_template, template_variables

logger = logging.getLogger("sdgate.gateway")


class ActionError(Exception):
    status = 400
    code = "bad-request"

    def __init__(self, message: str, field: str | None = None):
        super().__init__(message)
        self.message = message
        self.field = field


class UnknownAction(ActionError):
    status, code = 404, "unknown-action"


class InputRejected(ActionError):
    status, code = 422, "invalid-input"


class OriginNotAllowed(ActionError):
    status, code = 403, "origin-not-allowed"


class UpstreamError(ActionError):
    status, code = 502, "upstream-error"


@dataclass(frozen=True)
class OriginRequest:
    method: str
    url: str
    body: bytes | None = None
    content_type: str | None = None


@dataclass(frozen=True)
class RelayedResult:
    action_id: str
    request: OriginRequest
    status: int
    body: bytes
    content_type: str | None


@dataclass(frozen=True)
class ExecutionRecord:
    action_id: str
    inputs: dict[str, Any]
    origin_url: str | None
    origin_status: int | None
    latency_ms: float
    timestamp: float
    outcome: str


class ExecutionLog:
    def __init__(self, path: str | Path | None = None):
        self.path = Path(path) if path is not None else None
        self.records: list[ExecutionRecord] = []
        self._lock = threading.Lock()

    def append(self, record: ExecutionRecord) -> None:
        with self._lock:
            self.records.append(record)
            if self.path is not None:
                self.path.parent.mkdir(parents=True, exist_ok=True)
                with open(self.path, "a", encoding="utf-8") as fh:
                    fh.write(json.dumps(asdict(record), sort_keys=True) + "\n")
                    fh.flush()


def validate_inputs(desc: ActionDescriptor, inputs: Mapping[str, Any]) -> None:
    for name in inputs:
        if name not in desc.inputs:
            raise InputRejected(f"unknown input {name!r} for action {desc.id}", name)
    for name in desc.required:
        value = inputs.get(name)
        if value is None or str(value).strip() == "":
            raise InputRejected(f"missing required input {name!r}", name)
    for name, value in inputs.items():
        if isinstance(value, (dict, list)):
            raise InputRejected(f"input {name!r} must be a scalar", name)
        problem = desc.inputs[name].check(value)
        if problem:
            raise InputRejected(problem, name)


def build_origin_request(desc: ActionDescriptor, inputs: Mapping[str, Any]) -> OriginRequest:
    """The exact request the origin would receive if the client called it directly."""
    in_template = set(template_variables(desc.url_template))
    url = expand_template(desc.url_template, {k: str(v) for k, v in inputs.items() if k in in_template}, desc.required)
    if desc.method == "GET":
        return OriginRequest("GET", url)
    rest = [(name, str(inputs[name])) for name in desc.inputs if name in inputs and name not in in_template]
    if "json" in desc.encoding:
        return OriginRequest("POST", url, json.dumps(dict(rest), sort_keys=True).encode(), "application/json")
    return OriginRequest("POST", url, urlencode(rest).encode(), "application/x-www-form-urlencoded")


class ActionExecutor:
    """Validates and forwards action invocations to their origin."""

    def __init__(
        self,
        snapshot_source: Callable[[], Any],
        *,
        client: httpx.Client | None = None,
        throttle: HostThrottle | None = None,
        log: ExecutionLog | None = None,
        timeout: float = 10.0,
        user_agent: str = "sdgate-gateway/0.1",
    ):
        self.snapshot_source = snapshot_source
        self.client = client or httpx.Client()
        self.throttle = throttle or HostThrottle(0.0)
        self.log = log or ExecutionLog()
        self.timeout = timeout
        self.user_agent = user_agent
        self._index_key: Any = None
        self._index: dict[str, ActionDescriptor] = {}
        self._hosts: set[str] = set()

    def _refresh(self) -> None:
        snapshot = self.snapshot_source()
        key = (id(snapshot), snapshot.sequence)
        if key != self._index_key:
            self._index = action_index(snapshot)
            self._hosts = allowed_hosts(snapshot)
            self._index_key = key

    def descriptor(self, action_id: str) -> ActionDescriptor:
        self._refresh()
        try:
            return self._index[action_id]
        except KeyError:
            raise UnknownAction(f"no action with id {action_id!r}") from None

    def execute(self, action_id: str, inputs: Mapping[str, Any]) -> RelayedResult:
        started = time.perf_counter()
        stamp = time.time()
        request: OriginRequest | None = None

        def record(outcome: str, status: int | None) -> None:
            self.log.append(ExecutionRecord(action_id, dict(inputs), request.url if request else None, status,
                                            round((time.perf_counter() - started) * 1000, 3), stamp, outcome))

        try:
            desc = self.descriptor(action_id)
            validate_inputs(desc, inputs)
            try:
                request = build_origin_request(desc, inputs)
            except TemplateError as exc:
                raise InputRejected(str(exc), getattr(exc, "name", None)) from None
            if host_of(request.url) not in self._hosts:
                raise OriginNotAllowed(f"origin {host_of(request.url)} is not a crawled host")
            self.throttle.wait(host_of(request.url))
            headers = {"User-Agent": self.user_agent}
            if request.content_type:
                headers["Content-Type"] = request.content_type
            try:
                response = self.client.request(request.method, request.url, content=request.body,
                                               headers=headers, timeout=self.timeout)
            except httpx.HTTPError as exc:
                raise UpstreamError(f"origin unreachable: {exc}") from None
        except ActionError as exc:
            record(exc.code, None)
            raise
        record("relayed", response.status_code)
        return RelayedResult(action_id, request, response.status_code, response.content,
                             response.headers.get("content-type"))

    def close(self) -> None:
        self.client.close()
