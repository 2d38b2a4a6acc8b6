"""Scripted end-to-end scenario: crawl, search, reserve through the gateway."""

from __future__ import annotations

import json
import tempfile
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any
from urllib.parse import urlsplit

import httpx

from ..crawler import CrawlSettings, CrawlState, HostThrottle, PolitenessPolicy, SourceRecord, run_crawl
from ..gateway import (
    ActionExecutor,
    ExecutionLog,
    GatewayServer,
    GatewaySettings,
    build_origin_request,
    create_app,
    expand_template,
    template_variables,
)
from ..store import EntityStore
from .server import FixtureServer

DEFAULT_INPUTS = {"room": "double", "from": "2025-07-18", "to": "2025-07-20"}


class StepFailed(AssertionError):
    def __init__(self, step: str, detail: str):
        super().__init__(f"{step}: {detail}")
        self.step = step
        self.detail = detail


@dataclass
class Verdict:
    mode: str
    passed: bool = False
    failed_step: str | None = None
    detail: str = ""
    steps: list[str] = field(default_factory=list)
    origin_requests: int = 0
    duration: float = 0.0
    relayed: dict[str, Any] | None = None

    def summary(self) -> str:
        state = "PASS" if self.passed else f"FAIL at {self.failed_step}: {self.detail}"
        return f"e2e[{self.mode}] {state} ({self.origin_requests} origin booking request(s), {self.duration:.2f}s)"


def _check(step: str, condition: bool, detail: str) -> None:
    if not condition:
        raise StepFailed(step, detail)


def _as_list(value: Any) -> list:
    return value if isinstance(value, list) else [value]


def run_e2e(
    mode: str = "proxy",
    inputs: dict[str, str] | None = None,
    *,
    data_dir: str | Path | None = None,
    delay: float = 0.05,
) -> Verdict:
    """Crawl the fixture site, search for lodging and reserve the top hit.

    Every step raises :class:`StepFailed` internally; the verdict names the
    first failing step.  Runs on loopback only.
    """
    inputs = dict(DEFAULT_INPUTS if inputs is None else inputs)
    verdict = Verdict(mode)
    started = time.perf_counter()
    with tempfile.TemporaryDirectory() as tmp, FixtureServer() as site:
        data = Path(data_dir) if data_dir is not None else Path(tmp)
        try:
            _scenario(site, data, mode, inputs, delay, verdict)
            verdict.passed = True
        except StepFailed as exc:
            verdict.failed_step, verdict.detail = exc.step, exc.detail
        verdict.origin_requests = len(site.booking_requests())
    verdict.duration = time.perf_counter() - started
    return verdict


def _scenario(site: FixtureServer, data: Path, mode: str, inputs: dict[str, str], delay: float, verdict: Verdict) -> None:
    store = EntityStore(data / "store")
    policy = PolitenessPolicy(delay=delay)
    report = run_crawl([SourceRecord(site.url("/"), "static")], store, CrawlState(data / "crawl_state.json"),
                       CrawlSettings(policy=policy))
    _check("crawl", report.fetched == 6 and report.errored == 0,
           f"expected 6 fetched pages without errors, got {report.fetched} fetched / {report.errored} errors")
    verdict.steps.append("crawl")

    executor = ActionExecutor(store.refresh, throttle=HostThrottle(delay), log=ExecutionLog(data / "executions.jsonl"))
    app = create_app(store.refresh, GatewaySettings(mode=mode), executor=executor)
    with GatewayServer(app) as gateway, httpx.Client(timeout=10) as client:
        response = client.get(f"{gateway.url}/api/search", params={"type": "LodgingBusiness"})
        _check("search", response.status_code == 200, f"status {response.status_code}")
        items = response.json()["itemListElement"]
        _check("search", len(items) == 3, f"expected 3 lodging results, got {len(items)}")
        verdict.steps.append("search")

        hotel = items[0]["item"]
        actions = [a for a in _as_list(hotel.get("potentialAction", [])) if isinstance(a, dict)]
        reserve = next((a for a in actions if "ReserveAction" in _as_list(a.get("@type"))), None)
        _check("discover", reserve is not None, "top result carries no ReserveAction")
        target = _as_list(reserve["target"])[0]
        template = target["urlTemplate"]
        verdict.steps.append("discover")

        if mode == "proxy":
            _check("discover", template.startswith(gateway.url), f"target {template} is not a gateway URL")
            action_id = urlsplit(template).path.split("/")[-2]
            result = client.post(expand_template(template, {}), json=inputs)
            _check("execute", result.status_code == 200, f"gateway answered {result.status_code}: {result.text[:200]}")
            envelope = result.json()
            verdict.relayed = envelope
            confirmation = json.loads(envelope["originBody"])
            _check("execute", confirmation.get("reservationStatus", "").endswith("ReservationConfirmed"),
                   "origin did not confirm the reservation")
            verdict.steps.append("execute")

            booked = site.booking_requests()
            _check("fidelity", len(booked) == 1, f"expected 1 origin booking request, saw {len(booked)}")
            expected = build_origin_request(executor.descriptor(action_id), inputs)
            sent = booked[0]
            _check("fidelity", sent.method == expected.method, f"method {sent.method} != {expected.method}")
            _check("fidelity", site.origin + sent.url_path == expected.url, f"URL {sent.url_path} != {expected.url}")
            _check("fidelity", sent.body.encode() == (expected.body or b""), f"body {sent.body!r} != {expected.body!r}")
            verdict.steps.append("fidelity")
        else:
            _check("discover", template.startswith(site.origin), f"target {template} is not the origin entry point")
            names = set(template_variables(template))
            url = expand_template(template, {k: v for k, v in inputs.items() if k in names})
            rest = {k: v for k, v in inputs.items() if k not in names}
            method = target.get("httpMethod", "GET").upper()
            result = client.request(method, url, data=rest or None)
            _check("execute", result.status_code == 200, f"origin answered {result.status_code}")
            verdict.relayed = result.json()
            verdict.steps.append("execute")
