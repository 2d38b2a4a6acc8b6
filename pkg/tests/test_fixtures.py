import json
import re
from collections import Counter

import httpx
import pytest

from sdgate.fixtures import (
    ACTIONS,
    CANONICAL_ENTITIES,
    CRAWLABLE_PAGES,
    EXTRACTED_ENTITIES,
    LODGING_RESULTS,
    TYPE_HISTOGRAM,
    equivalence_pages,
    run_e2e,
)
from sdgate.gateway.actions import action_index
from sdgate.model import SCHEMA, compact_iri
from sdgate.retrieval import QuerySpec, query


def test_corpus_constants(crawled):
    _, store, report = crawled
    snap = store.snapshot()
    assert report.fetched == CRAWLABLE_PAGES
    assert report.entities_extracted == EXTRACTED_ENTITIES
    assert len(snap) == CANONICAL_ENTITIES
    histogram = Counter(compact_iri(t) if t else None for e in snap.entities.values() for t in e.types or (None,))
    assert dict(histogram) == TYPE_HISTOGRAM
    assert len(action_index(snap)) == ACTIONS
    assert len(query(QuerySpec(SCHEMA + "LodgingBusiness"), snap)) == LODGING_RESULTS


def test_all_three_syntaxes_are_represented(crawled):
    _, store, _ = crawled
    syntaxes = {p.syntax for e in store.snapshot().entities.values() for p in e.provenance}
    assert syntaxes == {"jsonld", "microdata", "rdfa-lite"}


def test_equivalence_pages_layout():
    pages = equivalence_pages()
    assert len(pages) == 3
    assert all(set(by_syntax) == {"jsonld", "microdata", "rdfa-lite"} for by_syntax in pages.values())


def test_static_pages(site):
    r = httpx.get(site.url("/hotels/alpenhof"))
    assert r.status_code == 200 and r.headers["content-type"].startswith("text/html")
    assert len(re.findall(r'<script type="application/ld\+json">', r.text)) == 1
    assert "{{origin}}" not in r.text and site.origin + "/hotels/alpenhof#hotel" in r.text
    again = httpx.get(site.url("/hotels/alpenhof"), headers={"If-None-Match": r.headers["etag"]})
    assert again.status_code == 304 and again.content == b""
    assert httpx.get(site.url("/robots.txt")).text.startswith("User-agent: *")
    assert httpx.get(site.url("/nope")).status_code == 404
    assert httpx.get(site.url("/../pyproject.toml")).status_code == 404


def test_booking_endpoint(site):
    ok = httpx.post(site.url("/reserve?hotel=alpenhof"), data={"room": "double", "from": "2025-07-18"})
    assert ok.status_code == 200
    doc = ok.json()
    assert doc["@type"] == "LodgingReservation"
    assert doc["reservationStatus"] == "https://schema.org/ReservationConfirmed"
    assert doc["reservationFor"]["identifier"] == "alpenhof" and doc["reservationId"].startswith("R-")
    as_json = httpx.post(site.url("/reserve?hotel=alpenhof"), json={"room": "double", "from": "2025-07-18"})
    assert as_json.json()["reservationId"] == doc["reservationId"]
    bad = httpx.post(site.url("/reserve?hotel=alpenhof"), data={"from": "2025-07-18"})
    assert bad.status_code == 422
    assert bad.json()["reservationStatus"] == "https://schema.org/ReservationCancelled"
    assert "room" in bad.json()["disambiguatingDescription"]
    log = site.dump_log()
    assert [(r["method"], r["status"]) for r in log] == [("POST", 200), ("POST", 200), ("POST", 422)]
    assert log[0]["body"] == "room=double&from=2025-07-18" and log[0]["query"] == "hotel=alpenhof"
    json.dumps(log)


def test_e2e_proxy():
    verdict = run_e2e("proxy")
    assert verdict.passed, verdict.summary()
    assert verdict.steps == ["crawl", "search", "discover", "execute", "fidelity"]
    assert verdict.origin_requests == 1
    assert verdict.relayed["originStatus"] == 200


def test_e2e_passthrough():
    verdict = run_e2e("passthrough")
    assert verdict.passed, verdict.summary()
    assert verdict.origin_requests == 1
    assert verdict.relayed["reservationStatus"].endswith("ReservationConfirmed")


@pytest.mark.parametrize("inputs", [{"room": "double"}, {"from": "2025-07-18"}])
def test_e2e_invalid_inputs_never_reach_origin(inputs):
    verdict = run_e2e("proxy", inputs)
    assert not verdict.passed and verdict.failed_step == "execute"
    assert "422" in verdict.detail and verdict.origin_requests == 0
