import json
from urllib.parse import quote, urlsplit

import pytest
from starlette.testclient import TestClient

from conftest import crawl_site, entity
from sdgate.gateway import ActionExecutor, ExecutionLog, GatewaySettings, build_origin_request, create_app
from sdgate.gateway.app import JSONLD, parse_search_query
from sdgate.model import SCHEMA
from sdgate.retrieval import QueryRejected, QuerySpec, query

S = SCHEMA.__add__
GW = "http://gw.test"
INPUTS = {"room": "double", "from": "2025-07-18", "to": "2025-07-20"}


@pytest.fixture
def gateway(site, tmp_path):
    store, _ = crawl_site(site, tmp_path)
    log = ExecutionLog(tmp_path / "executions.jsonl")
    executor = ActionExecutor(store.refresh, log=log)

    def make(mode="proxy"):
        app = create_app(store.refresh, GatewaySettings(mode=mode), executor=executor)
        return TestClient(app, base_url=GW)

    yield make, store, site, executor, log
    executor.close()


def lodging(client):
    return client.get("/api/search", params={"type": "LodgingBusiness"}).json()["itemListElement"]


def reserve_target(item):
    actions = item["potentialAction"]
    actions = actions if isinstance(actions, list) else [actions]
    (reserve,) = [a for a in actions if "ReserveAction" in a["@type"]]
    return reserve["target"]


def test_describe(gateway):
    make, *_ = gateway
    r = make().get("/api/describe")
    assert r.status_code == 200 and r.headers["content-type"].startswith(JSONLD)
    doc = r.json()
    templates = [a["target"]["urlTemplate"] for a in doc["potentialAction"]]
    assert templates == [GW + "/api/search{?type,q,where,limit,offset,threshold}",
                         GW + "/api/actions/{actionId}/execute"]


def test_search_ranks_and_rewrites_in_proxy_mode(gateway):
    make, *_ = gateway
    items = lodging(make())
    assert [i["position"] for i in items] == [1, 2, 3]
    assert [i["urn:sdgate:score"] for i in items] == [0.96, 0.95, 0.94]
    assert items[0]["urn:sdgate:components"] == {"type": 1.0, "constraints": 1.0, "text": 1.0, "completeness": 0.6}
    for item in items:
        target = reserve_target(item["item"])
        assert target["urlTemplate"].startswith(GW + "/api/actions/")
        assert target["httpMethod"] == "POST"
    # nested nodes are inlined up to the subgraph depth
    assert items[0]["item"]["address"]["@type"] == ["PostalAddress"]


def test_search_passthrough_keeps_origin_entry_points(gateway):
    make, _, site, *_ = gateway
    for item in lodging(make("passthrough")):
        assert reserve_target(item["item"])["urlTemplate"].startswith(site.origin + "/reserve?hotel=")


def test_search_matches_library_query(gateway):
    make, store, *_ = gateway
    r = make().get("/api/search", params=[("q", "hotel alpenhof"), ("threshold", "0.3"), ("limit", "4"),
                                          ("where", "telephone:contains:62460")])
    ids = [i["item"]["@id"] for i in r.json()["itemListElement"]]
    spec = QuerySpec(text="hotel alpenhof", threshold=0.3, limit=4,
                     constraints=parse_search_query("where=telephone%3Acontains%3A62460").constraints)
    assert ids == [h.id for h in query(spec, store.snapshot())]


def test_where_list_form_and_repeats():
    a = parse_search_query("where=name:eq:A,price:lt:5&where=startDate:gt:2025-01-01")
    assert [c.comparator for c in a.constraints] == ["equals", "less-than", "greater-than"]
    b = parse_search_query("where=name%3Aeq%3AA%2CB")
    assert b.constraints[0].value == "A,B"


@pytest.mark.parametrize("qs, field", [
    ("color=red", None),
    ("limit=1&limit=2", None),
    ("limit=ten", None),
    ("limit=0", None),
    ("threshold=1.5", None),
    ("threshold=nan", None),
    ("where=price:lt:cheap", S("price")),
    ("where=nonsense", None),
    ("type=", None),
])
def test_search_rejects_bad_queries(gateway, qs, field):
    make, *_ = gateway
    r = make().get("/api/search?" + qs)
    if qs == "type=":
        assert r.status_code == 200  # empty type means no type filter
        return
    assert r.status_code == 400
    body = r.json()
    assert body["code"] == "bad-query" and body.get("field") == field


def test_entity_lookup(gateway):
    make, store, site, *_ = gateway
    client = make()
    hotel_id = site.origin + "/hotels/edelweiss#hotel"
    assert hotel_id in store.snapshot().entities
    r = client.get("/api/entities/" + quote(hotel_id, safe=""))
    assert r.status_code == 200 and r.json()["@id"] == hotel_id
    missing = client.get("/api/entities/" + quote("https://nope.example/#x", safe=""))
    assert missing.status_code == 404 and missing.json()["code"] == "not-found"


def test_execute_relays_origin_result(gateway):
    make, _, site, executor, log = gateway
    client = make()
    url = reserve_target(lodging(client)[0]["item"])["urlTemplate"]
    aid = urlsplit(url).path.split("/")[-2]
    r = client.post(urlsplit(url).path, json={**INPUTS, "@context": "https://schema.org"})
    assert r.status_code == 200
    envelope = r.json()
    assert envelope["@type"] == "ActionRelay" and envelope["originStatus"] == 200
    confirmation = json.loads(envelope["originBody"])
    assert confirmation["reservationStatus"] == "https://schema.org/ReservationConfirmed"
    (sent,) = site.booking_requests()
    expected = build_origin_request(executor.descriptor(aid), INPUTS)
    assert (sent.method, site.origin + sent.url_path, sent.body.encode()) == (expected.method, expected.url, expected.body)
    (record,) = [json.loads(line) for line in log.path.read_text().splitlines()]
    assert record["outcome"] == "relayed" and record["origin_status"] == 200 and record["action_id"] == aid


@pytest.mark.parametrize("body, status, code", [
    ({"room": "double"}, 422, "invalid-input"),
    ({"room": "double", "from": "soon"}, 422, "invalid-input"),
    ({"room": "double", "from": "2025-07-18", "breakfast": "yes"}, 422, "invalid-input"),
    ("not json", 400, "bad-request"),
    (["room"], 400, "bad-request"),
])
def test_execute_rejections_never_reach_origin(gateway, body, status, code):
    make, _, site, *_ = gateway
    client = make()
    path = urlsplit(reserve_target(lodging(client)[0]["item"])["urlTemplate"]).path
    if isinstance(body, str):
        r = client.post(path, content=body)
    else:
        r = client.post(path, json=body)
    assert r.status_code == status and r.json()["code"] == code
    assert site.booking_requests() == []


def test_execute_unknown_action(gateway):
    make, *_ = gateway
    r = make().post("/api/actions/0000000000000000/execute", json={})
    assert r.status_code == 404 and r.json()["code"] == "unknown-action"


def _action_entity(template, page):
    return entity(page + "#svc", ["Hotel"], {
        "name": "Elsewhere",
        "potentialAction": {"@id": page + "#act"},
    }, url=page), entity(page + "#act", ["ReserveAction"], {"target": template}, url=page)


def test_execute_origin_not_allowed(gateway):
    make, store, site, *_ = gateway
    store.upsert(list(_action_entity("http://evil.example/book", site.url("/extra"))))
    client = make()
    r = client.get("/api/search", params={"q": "elsewhere", "threshold": "0.5"})
    path = urlsplit(reserve_target(r.json()["itemListElement"][0]["item"])["urlTemplate"]).path
    r = client.post(path, json={})
    assert r.status_code == 403 and r.json()["code"] == "origin-not-allowed"


def test_execute_upstream_unreachable(gateway):
    make, store, *_ = gateway
    dead = "http://127.0.0.1:9"
    store.upsert(list(_action_entity(dead + "/book", dead + "/page")))
    client = make()
    r = client.get("/api/search", params={"q": "elsewhere", "threshold": "0.5"})
    path = urlsplit(reserve_target(r.json()["itemListElement"][0]["item"])["urlTemplate"]).path
    r = client.post(path, json={})
    assert r.status_code == 502 and r.json()["code"] == "upstream-error"


def test_parse_search_query_defaults():
    spec = parse_search_query("", 0.5)
    assert spec == QuerySpec(threshold=0.5)
    with pytest.raises(QueryRejected):
        parse_search_query("offset=-2")
