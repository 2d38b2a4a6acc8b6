import json

import pytest

from sdgate.extraction import extract_page
from sdgate.gateway import (
    InputRejected,
    build_origin_request,
    describe_api,
    discover_actions,
    template_variables,
)
from sdgate.gateway.actions import action_index, allowed_hosts, parse_input_annotation, render_nested, rewrite_for_client
from sdgate.gateway.app import SEARCH_PARAMETERS
from sdgate.gateway.execute import validate_inputs
from sdgate.model import SCHEMA
from sdgate.store import EntityStore

S = SCHEMA.__add__
ORIGIN = "https://alpenhof.example"


def ingest(html, url=ORIGIN + "/"):
    store = EntityStore(None)
    ents, _ = extract_page(html, url, fetched_at=1.0)
    store.upsert(ents)
    return store.snapshot()


def ld(doc):
    return f'<script type="application/ld+json">{json.dumps(doc)}</script>'


def owner(snapshot, type_="Hotel"):
    return next(e for e in snapshot.entities.values() if S(type_) in e.types)


RESERVE = {
    "@context": "https://schema.org", "@type": "Hotel", "@id": "#hotel", "name": "Alpenhof",
    "potentialAction": {
        "@type": "ReserveAction",
        "target": {"@type": "EntryPoint", "urlTemplate": ORIGIN + "/reserve?hotel=a{&room,from,to}",
                   "httpMethod": "POST"},
        "object-input": "required name=room",
        "startTime-input": "required name=from",
        "endTime-input": "name=to",
        "result": {"@type": "LodgingReservation"},
    },
}


@pytest.mark.parametrize("text, expected", [
    ("required name=room", (True, "room")),
    ("name=q", (False, "q")),
    ("required", (True, None)),
    ("  name=x  required ", (True, "x")),
])
def test_parse_input_annotation(text, expected):
    assert parse_input_annotation(text) == expected


def test_discover_textual_inputs():
    snap = ingest(ld(RESERVE))
    (desc,) = discover_actions(owner(snap), snap)
    assert desc.action_type == S("ReserveAction") and desc.method == "POST"
    assert list(desc.inputs) == ["to", "room", "from"]  # sorted by property key
    assert desc.required == ["room", "from"]
    assert desc.inputs["from"].value_type == "date" and desc.inputs["room"].value_type == "text"
    assert not desc.inputs["to"].required
    assert desc.host == "alpenhof.example"


def test_discover_property_value_specification_inputs():
    doc = json.loads(json.dumps(RESERVE))
    doc["potentialAction"]["object-input"] = {"@type": "PropertyValueSpecification", "valueRequired": True,
                                              "valueName": "room"}
    snap = ingest(ld(doc))
    (desc,) = discover_actions(owner(snap), snap)
    assert desc.inputs["room"].required


def test_textual_target_and_invalid_ones():
    doc = {"@context": "https://schema.org", "@type": "WebSite", "name": "s",
           "potentialAction": [
               {"@type": "SearchAction", "target": ORIGIN + "/find?q={q}", "query-input": "required name=q"},
               {"@type": "SearchAction", "target": "relative/{q}"},
               {"@type": "Action", "target": {"@type": "EntryPoint", "urlTemplate": ORIGIN + "/{+x}"}},
               {"@type": "Action", "target": {"@type": "EntryPoint", "urlTemplate": ORIGIN + "/d", "httpMethod": "DELETE"}},
               {"@type": "Action", "name": "no target"},
           ]}
    snap = ingest(ld(doc))
    diagnostics = []
    descs = discover_actions(owner(snap, "WebSite"), snap, diagnostics)
    assert [d.url_template for d in descs] == [ORIGIN + "/find?q={q}"]
    assert descs[0].method == "GET" and descs[0].required == ["q"]
    assert len(diagnostics) == 4


def test_action_ids_are_stable_and_indexed():
    a, b = ingest(ld(RESERVE)), ingest(ld(RESERVE))
    assert list(action_index(a)) == list(action_index(b))
    assert allowed_hosts(a) == {"alpenhof.example"}


def test_build_origin_request_post_form_and_json():
    snap = ingest(ld(RESERVE))
    (desc,) = discover_actions(owner(snap), snap)
    req = build_origin_request(desc, {"room": "double bed", "from": "2025-07-18"})
    assert req.url == ORIGIN + "/reserve?hotel=a&room=double%20bed&from=2025-07-18"
    assert req.method == "POST" and req.body == b""
    doc = json.loads(json.dumps(RESERVE))
    doc["potentialAction"]["target"]["urlTemplate"] = ORIGIN + "/reserve"
    doc["potentialAction"]["target"]["encodingType"] = "application/json"
    snap = ingest(ld(doc))
    (desc,) = discover_actions(owner(snap), snap)
    req = build_origin_request(desc, {"room": "d", "from": "2025-07-18"})
    assert req.url == ORIGIN + "/reserve" and req.content_type == "application/json"
    assert json.loads(req.body) == {"room": "d", "from": "2025-07-18"}


def test_build_origin_request_form_body_in_input_order():
    doc = json.loads(json.dumps(RESERVE))
    doc["potentialAction"]["target"]["urlTemplate"] = ORIGIN + "/reserve?hotel=a"
    snap = ingest(ld(doc))
    (desc,) = discover_actions(owner(snap), snap)
    req = build_origin_request(desc, {"to": "2025-07-20", "room": "a&b", "from": "2025-07-18"})
    assert req.body == b"to=2025-07-20&room=a%26b&from=2025-07-18"


@pytest.mark.parametrize("inputs, field", [
    ({"room": "d"}, "from"),
    ({"room": "d", "from": "tomorrow"}, "from"),
    ({"room": "d", "from": "2025-07-18", "pets": "2"}, "pets"),
    ({"room": ["a"], "from": "2025-07-18"}, "room"),
    ({"room": "  ", "from": "2025-07-18"}, "room"),
])
def test_validate_inputs(inputs, field):
    snap = ingest(ld(RESERVE))
    (desc,) = discover_actions(owner(snap), snap)
    with pytest.raises(InputRejected) as exc:
        validate_inputs(desc, inputs)
    assert exc.value.field == field


def test_render_nested_and_rewrite_modes():
    snap = ingest(ld(RESERVE))
    hotel = owner(snap)
    nested = render_nested(hotel.id, snap, 2)
    assert nested["potentialAction"]["target"]["urlTemplate"].startswith(ORIGIN)
    proxied = rewrite_for_client(nested, snap, "proxy", "https://gw.example/api")
    (aid,) = action_index(snap)
    target = proxied["potentialAction"]["target"]
    assert target["urlTemplate"] == f"https://gw.example/api/actions/{aid}/execute"
    assert target["httpMethod"] == "POST"
    passed = rewrite_for_client(nested, snap, "passthrough", "https://gw.example/api")
    assert passed["potentialAction"]["target"]["urlTemplate"] == ORIGIN + "/reserve?hotel=a{&room,from,to}"
    shallow = render_nested(hotel.id, snap, 0)
    assert set(shallow["potentialAction"]) == {"@id"}


def test_describe_document_round_trips_through_extractor():
    doc = describe_api("https://gw.example/api")
    snap = ingest(ld(doc), "https://gw.example/api/describe")
    api = owner(snap, "WebAPI")
    descs = {d.action_type: d for d in discover_actions(api, snap)}
    search = descs[S("SearchAction")]
    assert template_variables(search.url_template) == list(SEARCH_PARAMETERS)
    assert search.method == "GET"
    execute = descs[S("Action")]
    assert template_variables(execute.url_template) == ["actionId"] and execute.required == ["actionId"]
