import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import entity, prov
from sdgate.model import (
    SCHEMA,
    Context,
    EntityDocument,
    IRIResolutionError,
    Literal,
    ProvenanceRecord,
    Reference,
    Structured,
    canonicalize_iri,
    from_document,
    global_surrogate,
    is_local_surrogate,
    map_references,
    to_document,
)


@pytest.mark.parametrize(
    "term, expected",
    [
        ("Hotel", SCHEMA + "Hotel"),
        ("http://schema.org/Hotel", SCHEMA + "Hotel"),
        ("https://schema.org/Hotel", SCHEMA + "Hotel"),
        ("schema:Hotel", SCHEMA + "Hotel"),
        ("  name ", SCHEMA + "name"),
        ("http://ogp.me/ns#title", "http://ogp.me/ns#title"),
    ],
)
def test_canonicalize_default_context(term, expected):
    ctx = Context(prefixes={"schema": "http://schema.org/"})
    assert canonicalize_iri(term, ctx) == expected


def test_prefix_binding_and_no_vocab():
    ctx = Context(vocab=None, prefixes={"og": "http://ogp.me/ns#"})
    assert canonicalize_iri("og:title", ctx) == "http://ogp.me/ns#title"
    with pytest.raises(IRIResolutionError):
        canonicalize_iri("title", ctx)
    with pytest.raises(IRIResolutionError):
        canonicalize_iri("   ")


def test_entity_invariants():
    with pytest.raises(ValueError):
        EntityDocument("", (), {}, (prov(),))
    with pytest.raises(ValueError):
        EntityDocument("x", (), {"name": (Literal("a"),)}, (prov(),))
    with pytest.raises(ValueError):
        EntityDocument("x", (), {SCHEMA + "name": ()}, (prov(),))
    with pytest.raises(ValueError):
        EntityDocument("x", (), {}, ())
    with pytest.raises(ValueError):
        EntityDocument("x", (), {}, (prov(t=2.0), prov(t=1.0)))
    with pytest.raises(ValueError):
        ProvenanceRecord(1.0, "u", "turtle", "h")
    with pytest.raises(ValueError):
        ProvenanceRecord(0.0, "u", "jsonld", "h")


def test_document_round_trip_all_value_kinds():
    ent = EntityDocument(
        "https://example.org/#h",
        (SCHEMA + "Hotel", "http://example.org/ns#Lodge"),
        {
            SCHEMA + "name": (Literal("Alpenhof"), Literal("Alpenhof", language="de")),
            SCHEMA + "price": (Literal("12.5", datatype=SCHEMA + "Number"),),
            SCHEMA + "address": (Reference("_:g0011"),),
            SCHEMA + "geo": (Structured.from_mapping({SCHEMA + "latitude": [Literal("47.1")]}),),
        },
        (prov(t=1.0), prov(url="https://example.org/b", t=2.0)),
    )
    doc = to_document(ent)
    assert doc["@type"] == ["Hotel", "http://example.org/ns#Lodge"]
    assert from_document(doc) == ent


def test_numbers_must_be_text():
    with pytest.raises(ValueError):
        from_document({"@id": "x", "price": 12, "urn:sdgate:provenance": [
            {"url": "u", "fetchedAt": 1, "syntax": "jsonld", "contentHash": "h"}]})


def test_surrogates():
    p = prov()
    g = global_surrogate("_:jsonld-0", p)
    assert g.startswith("_:g") and not is_local_surrogate(g)
    assert is_local_surrogate("_:jsonld-0")
    assert g == global_surrogate("_:jsonld-0", p)
    assert g != global_surrogate("_:jsonld-0", prov(digest="other"))


def test_map_references_reaches_structured_values():
    values = (Reference("a"), Structured.from_mapping({SCHEMA + "x": [Reference("a"), Literal("a")]}))
    out = map_references(values, lambda r: Reference(r.target.upper()))
    assert out[0] == Reference("A")
    assert out[1].get(SCHEMA + "x") == (Reference("A"), Literal("a"))


texts = st.text(alphabet=st.characters(blacklist_categories=("Cs",)), max_size=20)


@given(
    st.dictionaries(st.sampled_from(["name", "description", "url", "telephone"]),
                    st.lists(texts, min_size=1, max_size=3), max_size=4),
    st.lists(st.sampled_from(["Hotel", "Place", "Event"]), unique=True, max_size=3),
)
def test_round_trip_property(props, types):
    ent = entity("https://example.org/e", types, props)
    assert from_document(to_document(ent)) == ent
