import json
import threading

import pytest

from conftest import entity
from sdgate.model import SCHEMA, Reference, to_document
from sdgate.store import (
    CorruptStoreError,
    EntityStore,
    NotFoundError,
    find_match,
    load,
    name_key,
    persist,
    subgraph,
)
from sdgate.store.engine import LOG_FILE, SNAPSHOT_FILE

S = SCHEMA.__add__


def hotel(id="https://a.example/#h", t=1.0, **props):
    props = {"name": "Hotel Alpenhof", "telephone": "+43 5285 62460", **props}
    return entity(id, ["Hotel"], props, url=id.split("#")[0], t=t)


def test_name_key():
    assert name_key(hotel(name="  Alpenhof, HOTEL ")) == "alpenhof hotel"
    assert name_key(entity("x", ["Hotel"], {})) == ""


def test_create_then_idempotent_upsert():
    store = EntityStore(None)
    r1 = store.upsert([hotel()])
    assert (r1.created, r1.merged, r1.committed) == (1, 0, True)
    seq = store.snapshot().sequence
    r2 = store.upsert([hotel()])
    assert (r2.created, r2.merged, r2.committed) == (0, 1, False)
    assert store.snapshot().sequence == seq


def test_r2_merge_functional_and_union():
    store = EntityStore(None)
    store.upsert([hotel(t=1.0, description="old", checkinTime="14:00")])
    dup = entity("https://dmo.example/#x", ["LodgingBusiness"],
                 {"name": "alpenhof hotel", "telephone": "+43-5285-62460", "description": "new",
                  "checkinTime": "15:00"}, url="https://dmo.example/", t=2.0)
    report = store.upsert([dup])
    assert report.merged == 1 and report.aliases_added == 1
    assert report.properties_overwritten == 3  # name, telephone, checkinTime
    snap = store.snapshot()
    assert list(snap.entities) == ["https://a.example/#h"]
    merged = snap.entities["https://a.example/#h"]
    assert merged.types == (S("Hotel"), S("LodgingBusiness"))
    assert merged.literals(S("checkinTime")) == ["15:00"]  # functional: newest wins
    assert merged.literals(S("description")) == ["old", "new"]  # union
    assert merged.literals(S("name")) == ["alpenhof hotel"]
    assert [p.fetched_at for p in merged.provenance] == [1.0, 2.0]
    assert snap.resolve("https://dmo.example/#x") == "https://a.example/#h"


def test_older_record_does_not_overwrite_functional():
    store = EntityStore(None)
    store.upsert([hotel(t=5.0, checkinTime="15:00")])
    store.upsert([hotel(t=1.0, checkinTime="12:00")])
    assert store.snapshot().entities["https://a.example/#h"].literals(S("checkinTime")) == ["15:00"]


@pytest.mark.parametrize("other, merges", [
    ({"types": ["Event"]}, False),
    ({"name": "Hotel Edelweiss"}, False),
    ({"telephone": "+43 1 1111"}, False),
    ({"types": ["Place"]}, True),
    ({"types": []}, False),
])
def test_r2_requires_every_ingredient(other, merges):
    store = EntityStore(None)
    store.upsert([hotel()])
    props = {"name": other.get("name", "Hotel Alpenhof"), "telephone": other.get("telephone", "+43 5285 62460")}
    store.upsert([entity("https://b.example/#x", other.get("types", ["Hotel"]), props, url="https://b.example/")])
    assert (len(store.snapshot()) == 1) is merges


def test_address_corroboration_through_batch_reference():
    store = EntityStore(None)
    addr_a = entity("https://a.example/#addr", ["PostalAddress"], {"streetAddress": "Dorf 1", "addressLocality": "Mayrhofen"})
    store.upsert([entity("https://a.example/#h", ["Hotel"], {"name": "Sonne", "address": {"@id": addr_a.id}}), addr_a])
    addr_b = entity("https://b.example/#addr", ["PostalAddress"], {"streetAddress": "DORF  1", "addressLocality": "mayrhofen"})
    incoming = entity("https://b.example/#h", ["Hotel"], {"name": "sonne", "address": {"@id": addr_b.id}})
    assert find_match(incoming, store.snapshot(), store.registry,
                      lookup=lambda i: {addr_b.id: addr_b}.get(i) or store.snapshot().get(i)) == "https://a.example/#h"
    store.upsert([incoming, addr_b])
    assert store.snapshot().resolve("https://b.example/#h") == "https://a.example/#h"


def test_references_follow_aliases_and_dangling_flag():
    store = EntityStore(None)
    store.upsert([hotel()])
    event = entity("https://fest.example/#e", ["Event"], {"name": "Fest", "location": {"@id": "https://dmo.example/#x"},
                                                          "organizer": {"@id": "https://nowhere.example/#o"}})
    dup = entity("https://dmo.example/#x", ["Hotel"], {"name": "Hotel Alpenhof", "telephone": "+43 5285 62460"})
    store.upsert([event, dup])
    ev = store.snapshot().entities["https://fest.example/#e"]
    assert ev.get(S("location")) == (Reference("https://a.example/#h"),)
    (org,) = ev.get(S("organizer"))
    assert org.dangling
    store.upsert([entity("https://nowhere.example/#o", ["Organization"], {"name": "Verein"})])
    (org,) = store.snapshot().entities["https://fest.example/#e"].get(S("organizer"))
    assert not org.dangling


def test_surrogates_are_globalized_and_stable():
    store = EntityStore(None)
    batch = [entity("_:jsonld-0", ["Hotel"], {"name": "X", "address": {"@id": "_:jsonld-1"}}),
             entity("_:jsonld-1", ["PostalAddress"], {"streetAddress": "S"})]
    store.upsert(batch)
    ids = sorted(store.snapshot().entities)
    assert all(i.startswith("_:g") for i in ids)
    assert store.upsert(batch).committed is False


def test_persistence_reopen_and_round_trip(tmp_path):
    store = EntityStore(tmp_path / "s")
    store.upsert([hotel()])
    store.upsert([entity("https://b.example/#e", ["Event"], {"name": "E"})])
    reopened = EntityStore(tmp_path / "s").snapshot()
    assert reopened == store.snapshot()
    persist(reopened, tmp_path / "copy")
    assert load(tmp_path / "copy") == reopened
    assert (tmp_path / "copy" / LOG_FILE).read_text() == ""


def test_torn_tail_is_ignored_then_truncated(tmp_path):
    store = EntityStore(tmp_path)
    store.upsert([hotel()])
    before = load(tmp_path)
    store.upsert([entity("https://b.example/#e", ["Event"], {"name": "E"})])
    log = tmp_path / LOG_FILE
    data = log.read_bytes()
    last = data.rstrip(b"\n").rsplit(b"\n", 1)[-1]
    log.write_bytes(data[: len(data) - 1 - len(last) // 2])  # cut the final record mid-line
    assert load(tmp_path) == before
    fresh = EntityStore(tmp_path)
    fresh.upsert([entity("https://c.example/#e", ["Event"], {"name": "C"})])
    assert set(load(tmp_path).entities) == {"https://a.example/#h", "https://c.example/#e"}


def test_corruption_is_detected(tmp_path):
    store = EntityStore(tmp_path)
    store.upsert([hotel()])
    store.compact()
    snap = json.loads((tmp_path / SNAPSHOT_FILE).read_text())
    snap["sequence"] += 1
    (tmp_path / SNAPSHOT_FILE).write_text(json.dumps(snap))
    with pytest.raises(CorruptStoreError):
        load(tmp_path)


def test_log_sequence_gap_is_detected(tmp_path):
    store = EntityStore(tmp_path)
    store.upsert([hotel()])
    store.upsert([entity("https://b.example/#e", ["Event"], {"name": "E"})])
    lines = (tmp_path / LOG_FILE).read_text().splitlines(keepends=True)
    (tmp_path / LOG_FILE).write_text(lines[1])
    with pytest.raises(CorruptStoreError):
        load(tmp_path)


def test_compaction(tmp_path):
    store = EntityStore(tmp_path, compact_every=2)
    for i in range(3):
        store.upsert([entity(f"https://e.example/{i}", ["Event"], {"name": f"E{i}"})])
    assert (tmp_path / SNAPSHOT_FILE).exists()
    assert len((tmp_path / LOG_FILE).read_text().splitlines()) == 1
    assert len(load(tmp_path)) == 3


def test_second_instance_sees_commits(tmp_path):
    writer, reader = EntityStore(tmp_path), EntityStore(tmp_path)
    writer.upsert([hotel()])
    assert len(reader.snapshot()) == 0
    assert len(reader.refresh()) == 1


def test_concurrent_writers_lose_nothing(tmp_path):
    stores = [EntityStore(tmp_path) for _ in range(4)]

    def work(k):
        for i in range(10):
            stores[k].upsert([entity(f"https://e.example/{k}/{i}", ["Event"], {"name": f"E{k}-{i}"})])

    threads = [threading.Thread(target=work, args=(k,)) for k in range(4)]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    snap = load(tmp_path)
    assert len(snap) == 40 and snap.sequence == 40


def test_subgraph():
    store = EntityStore(None)
    addr = entity("https://a.example/#addr", ["PostalAddress"], {"streetAddress": "S"})
    h = entity("https://a.example/#h", ["Hotel"], {"name": "H", "address": {"@id": addr.id}})
    ev = entity("https://a.example/#e", ["Event"], {"name": "E", "location": {"@id": h.id}})
    store.upsert([addr, h, ev])
    assert [e.id for e in store.subgraph(ev.id, 0)] == [ev.id]
    assert [e.id for e in store.subgraph(ev.id, 1)] == [ev.id, h.id]
    assert [e.id for e in store.subgraph(ev.id, 5)] == [ev.id, h.id, addr.id]
    with pytest.raises(NotFoundError):
        subgraph(store.snapshot(), "https://missing", 1)


def test_documents_are_json_serializable():
    store = EntityStore(None)
    store.upsert([hotel()])
    for ent in store.snapshot().entities.values():
        json.dumps(to_document(ent))
