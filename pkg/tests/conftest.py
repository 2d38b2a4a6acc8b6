from __future__ import annotations

import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from sdgate.crawler import CrawlSettings, CrawlState, PolitenessPolicy, SourceRecord, run_crawl  # noqa: E402
from sdgate.fixtures.server import FixtureServer  # noqa: E402
from sdgate.model import EntityDocument, Literal, ProvenanceRecord, Reference, schema  # noqa: E402
from sdgate.store import EntityStore  # noqa: E402

FAST = PolitenessPolicy(delay=0.0)


def prov(url="https://example.org/page", t=1.0, syntax="jsonld", digest="h"):
    return ProvenanceRecord(t, url, syntax, digest)


def entity(id, types=(), props=None, *, url="https://example.org/page", t=1.0, syntax="jsonld"):
    """Build an EntityDocument from terse values: str -> Literal, {"@id": x} -> Reference."""
    out = {}
    for key, values in (props or {}).items():
        values = values if isinstance(values, list) else [values]
        converted = []
        for v in values:
            if isinstance(v, dict) and "@id" in v:
                converted.append(Reference(v["@id"]))
            elif isinstance(v, str):
                converted.append(Literal(v))
            else:
                converted.append(v)
        out[key if "://" in key else schema(key)] = tuple(converted)
    return EntityDocument(id, tuple(t_ if "://" in t_ else schema(t_) for t_ in types), out, (prov(url, t, syntax),))


def crawl_site(site, data_dir, *, force=False, settings=None, clock=None, **kw):
    store = kw.pop("store", None) or EntityStore(Path(data_dir) / "store")
    state = CrawlState(Path(data_dir) / "crawl_state.json")
    settings = settings or CrawlSettings(policy=FAST)
    extra = {"clock": clock} if clock else {}
    report = run_crawl([SourceRecord(site.url("/"), "static")], store, state, settings, force=force, **extra, **kw)
    return store, report


@pytest.fixture
def site():
    with FixtureServer() as server:
        yield server


@pytest.fixture(scope="session")
def crawled(tmp_path_factory):
    """The fixture site crawled once; tests must not mutate this store."""
    data = tmp_path_factory.mktemp("crawled")
    with FixtureServer() as server:
        store, report = crawl_site(server, data)
        yield server, store, report


ACCEPTANCE = pytest.StashKey[dict]()


def pytest_configure(config):
    config.stash[ACCEPTANCE] = {}


def pytest_terminal_summary(terminalreporter, config):
    lines = config.stash.get(ACCEPTANCE, {})
    if lines:
        terminalreporter.section("acceptance criteria")
        for number in sorted(lines):
            terminalreporter.write_line(lines[number])
