"""Synthetic destination-marketing site used for end-to-end verification.

Corpus constants below are counted by hand from the files under ``site/``
(see FIXTURES.md) and are asserted by the test suite.
"""

from importlib import resources
from pathlib import Path

from .server import FixtureServer, LoggedRequest, serve_fixtures, site_root

CRAWLABLE_PAGES = 6
EXTRACTED_ENTITIES = 27
CANONICAL_ENTITIES = 26
ACTIONS = 3
LODGING_RESULTS = 3
TYPE_HISTOGRAM = {
    "EntryPoint": 3,
    "Event": 1,
    "GeoCoordinates": 1,
    "Hotel": 3,
    "Offer": 3,
    "Organization": 1,
    "Place": 1,
    "PostalAddress": 5,
    "PropertyValueSpecification": 3,
    "ReserveAction": 3,
    "TouristAttraction": 1,
    None: 1,
}


def equivalence_root() -> Path:
    return Path(str(resources.files("sdgate.fixtures") / "equivalence"))


def equivalence_pages() -> dict[str, dict[str, Path]]:
    """content name -> syntax -> page path"""
    out: dict[str, dict[str, Path]] = {}
    for page in sorted(equivalence_root().glob("*.html")):
        content, syntax = page.stem.split(".", 1)
        out.setdefault(content, {})[syntax] = page
    return out


def run_e2e(*args, **kwargs):
    from .e2e import run_e2e as _run

    return _run(*args, **kwargs)


__all__ = [
    "ACTIONS",
    "CANONICAL_ENTITIES",
    "CRAWLABLE_PAGES",
    "EXTRACTED_ENTITIES",
    "LODGING_RESULTS",
    "TYPE_HISTOGRAM",
    "FixtureServer",
    "LoggedRequest",
    "equivalence_pages",
    "equivalence_root",
    "run_e2e",
    "serve_fixtures",
    "site_root",
]
