"""Structured-data extraction from HTML pages: JSON-LD, Microdata and RDFa Lite."""

from __future__ import annotations

import hashlib
import time
from dataclasses import dataclass, field

from ..model import EntityDocument, ProvenanceRecord
from .flatten import expand, flatten
from .html import parse_html
from .jsonld import extract_jsonld, extract_jsonld_text
from .microdata import extract_microdata
from .nodes import Diagnostic, DiagnosticSink, RawIRI, RawLiteral, RawNode
from .rdfa import extract_rdfa_lite

EXTRACTORS = {
    "jsonld": extract_jsonld,
    "microdata": extract_microdata,
    "rdfa-lite": extract_rdfa_lite,
}


@dataclass
class ExtractionReport:
    url: str
    roots: dict[str, int] = field(default_factory=dict)
    diagnostics: list[Diagnostic] = field(default_factory=list)
    entities_produced: int = 0

    @property
    def skipped(self) -> list[Diagnostic]:
        return [d for d in self.diagnostics if d.skipped]


def content_hash(body: bytes | str) -> str:
    if isinstance(body, str):
        body = body.encode("utf-8")
    return hashlib.sha256(body).hexdigest()


def extract_page(
    html: str,
    url: str,
    *,
    fetched_at: float | None = None,
    page_hash: str | None = None,
) -> tuple[list[EntityDocument], ExtractionReport]:
    """Run all three extractors over one page and return flattened entities."""
    fetched_at = fetched_at if fetched_at is not None else time.time()
    page_hash = page_hash or content_hash(html)
    sink = DiagnosticSink(url)
    soup = parse_html(html)
    report = ExtractionReport(url)
    entities: list[EntityDocument] = []
    for syntax, extractor in EXTRACTORS.items():
        roots = extractor(soup, url, sink)
        report.roots[syntax] = len(roots)
        if not roots:
            continue
        expanded = [expand(r, url, sink) for r in roots]
        prov = ProvenanceRecord(fetched_at=fetched_at, url=url, syntax=syntax, content_hash=page_hash)
        entities.extend(flatten(expanded, prov))
    report.diagnostics = list(sink)
    report.entities_produced = len(entities)
    return entities, report


__all__ = [
    "Diagnostic",
    "DiagnosticSink",
    "ExtractionReport",
    "RawIRI",
    "RawLiteral",
    "RawNode",
    "content_hash",
    "expand",
    "extract_jsonld",
    "extract_jsonld_text",
    "extract_microdata",
    "extract_page",
    "extract_rdfa_lite",
    "flatten",
]
