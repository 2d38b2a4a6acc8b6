"""RDFa Lite extraction: vocab, typeof, property, resource, prefix, href/src.

Full RDFa 1.1 chaining (about, rel/rev, datatype, inlist) is not supported.
Properties found outside any typed element attach to a node representing
the page itself, identified by the base URL.
"""

from __future__ import annotations

import itertools
from typing import Iterator
from urllib.parse import urljoin

from bs4 import BeautifulSoup, Tag

from ..model import is_absolute_iri
from .html import describe, parse_html, text_content, tokens
from .nodes import DiagnosticSink, RawIRI, RawLiteral, RawNode, TermContext

SYNTAX = "rdfa-lite"


def parse_prefix_attr(value: str) -> dict[str, str]:
    parts = value.split()
    out = {}
    for name, iri in zip(parts[::2], parts[1::2]):
        if name.endswith(":"):
            out[name[:-1]] = iri
    return out


class _Walker:
    def __init__(self, base: str, diagnostics: DiagnosticSink, counter: Iterator[int]):
        self.base = base
        self.diagnostics = diagnostics
        self.counter = counter
        self.roots: list[RawNode] = []
        self.document: RawNode | None = None

    def _resolvable(self, term: str, ctx: TermContext, el: Tag, what: str) -> bool:
        if ":" in term:
            prefix = term.split(":", 1)[0]
            if prefix in dict(ctx.prefixes) or is_absolute_iri(term):
                return True
        elif ctx.vocab:
            return True
        self.diagnostics.add(SYNTAX, f"{what} {term!r} has no enclosing vocab or prefix", describe(el))
        return False

    def _document_node(self, ctx: TermContext) -> RawNode:
        if self.document is None:
            self.document = RawNode(
                id=self.base, types=[], properties={}, syntax=SYNTAX,
                index=next(self.counter), context=ctx, location="document",
            )
            self.roots.append(self.document)
        return self.document

    def walk(self, el: Tag, ctx: TermContext, subject: RawNode | None) -> None:
        if el.has_attr("vocab"):
            ctx = ctx.with_updates(vocab=el["vocab"].strip() or None)
        if el.has_attr("prefix"):
            merged = {**dict(ctx.prefixes), **parse_prefix_attr(el["prefix"])}
            ctx = ctx.with_updates(prefixes=tuple(merged.items()))

        props = [p for p in tokens(el.get("property")) if self._resolvable(p, ctx, el, "property")]
        if el.has_attr("typeof"):
            types = [t for t in tokens(el.get("typeof")) if self._resolvable(t, ctx, el, "type")]
            resource = el.get("resource")
            node = RawNode(
                id=urljoin(self.base, resource) if resource else None,
                types=types, properties={}, syntax=SYNTAX,
                index=next(self.counter), context=ctx, location=describe(el),
            )
            if props:
                owner = subject or self._document_node(ctx)
                for p in props:
                    owner.add(p, node)
            else:
                self.roots.append(node)
            subject = node
        elif el.has_attr("property") and tokens(el.get("property")):
            if props:
                owner = subject or self._document_node(ctx)
                value = self._value(el)
                for p in props:
                    owner.add(p, value)
        for child in el.children:
            if isinstance(child, Tag):
                self.walk(child, ctx, subject)

    def _value(self, el: Tag):
        if el.has_attr("resource"):
            return RawIRI(urljoin(self.base, el["resource"]))
        for attr in ("href", "src"):
            if el.has_attr(attr):
                return RawIRI(urljoin(self.base, el[attr].strip()))
        if el.has_attr("content"):
            return RawLiteral(el["content"])
        if el.name == "time" and el.has_attr("datetime"):
            return RawLiteral(el["datetime"])
        return RawLiteral(text_content(el))


def extract_rdfa_lite(
    html: str | BeautifulSoup, base: str, diagnostics: DiagnosticSink | None = None
) -> list[RawNode]:
    diagnostics = diagnostics if diagnostics is not None else DiagnosticSink(base)
    soup = parse_html(html)
    walker = _Walker(base, diagnostics, itertools.count())
    root = soup.find("html") or soup
    walker.walk(root, TermContext(base=base), None)
    return walker.roots
