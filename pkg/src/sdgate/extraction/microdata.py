"""HTML Microdata extraction (itemscope / itemtype / itemprop / itemid / itemref)."""

from __future__ import annotations

import itertools
from typing import Iterator
from urllib.parse import urljoin

from bs4 import BeautifulSoup, Tag

from ..model import is_absolute_iri
from .html import describe, parse_html, text_content, tokens
from .nodes import DiagnosticSink, RawIRI, RawLiteral, RawNode, TermContext

SYNTAX = "microdata"

_SRC_ELEMENTS = {"audio", "embed", "iframe", "img", "source", "track", "video"}
_HREF_ELEMENTS = {"a", "area", "link"}


def extract_microdata(
    html: str | BeautifulSoup, base: str, diagnostics: DiagnosticSink | None = None
) -> list[RawNode]:
    diagnostics = diagnostics if diagnostics is not None else DiagnosticSink(base)
    soup = parse_html(html)
    counter = itertools.count()
    roots = []
    for el in soup.find_all(attrs={"itemscope": True}):
        if el.has_attr("itemprop"):
            continue
        roots.append(_item(el, base, soup, counter, None, diagnostics, frozenset()))
    for el in soup.find_all(attrs={"itemprop": True}):
        if el.find_parent(attrs={"itemscope": True}) is None and not _referenced(el, soup):
            diagnostics.add(SYNTAX, f"itemprop {el.get('itemprop')!r} outside any itemscope", describe(el))
    return roots


def _referenced(el: Tag, soup: BeautifulSoup) -> bool:
    refs = {r for t in soup.find_all(attrs={"itemref": True}) for r in tokens(t.get("itemref"))}
    return any(isinstance(a, Tag) and a.get("id") in refs for a in [el, *el.parents])


def _vocabulary(types: list[str], inherited: str | None) -> str | None:
    if not types:
        return inherited
    first = types[0]
    cut = max(first.rfind("/"), first.rfind("#"))
    return first[: cut + 1] if cut >= 0 else inherited


def _item(
    el: Tag,
    base: str,
    soup: BeautifulSoup,
    counter: Iterator[int],
    vocab: str | None,
    diagnostics: DiagnosticSink,
    ancestry: frozenset[int],
) -> RawNode:
    types = [urljoin(base, t) if not is_absolute_iri(t) else t for t in tokens(el.get("itemtype"))]
    vocab = _vocabulary(types, vocab)
    itemid = el.get("itemid")
    node = RawNode(
        id=urljoin(base, itemid) if itemid else None,
        types=types,
        properties={},
        syntax=SYNTAX,
        index=next(counter),
        context=TermContext(vocab=vocab, base=base),
        location=describe(el),
    )
    ancestry = ancestry | {id(el)}
    for prop_el in _property_elements(el, soup):
        names = tokens(prop_el.get("itemprop"))
        if prop_el.has_attr("itemscope"):
            if id(prop_el) in ancestry:
                diagnostics.add(SYNTAX, "itemref cycle", describe(prop_el))
                continue
            value = _item(prop_el, base, soup, counter, vocab, diagnostics, ancestry)
        else:
            value = _value(prop_el, base)
        for name in names:
            node.add(name, value)
    return node


def _property_elements(root: Tag, soup: BeautifulSoup) -> list[Tag]:
    """Elements contributing properties to ``root``, in tree order."""
    pending = [c for c in root.children if isinstance(c, Tag)]
    for ref in tokens(root.get("itemref")):
        target = soup.find(id=ref)
        if target is not None:
            pending.append(target)
    found: list[Tag] = []
    seen: set[int] = set()
    while pending:
        el = pending.pop(0)
        if id(el) in seen:
            continue
        seen.add(id(el))
        if el.has_attr("itemprop"):
            found.append(el)
        if not el.has_attr("itemscope"):
            pending[0:0] = [c for c in el.children if isinstance(c, Tag)]
    return found


def _value(el: Tag, base: str):
    name = el.name
    if name == "meta":
        return RawLiteral(el.get("content", ""))
    if name in _SRC_ELEMENTS:
        return _url(el.get("src"), base)
    if name in _HREF_ELEMENTS:
        return _url(el.get("href"), base)
    if name == "object":
        return _url(el.get("data"), base)
    if name in ("data", "meter"):
        return RawLiteral(el.get("value", ""))
    if name == "time" and el.has_attr("datetime"):
        return RawLiteral(el["datetime"])
    return RawLiteral(text_content(el))


def _url(value: str | None, base: str):
    if value is None:
        return RawLiteral("")
    return RawIRI(urljoin(base, value.strip()))
