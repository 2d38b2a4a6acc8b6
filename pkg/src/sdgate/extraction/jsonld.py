"""JSON-LD script-block extraction.

Builds :class:`RawNode` trees from ``<script type="application/ld+json">``
blocks.  Keyword aliases and ``@context`` are processed here (they decide
the tree shape); term-to-IRI resolution is deferred to :func:`expand`.
"""

from __future__ import annotations

import itertools
import json
from typing import Any, Iterator
from urllib.parse import urljoin

from bs4 import BeautifulSoup

from .html import parse_html
from .nodes import (
    SCHEMA_CONTEXT,
    DiagnosticSink,
    RawIRI,
    RawLiteral,
    RawNode,
    TermContext,
    TermDefinition,
    is_schema_context_url,
)

SYNTAX = "jsonld"
MEDIA_TYPE = "application/ld+json"

KEYWORDS = {"@id", "@type", "@value", "@language", "@graph", "@context", "@list", "@set"}
UNSUPPORTED = {"@reverse", "@index", "@nest", "@included", "@container", "@direction", "@base", "@json", "@none"}


def extract_jsonld(
    html: str | BeautifulSoup, base: str, diagnostics: DiagnosticSink | None = None
) -> list[RawNode]:
    diagnostics = diagnostics if diagnostics is not None else DiagnosticSink(base)
    soup = parse_html(html)
    counter = itertools.count()
    nodes: list[RawNode] = []
    for n, script in enumerate(soup.find_all("script")):
        kind = (script.get("type") or "").split(";")[0].strip().lower()
        if kind != MEDIA_TYPE:
            continue
        location = f"script[{n}]"
        nodes.extend(extract_jsonld_text(script.string or script.get_text(), base, diagnostics, location, counter))
    return nodes


def extract_jsonld_text(
    text: str,
    base: str,
    diagnostics: DiagnosticSink | None = None,
    location: str = "document",
    counter: Iterator[int] | None = None,
) -> list[RawNode]:
    """Parse one JSON-LD document (the body of a script block, or a bare API response)."""
    diagnostics = diagnostics if diagnostics is not None else DiagnosticSink(base)
    counter = counter if counter is not None else itertools.count()
    try:
        data = json.loads(text)
    except ValueError as exc:
        diagnostics.add(SYNTAX, f"malformed JSON-LD block: {exc}", location, skipped=True)
        return []
    builder = _Builder(base, diagnostics, counter)
    return builder.top_level(data, TermContext(base=base), location)


class _Builder:
    def __init__(self, base: str, diagnostics: DiagnosticSink, counter: Iterator[int]):
        self.base = base
        self.diagnostics = diagnostics
        self.counter = counter

    def top_level(self, data: Any, ctx: TermContext, location: str) -> list[RawNode]:
        if isinstance(data, list):
            out = []
            for i, item in enumerate(data):
                out.extend(self.top_level(item, ctx, f"{location}[{i}]"))
            return out
        if not isinstance(data, dict):
            self.diagnostics.add(SYNTAX, "top-level JSON-LD value is not an object", location, skipped=True)
            return []
        if "@context" in data:
            ctx = self.process_context(ctx, data["@context"], location)
            data = {k: v for k, v in data.items() if k != "@context"}
        keys = {ctx.keyword(k) for k in data}
        if "@graph" in keys:
            graph_key = next(k for k in data if ctx.keyword(k) == "@graph")
            members = data[graph_key]
            members = members if isinstance(members, list) else [members]
            out = []
            if keys - {"@graph", "@context"}:
                rest = {k: v for k, v in data.items() if ctx.keyword(k) not in ("@graph", "@context")}
                out.append(self.node(rest, ctx, location))
            for i, member in enumerate(members):
                out.extend(self.top_level(member, ctx, f"{location}.@graph[{i}]"))
            return out
        return [self.node(data, ctx, location)]

    def process_context(self, ctx: TermContext, local: Any, location: str) -> TermContext:
        items = local if isinstance(local, list) else [local]
        for item in items:
            if item is None:
                ctx = TermContext(base=ctx.base)
            elif isinstance(item, str):
                if is_schema_context_url(item):
                    ctx = _merge(ctx, SCHEMA_CONTEXT)
                else:
                    self.diagnostics.add(SYNTAX, f"remote context {item!r} not fetched", location)
            elif isinstance(item, dict):
                ctx = self._local_context(ctx, item, location)
            else:
                self.diagnostics.add(SYNTAX, f"invalid @context entry {item!r}", location)
        return ctx

    def _local_context(self, ctx: TermContext, item: dict, location: str) -> TermContext:
        prefixes = dict(ctx.prefixes)
        terms = dict(ctx.terms)
        aliases = dict(ctx.aliases)
        vocab, language = ctx.vocab, ctx.language
        for key, value in item.items():
            if key == "@vocab":
                vocab = value or None
            elif key == "@language":
                language = value
            elif key.startswith("@"):
                self.diagnostics.add(SYNTAX, f"unsupported context keyword {key}", location)
            elif value is None:
                terms.pop(key, None)
                prefixes.pop(key, None)
                aliases.pop(key, None)
            elif isinstance(value, str):
                if value.startswith("@"):
                    aliases[key] = value
                else:
                    terms[key] = TermDefinition(value)
                    if value.endswith(("/", "#", ":")):
                        prefixes[key] = value
            elif isinstance(value, dict):
                for extra in set(value) - {"@id", "@type", "@language"}:
                    self.diagnostics.add(SYNTAX, f"unsupported term definition key {extra} for {key!r}", location)
                target = value.get("@id", key)
                coerce = value.get("@type") in ("@id", "@vocab")
                if isinstance(target, str) and target.startswith("@"):
                    aliases[key] = target
                else:
                    terms[key] = TermDefinition(target, coerce_id=coerce)
            else:
                self.diagnostics.add(SYNTAX, f"invalid term definition for {key!r}", location)
        return ctx.with_updates(
            vocab=vocab,
            language=language,
            prefixes=tuple(prefixes.items()),
            terms=tuple(terms.items()),
            aliases=tuple(aliases.items()),
        )

    def node(self, data: dict, ctx: TermContext, location: str) -> RawNode:
        if "@context" in data:
            ctx = self.process_context(ctx, data["@context"], location)
        node = RawNode(id=None, types=[], properties={}, syntax=SYNTAX, index=next(self.counter), context=ctx, location=location)
        for key, value in data.items():
            kw = ctx.keyword(key)
            where = f"{location}.{key}"
            if kw == "@context":
                continue
            if kw == "@id":
                if isinstance(value, str):
                    node.id = _resolve_id(value, ctx.base or self.base)
                else:
                    self.diagnostics.add(SYNTAX, "@id must be a string", where)
            elif kw == "@type":
                items = value if isinstance(value, list) else [value]
                node.types.extend(t for t in items if isinstance(t, str))
            elif kw.startswith("@"):
                self.diagnostics.add(SYNTAX, f"unsupported keyword {kw}", where)
            else:
                for item in self.values(value, ctx, where):
                    node.add(key, item)
        return node

    def values(self, value: Any, ctx: TermContext, location: str) -> list:
        if value is None:
            return []
        if isinstance(value, list):
            out = []
            for i, item in enumerate(value):
                out.extend(self.values(item, ctx, f"{location}[{i}]"))
            return out
        if isinstance(value, str):
            return [RawLiteral(value, language=ctx.language, plain=True)]
        if isinstance(value, bool):
            return [RawLiteral("true" if value else "false")]
        if isinstance(value, (int, float)):
            return [RawLiteral(json.dumps(value))]
        if isinstance(value, dict):
            keys = {ctx.keyword(k): k for k in value}
            if "@value" in keys:
                raw = value[keys["@value"]]
                if raw is None:
                    return []
                text = raw if isinstance(raw, str) else json.dumps(raw)
                datatype = value.get(keys["@type"]) if "@type" in keys else None
                language = value.get(keys["@language"]) if "@language" in keys else None
                return [RawLiteral(text, datatype, language)]
            if "@list" in keys or "@set" in keys:
                return self.values(value[keys.get("@list", keys.get("@set"))], ctx, location)
            if set(keys) <= {"@id"} and "@id" in keys and isinstance(value[keys["@id"]], str):
                return [RawIRI(_resolve_id(value[keys["@id"]], ctx.base or self.base))]
            return [self.node(value, ctx, location)]
        self.diagnostics.add(SYNTAX, f"unsupported JSON value {value!r}", location)
        return []


def _resolve_id(value: str, base: str) -> str:
    if value.startswith("_:"):
        return value
    return urljoin(base, value)


def _merge(ctx: TermContext, other: TermContext) -> TermContext:
    return ctx.with_updates(
        vocab=other.vocab or ctx.vocab,
        prefixes=tuple({**dict(ctx.prefixes), **dict(other.prefixes)}.items()),
        terms=tuple({**dict(ctx.terms), **dict(other.terms)}.items()),
    )
