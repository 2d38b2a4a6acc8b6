from __future__ import annotations

import logging
from dataclasses import dataclass, replace
from typing import Union

from ..model import SCHEMA, Context, IRIResolutionError, canonicalize_iri, is_absolute_iri, normalize_iri

logger = logging.getLogger("sdgate.extraction")


@dataclass(frozen=True)
class Diagnostic:
    syntax: str
    reason: str
    location: str = ""
    skipped: bool = False  # a whole annotation root was dropped


class DiagnosticSink(list):
    """Collects diagnostics and mirrors each one to the extraction log."""

    def __init__(self, page_url: str = ""):
        super().__init__()
        self.page_url = page_url

    def add(self, syntax: str, reason: str, location: str = "", skipped: bool = False) -> None:
        diag = Diagnostic(syntax, reason, location, skipped)
        self.append(diag)
        logger.warning(
            "extraction diagnostic: %s",
            reason,
            extra={"page_url": self.page_url, "syntax": syntax, "location": location},
        )


@dataclass(frozen=True)
class TermDefinition:
    iri: str  # raw mapping, may itself be a term or compact IRI
    coerce_id: bool = False


@dataclass(frozen=True)
class TermContext:
    """Active context for term resolution, shared by all three syntaxes.

    Microdata and RDFa only ever use ``vocab`` and ``prefixes``; JSON-LD
    additionally has term definitions and keyword aliases.
    """

    vocab: str | None = None
    prefixes: tuple[tuple[str, str], ...] = ()
    terms: tuple[tuple[str, TermDefinition], ...] = ()
    aliases: tuple[tuple[str, str], ...] = ()
    language: str | None = None
    base: str | None = None

    def with_updates(self, **kw) -> "TermContext":
        return replace(self, **kw)

    def term(self, name: str) -> TermDefinition | None:
        for key, definition in self.terms:
            if key == name:
                return definition
        return None

    def keyword(self, key: str) -> str:
        for alias, kw in self.aliases:
            if alias == key:
                return kw
        return key

    def resolve(self, term: str, _seen: frozenset[str] = frozenset()) -> str:
        definition = self.term(term)
        if definition is not None and term not in _seen:
            target = definition.iri
            if is_absolute_iri(target) and target.split(":", 1)[0] not in dict(self.prefixes):
                return normalize_iri(target)
            return self.resolve(target, _seen | {term})
        return canonicalize_iri(term, Context(vocab=self.vocab, prefixes=dict(self.prefixes)))

    def coerces_id(self, term: str) -> bool:
        definition = self.term(term)
        return bool(definition and definition.coerce_id)


# Built-in stand-in for the remote schema.org JSON-LD context.
_SCHEMA_ID_TERMS = ("url", "sameAs", "image", "logo", "additionalType")
SCHEMA_CONTEXT = TermContext(
    vocab=SCHEMA,
    prefixes=(("schema", SCHEMA),),
    terms=tuple((t, TermDefinition(SCHEMA + t, coerce_id=True)) for t in _SCHEMA_ID_TERMS),
)


def is_schema_context_url(value: str) -> bool:
    value = value.strip().rstrip("/")
    return value in (
        "http://schema.org",
        "https://schema.org",
        "http://schema.org/docs/jsonldcontext.json",
        "https://schema.org/docs/jsonldcontext.json",
        "http://schema.org/docs/jsonldcontext.jsonld",
        "https://schema.org/docs/jsonldcontext.jsonld",
    )


@dataclass(frozen=True)
class RawLiteral:
    text: str
    datatype: str | None = None
    language: str | None = None
    plain: bool = False  # bare JSON string, eligible for @id coercion


@dataclass(frozen=True)
class RawIRI:
    iri: str


@dataclass
class RawNode:
    id: str | None
    types: list[str]
    properties: dict[str, list["RawValue"]]
    syntax: str
    index: int
    context: TermContext | None = None
    location: str = ""

    def add(self, prop: str, value: "RawValue") -> None:
        self.properties.setdefault(prop, []).append(value)


RawValue = Union[RawLiteral, RawIRI, RawNode]


def resolve_or_none(ctx: TermContext, term: str) -> str | None:
    try:
        return ctx.resolve(term)
    except IRIResolutionError:
        return None

