"""Canonical entity model shared by every stage of the pipeline.

Entities are stored flattened: one :class:`EntityDocument` per identified
node, with nested nodes replaced by :class:`Reference` values.  All property
keys and type names are absolute IRIs; the two schema.org scheme variants
are folded onto ``https://schema.org/``.
"""

from __future__ import annotations

import hashlib
import re
from dataclasses import dataclass, field
from typing import Any, Iterable, Mapping, Union

SCHEMA = "https://schema.org/"
_SCHEMA_VARIANTS = ("http://schema.org/", "https://schema.org/")

# Reserved namespace for gateway/store bookkeeping keys in serialized documents.
SDG = "urn:sdgate:"
PROVENANCE_KEY = SDG + "provenance"
DANGLING_KEY = SDG + "dangling"

# Surrogate ids for blank nodes: "_:<syntax>-<n>" while page-local,
# "_:g<hex>" once the store has globalized them.
SURROGATE_PREFIX = "_:"

SYNTAXES = ("jsonld", "microdata", "rdfa-lite")

_SCHEME = re.compile(r"^[A-Za-z][A-Za-z0-9+.\-]*:")


class IRIResolutionError(ValueError):
    def __init__(self, term: str):
        super().__init__(f"cannot resolve term {term!r} to an absolute IRI")
        self.term = term


@dataclass(frozen=True)
class Context:
    """Default vocabulary plus prefix bindings used to resolve terms."""

    vocab: str | None = SCHEMA
    prefixes: Mapping[str, str] = field(default_factory=dict)


def normalize_iri(iri: str) -> str:
    for variant in _SCHEMA_VARIANTS:
        if iri.startswith(variant):
            return SCHEMA + iri[len(variant):]
    if iri in ("http://schema.org", "https://schema.org"):
        return SCHEMA
    return iri


def is_absolute_iri(term: str) -> bool:
    return bool(_SCHEME.match(term))


def canonicalize_iri(term: str, context: Context | None = None) -> str:
    """Resolve a term, compact IRI or absolute IRI to a canonical absolute IRI."""
    context = context or Context()
    term = term.strip()
    if not term:
        raise IRIResolutionError(term)
    if ":" in term:
        prefix, suffix = term.split(":", 1)
        if prefix in context.prefixes and not suffix.startswith("//"):
            return normalize_iri(context.prefixes[prefix] + suffix)
        if is_absolute_iri(term):
            return normalize_iri(term)
    if context.vocab:
        return normalize_iri(context.vocab + term)
    raise IRIResolutionError(term)


def schema(term: str) -> str:
    return SCHEMA + term


def is_surrogate(identifier: str) -> bool:
    return identifier.startswith(SURROGATE_PREFIX)


def is_local_surrogate(identifier: str) -> bool:
    return is_surrogate(identifier) and not identifier.startswith("_:g")


def global_surrogate(local_id: str, provenance: "ProvenanceRecord") -> str:
    digest = hashlib.sha256(
        f"{provenance.url}|{provenance.content_hash}|{provenance.syntax}|{local_id}".encode()
    ).hexdigest()
    return f"_:g{digest[:20]}"


# --- values -----------------------------------------------------------------


@dataclass(frozen=True)
class Literal:
    text: str
    datatype: str | None = None
    language: str | None = None


@dataclass(frozen=True)
class Reference:
    target: str
    dangling: bool = field(default=False, compare=False)


@dataclass(frozen=True)
class Structured:
    """Inline map for nodes that carry neither a type nor an id."""

    fields: tuple[tuple[str, tuple["Value", ...]], ...]

    @classmethod
    def from_mapping(cls, mapping: Mapping[str, Iterable["Value"]]) -> "Structured":
        return cls(tuple((k, tuple(v)) for k, v in mapping.items()))

    def get(self, prop: str) -> tuple["Value", ...]:
        for key, values in self.fields:
            if key == prop:
                return values
        return ()

    def as_dict(self) -> dict[str, tuple["Value", ...]]:
        return dict(self.fields)


Value = Union[Literal, Reference, Structured]


@dataclass(frozen=True, order=True)
class ProvenanceRecord:
    fetched_at: float
    url: str
    syntax: str
    content_hash: str

    def __post_init__(self) -> None:
        if self.syntax not in SYNTAXES:
            raise ValueError(f"unknown extraction syntax {self.syntax!r}")
        if not self.fetched_at > 0:
            raise ValueError("provenance timestamp must be positive")


@dataclass(frozen=True)
class EntityDocument:
    id: str
    types: tuple[str, ...]
    properties: Mapping[str, tuple[Value, ...]]
    provenance: tuple[ProvenanceRecord, ...]

    def __post_init__(self) -> None:
        if not self.id:
            raise ValueError("entity id must be non-empty")
        props = {}
        for key, values in self.properties.items():
            if not is_absolute_iri(key):
                raise ValueError(f"property key {key!r} is not an absolute IRI")
            values = tuple(values)
            if not values:
                raise ValueError(f"property {key!r} has an empty value list")
            props[key] = values
        object.__setattr__(self, "properties", props)
        object.__setattr__(self, "types", tuple(self.types))
        prov = tuple(self.provenance)
        if not prov:
            raise ValueError("entity requires at least one provenance record")
        if list(prov) != sorted(prov):
            raise ValueError("provenance must be sorted by fetch timestamp")
        object.__setattr__(self, "provenance", prov)

    def get(self, prop: str) -> tuple[Value, ...]:
        return self.properties.get(prop, ())

    def literals(self, prop: str) -> list[str]:
        return [v.text for v in self.get(prop) if isinstance(v, Literal)]

    def references(self) -> list[str]:
        return [t for values in self.properties.values() for t in _ref_targets(values)]

    @property
    def newest(self) -> float:
        return self.provenance[-1].fetched_at


def _ref_targets(values: Iterable[Value]) -> Iterable[str]:
    for value in values:
        if isinstance(value, Reference):
            yield value.target
        elif isinstance(value, Structured):
            for _, nested in value.fields:
                yield from _ref_targets(nested)


def map_references(values: Iterable[Value], fn) -> tuple[Value, ...]:
    """Rewrite every reference (including inside structured values) with ``fn``."""
    out = []
    for value in values:
        if isinstance(value, Reference):
            value = fn(value)
        elif isinstance(value, Structured):
            value = Structured(tuple((k, map_references(v, fn)) for k, v in value.fields))
        out.append(value)
    return tuple(out)


def dedupe(values: Iterable[Value]) -> tuple[Value, ...]:
    seen: list[Value] = []
    for value in values:
        if value not in seen:
            seen.append(value)
    return tuple(seen)


# --- document codec ---------------------------------------------------------
#
# Entities serialize to compact JSON-LD under the schema.org vocabulary:
# schema.org keys and types are written as bare terms, plain literals as
# strings, references as {"@id": ...}, literals with datatype/language as
# value objects.  Any other object is a structured value.


def compact_iri(iri: str) -> str:
    if iri.startswith(SCHEMA) and ":" not in iri[len(SCHEMA):]:
        return iri[len(SCHEMA):] or iri
    return iri


def expand_key(key: str) -> str:
    return key if is_absolute_iri(key) else SCHEMA + key


def value_to_json(value: Value) -> Any:
    if isinstance(value, Literal):
        if value.datatype is None and value.language is None:
            return value.text
        out: dict[str, Any] = {"@value": value.text}
        if value.datatype:
            out["@type"] = compact_iri(value.datatype)
        if value.language:
            out["@language"] = value.language
        return out
    if isinstance(value, Reference):
        out = {"@id": value.target}
        if value.dangling:
            out[DANGLING_KEY] = True
        return out
    return {compact_iri(k): values_to_json(v) for k, v in value.fields}


def values_to_json(values: tuple[Value, ...]) -> Any:
    encoded = [value_to_json(v) for v in values]
    return encoded[0] if len(encoded) == 1 else encoded


def value_from_json(data: Any) -> Value:
    if isinstance(data, str):
        return Literal(data)
    if isinstance(data, (int, float, bool)):
        raise ValueError(f"literal {data!r} must be serialized as text")
    if isinstance(data, dict):
        if "@value" in data:
            dt = data.get("@type")
            return Literal(str(data["@value"]), expand_key(dt) if dt else None, data.get("@language"))
        if "@id" in data:
            return Reference(data["@id"], bool(data.get(DANGLING_KEY, False)))
        return Structured(tuple((expand_key(k), values_from_json(v)) for k, v in data.items()))
    raise ValueError(f"cannot decode value {data!r}")


def values_from_json(data: Any) -> tuple[Value, ...]:
    items = data if isinstance(data, list) else [data]
    return tuple(value_from_json(item) for item in items)


def provenance_to_json(record: ProvenanceRecord) -> dict[str, Any]:
    return {
        "url": record.url,
        "fetchedAt": record.fetched_at,
        "syntax": record.syntax,
        "contentHash": record.content_hash,
    }


def provenance_from_json(data: Mapping[str, Any]) -> ProvenanceRecord:
    return ProvenanceRecord(
        fetched_at=float(data["fetchedAt"]),
        url=data["url"],
        syntax=data["syntax"],
        content_hash=data["contentHash"],
    )


def to_document(entity: EntityDocument, *, provenance: bool = True) -> dict[str, Any]:
    doc: dict[str, Any] = {"@id": entity.id}
    if entity.types:
        doc["@type"] = [compact_iri(t) for t in entity.types]
    for key in sorted(entity.properties):
        doc[compact_iri(key)] = values_to_json(entity.properties[key])
    if provenance:
        doc[PROVENANCE_KEY] = [provenance_to_json(p) for p in entity.provenance]
    return doc


def from_document(doc: Mapping[str, Any]) -> EntityDocument:
    types = doc.get("@type", [])
    if isinstance(types, str):
        types = [types]
    props = {}
    for key, raw in doc.items():
        if key.startswith("@") or key == PROVENANCE_KEY:
            continue
        props[expand_key(key)] = values_from_json(raw)
    return EntityDocument(
        id=doc["@id"],
        types=tuple(expand_key(t) for t in types),
        properties=props,
        provenance=tuple(provenance_from_json(p) for p in doc.get(PROVENANCE_KEY, [])),
    )
