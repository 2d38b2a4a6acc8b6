"""Rule-based entity resolution.

R1: the incoming id (or an alias of it) is already stored.
R2: a stored entity with a subsumption-compatible type, the same name key,
    and at least one equal corroborating identifying property.
"""

from __future__ import annotations

import re
from typing import Callable, Iterable, Mapping

from ..model import EntityDocument, Literal, Reference, Structured, Value, dedupe, schema
from ..registry import SchemaRegistry

NAME = schema("name")
STREET = schema("streetAddress")
LOCALITY = schema("addressLocality")

_PUNCT = re.compile(r"[^\w\s]+")

Lookup = Callable[[str], "EntityDocument | None"]


def name_key(entity: EntityDocument) -> str:
    """Lowercased, punctuation-stripped, token-sorted name (first name literal)."""
    names = entity.literals(NAME)
    if not names:
        return ""
    return " ".join(sorted(_PUNCT.sub(" ", names[0].lower()).split()))


def _norm_text(text: str) -> str:
    return " ".join(text.lower().split())


def _norm_phone(text: str) -> str:
    return re.sub(r"[^\d+]", "", text)


def _norm_url(text: str) -> str:
    return text.strip().rstrip("/").lower()


def _address_key(fields: Mapping[str, tuple[Value, ...]]) -> str | None:
    def first(prop: str) -> str:
        for v in fields.get(prop, ()):
            if isinstance(v, Literal):
                return _norm_text(v.text)
        return ""

    street, locality = first(STREET), first(LOCALITY)
    if not street and not locality:
        return None
    return f"addr:{street}|{locality}"


def value_keys(prop: str, values: Iterable[Value], lookup: Lookup) -> set[str]:
    """Normalized comparison keys for the values of one identifying property."""
    keys = set()
    for value in values:
        if isinstance(value, Literal):
            if prop == schema("telephone"):
                keys.add("tel:" + _norm_phone(value.text))
            elif prop in (schema("url"), schema("sameAs")):
                keys.add("url:" + _norm_url(value.text))
            else:
                keys.add("lit:" + _norm_text(value.text))
        elif isinstance(value, Reference):
            target = lookup(value.target)
            addr = _address_key(target.properties) if target is not None else None
            if addr:
                keys.add(addr)
            elif prop in (schema("url"), schema("sameAs")):
                keys.add("url:" + _norm_url(value.target))
            else:
                keys.add("ref:" + value.target)
        elif isinstance(value, Structured):
            addr = _address_key(value.as_dict())
            if addr:
                keys.add(addr)
    keys.discard("tel:")
    return keys


def identifying_keys(entity: EntityDocument, registry: SchemaRegistry) -> set[str]:
    out = set()
    for t in entity.types or (registry.root,):
        out |= registry.identifying_properties(t)
    return out


def corroborates(a: EntityDocument, b: EntityDocument, registry: SchemaRegistry, lookup_a: Lookup, lookup_b: Lookup) -> bool:
    props = identifying_keys(a, registry) | identifying_keys(b, registry)
    for prop in sorted(props):
        if prop == NAME:
            continue
        ka = value_keys(prop, a.get(prop), lookup_a)
        if ka and ka & value_keys(prop, b.get(prop), lookup_b):
            return True
    return False


def r2_pair(incoming: EntityDocument, stored: EntityDocument, registry: SchemaRegistry, lookup_in: Lookup, lookup_stored: Lookup) -> bool:
    if not incoming.types or not stored.types:
        return False
    key = name_key(incoming)
    if not key or key != name_key(stored):
        return False
    if not registry.compatible(incoming.types, stored.types):
        return False
    return corroborates(incoming, stored, registry, lookup_in, lookup_stored)


def find_match(
    entity: EntityDocument,
    snapshot,
    registry: SchemaRegistry,
    *,
    lookup: Lookup | None = None,
) -> str | None:
    """Canonical id of the stored entity ``entity`` denotes, if any.

    ``lookup`` resolves references held by ``entity`` itself (typically its
    extraction batch); stored references resolve through the snapshot.
    """
    canonical = snapshot.resolve(entity.id)
    if canonical in snapshot.entities:
        return canonical
    key = name_key(entity)
    if not key:
        return None
    lookup = lookup or snapshot.get
    for candidate_id in sorted(snapshot.by_name.get(key, ())):
        candidate = snapshot.entities[candidate_id]
        if r2_pair(entity, candidate, registry, lookup, snapshot.get):
            return candidate_id
    return None


def merge(existing: EntityDocument, incoming: EntityDocument, registry: SchemaRegistry) -> EntityDocument:
    """Union of two records of the same entity; the existing id is kept.

    Functional properties take the value carried by the newer provenance
    (incoming wins ties); everything else is a de-duplicated union.
    """
    types = list(existing.types)
    types += [t for t in incoming.types if t not in types]
    incoming_newer = incoming.newest >= existing.newest
    props: dict[str, tuple[Value, ...]] = dict(existing.properties)
    for key, values in incoming.properties.items():
        if key not in props:
            props[key] = values
        elif registry.is_functional(key):
            if incoming_newer:
                props[key] = values
        else:
            props[key] = dedupe(props[key] + values)
    provenance = tuple(sorted(set(existing.provenance) | set(incoming.provenance)))
    return EntityDocument(existing.id, tuple(types), props, provenance)
