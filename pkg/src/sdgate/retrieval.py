"""Scored search, reconciliation and heuristic type inference over a store snapshot."""

from __future__ import annotations

import datetime as dt
import math
import re
from dataclasses import dataclass, field
from typing import Iterable

from .model import Context, EntityDocument, Literal, Reference, canonicalize_iri, schema
from .registry import SchemaRegistry, default_registry

COMPARATORS = ("equals", "contains-text", "less-than", "greater-than")
TEXT_PROPERTIES = (schema("name"), schema("description"))

_TOKEN = re.compile(r"\w+")
_CONSTRAINT = re.compile(r"^(.+?):(eq|contains|lt|gt):(.*)$", re.DOTALL)


class QueryRejected(ValueError):
    def __init__(self, message: str, constraint: "Constraint | None" = None):
        super().__init__(message)
        self.constraint = constraint


def tokens(text: str) -> set[str]:
    return set(_TOKEN.findall(text.lower()))


def text_similarity(a: str, b: str) -> float:
    """Jaccard similarity of normalized token sets."""
    ta, tb = tokens(a), tokens(b)
    if not ta and not tb:
        return 1.0
    if not ta or not tb:
        return 0.0
    return len(ta & tb) / len(ta | tb)


@dataclass(frozen=True)
class Weights:
    type: float = 0.3
    constraints: float = 0.3
    text: float = 0.3
    completeness: float = 0.1

    def __post_init__(self) -> None:
        parts = (self.type, self.constraints, self.text, self.completeness)
        if any(w < 0 for w in parts) or not math.isclose(sum(parts), 1.0, abs_tol=1e-9):
            raise ValueError(f"weights must be non-negative and sum to 1, got {parts}")


@dataclass(frozen=True)
class Constraint:
    property: str
    comparator: str
    value: str

    def __post_init__(self) -> None:
        if self.comparator not in COMPARATORS:
            raise QueryRejected(f"unknown comparator {self.comparator!r}", self)


@dataclass(frozen=True)
class QuerySpec:
    type: str | None = None
    constraints: tuple[Constraint, ...] = ()
    text: str | None = None
    limit: int = 10
    offset: int = 0
    threshold: float = 0.75

    def __post_init__(self) -> None:
        object.__setattr__(self, "constraints", tuple(self.constraints))
        if self.limit < 1:
            raise QueryRejected("limit must be at least 1")
        if self.offset < 0:
            raise QueryRejected("offset must be non-negative")
        if not 0.0 <= self.threshold <= 1.0:  # also rejects NaN
            raise QueryRejected("threshold must lie in [0, 1]")
        for c in self.constraints:
            if c.comparator in ("less-than", "greater-than") and _ordinal(c.value) is None:
                raise QueryRejected(
                    f"constraint {c.property} {c.comparator} {c.value!r} needs a numeric or date value", c
                )


@dataclass(frozen=True)
class MatchResult:
    id: str
    score: float
    components: dict[str, float] = field(compare=False)
    entity: EntityDocument = field(compare=False, repr=False)


def _ordinal(text: str) -> float | None:
    """Numbers compare as floats, ISO dates/datetimes as POSIX seconds."""
    text = text.strip()
    try:
        value = float(text)
        return value if math.isfinite(value) else None
    except ValueError:
        pass
    try:
        parsed = dt.datetime.fromisoformat(text)
    except ValueError:
        try:
            parsed = dt.datetime.combine(dt.date.fromisoformat(text), dt.time())
        except ValueError:
            return None
    if parsed.tzinfo is None:
        parsed = parsed.replace(tzinfo=dt.timezone.utc)
    return parsed.timestamp()


def _satisfies(entity: EntityDocument, c: Constraint) -> bool:
    for value in entity.get(c.property):
        if isinstance(value, Reference):
            if c.comparator == "equals" and value.target == c.value:
                return True
            continue
        if not isinstance(value, Literal):
            continue
        if c.comparator == "equals":
            if value.text.strip().lower() == c.value.strip().lower():
                return True
            left, right = _ordinal(value.text), _ordinal(c.value)
            if left is not None and right is not None and left == right:
                return True
        elif c.comparator == "contains-text":
            if c.value.lower() in value.text.lower():
                return True
        else:
            left = _ordinal(value.text)
            if left is None:
                continue  # unparseable data never satisfies, never errors
            right = _ordinal(c.value)
            if (left < right) if c.comparator == "less-than" else (left > right):
                return True
    return False


def score(
    entity: EntityDocument,
    spec: QuerySpec,
    registry: SchemaRegistry | None = None,
    weights: Weights = Weights(),
) -> MatchResult:
    registry = registry or default_registry()
    if spec.type is None:
        type_c = 1.0
    else:
        type_c = 1.0 if any(registry.type_subsumes(spec.type, t) for t in entity.types) else 0.0
    if spec.constraints:
        constraints_c = sum(_satisfies(entity, c) for c in spec.constraints) / len(spec.constraints)
    else:
        constraints_c = 1.0
    if spec.text:
        texts = [t for p in TEXT_PROPERTIES for t in entity.literals(p)]
        text_c = max((text_similarity(spec.text, t) for t in texts), default=0.0)
    else:
        text_c = 1.0
    completeness_c = registry.completeness(entity)
    total = (
        weights.type * type_c
        + weights.constraints * constraints_c
        + weights.text * text_c
        + weights.completeness * completeness_c
    )
    components = {"type": type_c, "constraints": constraints_c, "text": text_c, "completeness": completeness_c}
    return MatchResult(entity.id, total, components, entity)


def query(
    spec: QuerySpec,
    snapshot,
    registry: SchemaRegistry | None = None,
    weights: Weights = Weights(),
) -> list[MatchResult]:
    registry = registry or default_registry()
    hits = [score(e, spec, registry, weights) for e in snapshot.entities.values()]
    hits = [h for h in hits if h.score >= spec.threshold]
    hits.sort(key=lambda h: (-h.score, h.id))
    return hits[spec.offset : spec.offset + spec.limit]


def _values_agree(a, b, snapshot) -> bool:
    if isinstance(a, Literal) and isinstance(b, Literal):
        if a.text.strip().lower() == b.text.strip().lower():
            return True
        return text_similarity(a.text, b.text) >= 0.8
    if isinstance(a, Reference) and isinstance(b, Reference):
        return snapshot.resolve(a.target) == snapshot.resolve(b.target)
    return False


def reconcile(
    partial: EntityDocument,
    snapshot,
    threshold: float = 0.6,
    registry: SchemaRegistry | None = None,
) -> MatchResult | None:
    """Best stored match for a partial description, by property agreement."""
    registry = registry or default_registry()
    if not partial.properties:
        raise ValueError("partial entity needs at least one property")
    best: MatchResult | None = None
    for ent in sorted(snapshot.entities.values(), key=lambda e: e.id):
        if partial.types and not registry.compatible(partial.types, ent.types or (registry.root,)):
            continue
        agreeing = sum(
            1
            for prop, values in partial.properties.items()
            if any(_values_agree(a, b, snapshot) for a in values for b in ent.get(prop))
        )
        overlap = agreeing / len(partial.properties)
        if best is None or overlap > best.score:
            best = MatchResult(ent.id, overlap, {"overlap": overlap}, ent)
    if best is not None and best.score >= threshold and best.score > 0:
        return best
    return None


def infer_types(entity: EntityDocument, registry: SchemaRegistry | None = None) -> list[tuple[str, float]]:
    registry = registry or default_registry()
    present = set(entity.properties)
    ranked = []
    for iri in registry.records:
        expected = registry.expected_properties(iri)
        confidence = len(present & expected) / len(expected)
        if confidence > 0:
            ranked.append((iri, confidence))
    ranked.sort(key=lambda item: (-item[1], -registry.depth(item[0]), item[0]))
    return ranked


def resolve_term(term: str) -> str:
    return canonicalize_iri(term, Context())


def parse_constraint(text: str) -> Constraint:
    """Decode ``property:op:value`` with op in eq, contains, lt, gt."""
    ops = {"eq": "equals", "contains": "contains-text", "lt": "less-than", "gt": "greater-than"}
    # property may itself be an absolute IRI containing colons; the value may contain anything
    m = _CONSTRAINT.match(text)
    if not m:
        raise QueryRejected(f"malformed constraint {text!r}; expected property:(eq|contains|lt|gt):value")
    prop, op, value = m.groups()
    return Constraint(resolve_term(prop), ops[op], value)


def encode_constraint(c: Constraint) -> str:
    short = {"equals": "eq", "contains-text": "contains", "less-than": "lt", "greater-than": "gt"}[c.comparator]
    return f"{c.property}:{short}:{c.value}"


def spec_items(spec: QuerySpec) -> Iterable[tuple[str, str]]:
    if spec.type:
        yield "type", spec.type
    if spec.text:
        yield "q", spec.text
    for c in spec.constraints:
        yield "where", encode_constraint(c)
    yield "limit", str(spec.limit)
    yield "offset", str(spec.offset)
    yield "threshold", repr(spec.threshold)
