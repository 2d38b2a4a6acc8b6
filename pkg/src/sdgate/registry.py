"""Embedded schema.org type registry: hierarchy, expected and identifying properties."""

from __future__ import annotations

import functools
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Iterable

import yaml

from .model import Context, EntityDocument, canonicalize_iri


class RegistryError(ValueError):
    pass


@dataclass(frozen=True)
class TypeRecord:
    iri: str
    parents: tuple[str, ...]
    expected: frozenset[str]
    identifying: frozenset[str]


class SchemaRegistry:
    def __init__(self, records: Iterable[TypeRecord], root: str, functional: Iterable[str] = (), version: str = ""):
        self.records = {r.iri: r for r in records}
        self.root = root
        self.functional = frozenset(functional)
        self.version = version
        if root not in self.records:
            raise RegistryError(f"root type {root} missing from registry")
        self._ancestors: dict[str, frozenset[str]] = {}
        self._depth: dict[str, int] = {}
        for iri in self.records:
            self._ancestors[iri] = self._closure(iri, ())
        for iri, rec in self.records.items():
            if self.root not in self._ancestors[iri]:
                raise RegistryError(f"{iri} does not reach {root}")
            if not rec.expected:
                raise RegistryError(f"{iri} has an empty expected-property set")

    def _closure(self, iri: str, path: tuple[str, ...]) -> frozenset[str]:
        if iri in path:
            raise RegistryError(f"cycle in type hierarchy through {iri}")
        if iri in self._ancestors:
            return self._ancestors[iri]
        rec = self.records.get(iri)
        if rec is None:
            raise RegistryError(f"unknown parent type {iri}")
        out = {iri}
        depth = 0
        for parent in rec.parents:
            out |= self._closure(parent, path + (iri,))
            depth = max(depth, self._depth[parent] + 1)
        self._depth[iri] = depth
        result = frozenset(out)
        self._ancestors[iri] = result
        return result

    def __contains__(self, iri: str) -> bool:
        return iri in self.records

    def ancestors(self, iri: str) -> frozenset[str]:
        """Reflexive ancestor set; unknown types hang directly under the root."""
        if iri in self._ancestors:
            return self._ancestors[iri]
        return frozenset({iri, self.root})

    def depth(self, iri: str) -> int:
        return self._depth.get(iri, 1)

    def type_subsumes(self, ancestor: str, descendant: str) -> bool:
        return ancestor in self.ancestors(descendant)

    def compatible(self, types_a: Iterable[str], types_b: Iterable[str]) -> bool:
        """True when some pair of types is related by subsumption either way."""
        types_b = list(types_b)
        return any(
            self.type_subsumes(a, b) or self.type_subsumes(b, a) for a in types_a for b in types_b
        )

    def expected_properties(self, iri: str) -> frozenset[str]:
        if iri not in self.records:
            iri = self.root
        out: set[str] = set()
        for anc in self.ancestors(iri):
            out |= self.records[anc].expected
        return frozenset(out)

    def identifying_properties(self, iri: str) -> frozenset[str]:
        out: set[str] = set()
        for anc in self.ancestors(iri):
            if anc in self.records:
                out |= self.records[anc].identifying
        return frozenset(out)

    def most_specific(self, types: Iterable[str]) -> str:
        known = [t for t in types if t in self.records]
        if not known:
            return self.root
        deepest = max(self.depth(t) for t in known)
        return min(t for t in known if self.depth(t) == deepest)

    def completeness(self, entity: EntityDocument) -> float:
        expected = self.expected_properties(self.most_specific(entity.types))
        present = expected & entity.properties.keys()
        return len(present) / len(expected)

    def is_functional(self, prop: str) -> bool:
        return prop in self.functional


def load_registry(path: str | Path | None = None) -> SchemaRegistry:
    if path is None:
        text = resources.files("sdgate").joinpath("data/registry.yaml").read_text(encoding="utf-8")
    else:
        text = Path(path).read_text(encoding="utf-8")
    data = yaml.safe_load(text)
    ctx = Context(vocab=data.get("base", "https://schema.org/"))

    def iri(term: str) -> str:
        return canonicalize_iri(term, ctx)

    records = [
        TypeRecord(
            iri=iri(rec["type"]),
            parents=tuple(iri(p) for p in rec.get("parents", [])),
            expected=frozenset(iri(p) for p in rec.get("expected", [])),
            identifying=frozenset(iri(p) for p in rec.get("identifying", [])),
        )
        for rec in data["types"]
    ]
    return SchemaRegistry(
        records,
        root=iri(data.get("root", "Thing")),
        functional=[iri(p) for p in data.get("functional", [])],
        version=str(data.get("version", "")),
    )


@functools.lru_cache(maxsize=1)
def default_registry() -> SchemaRegistry:
    return load_registry()


def type_subsumes(ancestor: str, descendant: str, registry: SchemaRegistry | None = None) -> bool:
    return (registry or default_registry()).type_subsumes(ancestor, descendant)


def expected_properties(iri: str, registry: SchemaRegistry | None = None) -> frozenset[str]:
    return (registry or default_registry()).expected_properties(iri)


def completeness(entity: EntityDocument, registry: SchemaRegistry | None = None) -> float:
    return (registry or default_registry()).completeness(entity)
