from __future__ import annotations

import itertools
from urllib.parse import urljoin

from ..model import (
    EntityDocument,
    IRIResolutionError,
    Literal,
    ProvenanceRecord,
    Reference,
    Structured,
    Value,
    dedupe,
    normalize_iri,
)
from .nodes import DiagnosticSink, RawIRI, RawLiteral, RawNode, RawValue, TermContext


def expand(node: RawNode, base: str, diagnostics: DiagnosticSink | None = None) -> RawNode:
    """Return a copy of ``node`` whose types and property keys are absolute IRIs."""
    diagnostics = diagnostics if diagnostics is not None else DiagnosticSink(base)
    ctx = node.context or TermContext(base=base)
    types = []
    for term in node.types:
        try:
            types.append(ctx.resolve(term))
        except IRIResolutionError:
            diagnostics.add(node.syntax, f"unresolvable type {term!r}", node.location)
    props: dict[str, list[RawValue]] = {}
    for key, values in node.properties.items():
        try:
            iri = ctx.resolve(key)
        except IRIResolutionError:
            diagnostics.add(node.syntax, f"unresolvable property {key!r}; dropped", node.location)
            continue
        coerce = ctx.coerces_id(key)
        out = props.setdefault(iri, [])
        for value in values:
            out.append(_expand_value(value, ctx, coerce, base, diagnostics))
    return RawNode(
        id=node.id,
        types=types,
        properties=props,
        syntax=node.syntax,
        index=node.index,
        context=None,
        location=node.location,
    )


def _expand_value(value: RawValue, ctx: TermContext, coerce: bool, base: str, diagnostics: DiagnosticSink) -> RawValue:
    if isinstance(value, RawNode):
        return expand(value, base, diagnostics)
    if isinstance(value, RawIRI):
        return RawIRI(normalize_iri(value.iri))
    if coerce and value.plain:
        return RawIRI(normalize_iri(urljoin(ctx.base or base, value.text)))
    datatype = value.datatype
    if datatype is not None:
        try:
            datatype = ctx.resolve(datatype)
        except IRIResolutionError:
            datatype = None
    return RawLiteral(value.text, datatype, value.language)


def flatten(nodes: list[RawNode], provenance: ProvenanceRecord) -> list[EntityDocument]:
    """Split expanded trees into one entity per typed or identified node.

    Blank nodes get page-local surrogate ids ``_:<syntax>-<n>`` assigned in
    document order; nodes sharing an explicit id are merged.
    """
    counter = itertools.count()
    labels: dict[str, str] = {}
    order: list[str] = []
    types: dict[str, list[str]] = {}
    props: dict[str, dict[str, list[Value]]] = {}

    def surrogate() -> str:
        return f"_:{provenance.syntax}-{next(counter)}"

    def node_id(node: RawNode) -> str:
        if node.id is None:
            return surrogate()
        if node.id.startswith("_:"):
            if node.id not in labels:
                labels[node.id] = surrogate()
            return labels[node.id]
        return node.id

    def visit(node: RawNode) -> str:
        nid = node_id(node)
        if nid not in props:
            order.append(nid)
            types[nid] = []
            props[nid] = {}
        for t in node.types:
            if t not in types[nid]:
                types[nid].append(t)
        for key, values in node.properties.items():
            bucket = props[nid].setdefault(key, [])
            for value in values:
                converted = convert(value)
                if converted not in bucket:
                    bucket.append(converted)
        return nid

    def convert(value: RawValue) -> Value:
        if isinstance(value, RawLiteral):
            return Literal(value.text, value.datatype, value.language)
        if isinstance(value, RawIRI):
            target = value.iri
            if target.startswith("_:"):
                target = labels.setdefault(target, surrogate())
            return Reference(target)
        if value.id is not None or value.types:
            return Reference(visit(value))
        return Structured(tuple((k, dedupe(convert(v) for v in vs)) for k, vs in value.properties.items()))

    for node in nodes:
        visit(node)

    return [
        EntityDocument(
            id=nid,
            types=tuple(types[nid]),
            properties={k: tuple(v) for k, v in props[nid].items() if v},
            provenance=(provenance,),
        )
        for nid in order
    ]
