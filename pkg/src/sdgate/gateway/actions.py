"""schema.org Action discovery and client-facing document rendering."""

from __future__ import annotations

import datetime as dt
import hashlib
import logging
import re
from dataclasses import dataclass, field
from typing import Any, Mapping
from urllib.parse import urlsplit

from ..model import (
    SCHEMA,
    SDG,
    EntityDocument,
    Literal,
    ProvenanceRecord,
    Reference,
    Structured,
    Value,
    compact_iri,
    schema,
    to_document,
    value_to_json,
)
from .templates import TemplateError, expand_template, template_variables

logger = logging.getLogger("sdgate.gateway")

POTENTIAL_ACTION = schema("potentialAction")
TARGET = schema("target")
URL_TEMPLATE = schema("urlTemplate")
HTTP_METHOD = schema("httpMethod")
ENCODING_TYPE = schema("encodingType")
CONTENT_TYPE = schema("contentType")
ACTION_ID_KEY = SDG + "actionId"

FORM_ENCODING = "application/x-www-form-urlencoded"

# Value-type checks for action inputs, keyed by the annotated property.
_DATE_PROPERTIES = {schema(p) for p in ("startTime", "endTime", "startDate", "endDate", "checkinTime", "checkoutTime", "scheduledTime")}
_NUMBER_PROPERTIES = {schema(p) for p in ("price", "numberOfRooms", "numberOfGuests", "partySize")}


@dataclass(frozen=True)
class InputSpec:
    name: str
    property: str
    required: bool = False
    value_type: str = "text"  # text | number | date

    def check(self, value: Any) -> str | None:
        """Return a problem description, or None when ``value`` is acceptable."""
        text = str(value)
        if self.value_type == "number":
            try:
                float(text)
            except ValueError:
                return f"{self.name} must be a number"
        elif self.value_type == "date":
            try:
                dt.datetime.fromisoformat(text)
            except ValueError:
                return f"{self.name} must be an ISO 8601 date"
        return None


@dataclass(frozen=True)
class ActionDescriptor:
    id: str
    action_type: str
    url_template: str
    method: str
    encoding: str
    inputs: Mapping[str, InputSpec]
    outputs: tuple[str, ...]
    owner: str
    action_entity: str | None
    provenance: tuple[ProvenanceRecord, ...] = field(default=(), compare=False)

    @property
    def host(self) -> str:
        return urlsplit(self.url_template.split("{", 1)[0]).netloc.lower()

    @property
    def required(self) -> list[str]:
        return [n for n, spec in self.inputs.items() if spec.required]


def action_id(owner: str, action_type: str, template: str) -> str:
    return hashlib.sha256(f"{owner}|{action_type}|{template}".encode()).hexdigest()[:16]


_ANNOTATION_TOKEN = re.compile(r"(\w+)(?:=(\S*))?")


def parse_input_annotation(text: str) -> tuple[bool, str | None]:
    """Parse the textual shorthand ``"required name=room"``."""
    required, name = False, None
    for key, value in _ANNOTATION_TOKEN.findall(text):
        if key == "required" and not value:
            required = True
        elif key == "name":
            name = value
    return required, name


def _first_literal(values) -> str | None:
    for v in values:
        if isinstance(v, Literal):
            return v.text
    return None


def _fields(value: Value, lookup) -> Mapping[str, tuple[Value, ...]] | None:
    if isinstance(value, Structured):
        return value.as_dict()
    if isinstance(value, Reference):
        target = lookup(value.target)
        return target.properties if target is not None else None
    return None


def _input_specs(action_props: Mapping[str, tuple[Value, ...]], lookup) -> dict[str, InputSpec]:
    specs = {}
    for key in sorted(action_props):
        if not key.endswith("-input"):
            continue
        prop = key[: -len("-input")]
        for value in action_props[key]:
            required, name = False, None
            if isinstance(value, Literal):
                required, name = parse_input_annotation(value.text)
            else:
                fields = _fields(value, lookup) or {}
                flag = _first_literal(fields.get(schema("valueRequired"), ()))
                required = (flag or "").strip().lower() in ("true", "1", "yes")
                name = _first_literal(fields.get(schema("valueName"), ()))
            name = name or prop.rsplit("/", 1)[-1]
            value_type = "date" if prop in _DATE_PROPERTIES else "number" if prop in _NUMBER_PROPERTIES else "text"
            specs[name] = InputSpec(name, prop, required, value_type)
    return specs


def _entry_point(value: Value, lookup) -> tuple[str, str, str] | None:
    """(template, method, encoding) for one ``target`` value."""
    if isinstance(value, Literal):
        return value.text.strip(), "GET", FORM_ENCODING
    if isinstance(value, Reference) and lookup(value.target) is None:
        return value.target, "GET", FORM_ENCODING
    fields = _fields(value, lookup)
    if fields is None:
        return None
    template = _first_literal(fields.get(URL_TEMPLATE, ()))
    if template is None:
        urls = fields.get(schema("url"), ())
        template = next((v.target for v in urls if isinstance(v, Reference)), None) or _first_literal(urls)
    if template is None:
        return None
    method = (_first_literal(fields.get(HTTP_METHOD, ())) or "GET").strip().upper()
    encoding = (
        _first_literal(fields.get(ENCODING_TYPE, ()))
        or _first_literal(fields.get(CONTENT_TYPE, ()))
        or FORM_ENCODING
    )
    return template.strip(), method, encoding.strip()


def _valid_template(template: str) -> bool:
    try:
        probe = expand_template(template, {v: "x" for v in template_variables(template)})
    except TemplateError:
        return False
    parts = urlsplit(probe)
    return parts.scheme in ("http", "https") and bool(parts.netloc)


def discover_actions(entity: EntityDocument, snapshot, diagnostics: list[str] | None = None) -> list[ActionDescriptor]:
    """Descriptors for every resolvable ``potentialAction`` of ``entity``."""
    lookup = snapshot.get if snapshot is not None else (lambda _id: None)
    diagnostics = diagnostics if diagnostics is not None else []
    out = []
    for value in entity.get(POTENTIAL_ACTION):
        action_entity = lookup(value.target) if isinstance(value, Reference) else None
        if action_entity is not None:
            props, types = action_entity.properties, action_entity.types
            provenance = action_entity.provenance
        elif isinstance(value, Structured):
            props, types, provenance = value.as_dict(), (), entity.provenance
        else:
            diagnostics.append(f"{entity.id}: potentialAction {value!r} cannot be resolved")
            continue
        action_type = types[0] if types else schema("Action")
        targets = props.get(TARGET, ())
        if not targets:
            diagnostics.append(f"{entity.id}: {compact_iri(action_type)} has no target")
            continue
        for target in targets:
            entry = _entry_point(target, lookup)
            if entry is None:
                diagnostics.append(f"{entity.id}: unresolvable target on {compact_iri(action_type)}")
                continue
            template, method, encoding = entry
            if method not in ("GET", "POST"):
                diagnostics.append(f"{entity.id}: unsupported method {method}")
                continue
            if not _valid_template(template):
                diagnostics.append(f"{entity.id}: invalid URL template {template!r}")
                continue
            inputs = _input_specs(props, lookup)
            for var in template_variables(template):
                inputs.setdefault(var, InputSpec(var, SCHEMA + var))
            outputs = tuple(sorted(k[: -len("-output")] for k in props if k.endswith("-output")))
            out.append(
                ActionDescriptor(
                    id=action_id(entity.id, action_type, template),
                    action_type=action_type,
                    url_template=template,
                    method=method,
                    encoding=encoding,
                    inputs=inputs,
                    outputs=outputs,
                    owner=entity.id,
                    action_entity=action_entity.id if action_entity is not None else None,
                    provenance=provenance,
                )
            )
    for message in diagnostics:
        logger.info("action discovery: %s", message)
    return out


def action_index(snapshot) -> dict[str, ActionDescriptor]:
    index = {}
    for ent in sorted(snapshot.entities.values(), key=lambda e: e.id):
        for desc in discover_actions(ent, snapshot):
            index.setdefault(desc.id, desc)
    return index


def allowed_hosts(snapshot) -> set[str]:
    """Hosts that served crawled pages; origins outside this set are never contacted."""
    hosts = set()
    for ent in snapshot.entities.values():
        for prov in ent.provenance:
            hosts.add(urlsplit(prov.url).netloc.lower())
    return hosts


# --- rendering ------------------------------------------------------------------


def render_nested(root_id: str, snapshot, depth: int) -> dict[str, Any]:
    """Re-nest the reference closure of ``root_id`` into a single schema.org object.

    References within ``depth`` hops are replaced by the referenced entity's
    document; deeper or cyclic references stay as ``{"@id": ...}``.
    """

    def render(eid: str, remaining: int, path: frozenset[str]) -> dict[str, Any]:
        ent = snapshot.get(eid)
        doc = to_document(ent)
        for key, values in ent.properties.items():
            rendered = [render_value(v, remaining, path | {ent.id}) for v in values]
            doc[compact_iri(key)] = rendered[0] if len(rendered) == 1 else rendered
        return doc

    def render_value(value: Value, remaining: int, path: frozenset[str]):
        if isinstance(value, Reference):
            target = snapshot.resolve(value.target)
            if remaining > 0 and target in snapshot.entities and target not in path:
                return render(target, remaining - 1, path)
            return value_to_json(value)
        if isinstance(value, Structured):
            return {
                compact_iri(k): _single([render_value(v, remaining, path) for v in vs]) for k, vs in value.fields
            }
        return value_to_json(value)

    return render(snapshot.resolve(root_id), depth, frozenset())


def _single(items: list) -> Any:
    return items[0] if len(items) == 1 else items


def gateway_entry_point(desc: ActionDescriptor, api_base: str) -> dict[str, Any]:
    return {
        "@type": ["EntryPoint"],
        "urlTemplate": f"{api_base.rstrip('/')}/actions/{desc.id}/execute",
        "httpMethod": "POST",
        "contentType": "application/ld+json",
        ACTION_ID_KEY: desc.id,
    }


def rewrite_for_client(doc: dict[str, Any], snapshot, mode: str, api_base: str) -> dict[str, Any]:
    """Rewrite every embedded action target for the chosen mode.

    In ``proxy`` mode targets point at the gateway's execute endpoint; in
    ``passthrough`` mode the stored origin entry points are kept verbatim.
    """
    if mode == "passthrough":
        return doc
    if mode != "proxy":
        raise ValueError(f"unknown gateway mode {mode!r}")

    def walk(node: Any) -> Any:
        if isinstance(node, list):
            return [walk(n) for n in node]
        if not isinstance(node, dict):
            return node
        node = {k: walk(v) for k, v in node.items()}
        owner_id = node.get("@id")
        actions = node.get("potentialAction")
        if owner_id is None or actions is None:
            return node
        owner = snapshot.get(owner_id)
        if owner is None:
            return node
        by_entity: dict[str | None, list[ActionDescriptor]] = {}
        for desc in discover_actions(owner, snapshot):
            by_entity.setdefault(desc.action_entity, []).append(desc)
        rewritten = []
        for action_doc in actions if isinstance(actions, list) else [actions]:
            if isinstance(action_doc, dict) and "target" in action_doc:
                descs = by_entity.get(action_doc.get("@id"), [])
                if descs:
                    action_doc = dict(action_doc)
                    action_doc["target"] = _single([gateway_entry_point(d, api_base) for d in descs])
            rewritten.append(action_doc)
        node["potentialAction"] = _single(rewritten)
        return node

    return walk(doc)
