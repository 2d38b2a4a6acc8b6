"""URI Template expansion (RFC 6570) for simple-string and form-style query expressions.

Supported expressions: ``{var}``, ``{?var}`` and ``{&var}``, each with
multiple variables, prefix modifiers (``:n``) and explode (``*``), over
string, list and associative-array values.  Other operators are rejected.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Any, Iterable, Mapping
from urllib.parse import quote

_EXPRESSION = re.compile(r"\{([^{}]*)\}")
_VARSPEC = re.compile(r"^((?:[A-Za-z0-9_]|%[0-9A-Fa-f]{2})(?:\.?(?:[A-Za-z0-9_]|%[0-9A-Fa-f]{2}))*)(?::([1-9][0-9]{0,3})|(\*))?$")
_UNRESERVED = "-._~"
OPERATORS = {"": ("", ",", False), "?": ("?", "&", True), "&": ("&", "&", True)}


class TemplateError(ValueError):
    pass


class MissingVariable(TemplateError):
    def __init__(self, name: str):
        super().__init__(f"missing required template variable {name!r}")
        self.name = name


@dataclass(frozen=True)
class VarSpec:
    name: str
    prefix: int | None = None
    explode: bool = False


@dataclass(frozen=True)
class Expression:
    operator: str
    variables: tuple[VarSpec, ...]


def parse_template(template: str) -> list[str | Expression]:
    parts: list[str | Expression] = []
    pos = 0
    for match in _EXPRESSION.finditer(template):
        literal = template[pos : match.start()]
        if "{" in literal or "}" in literal:
            raise TemplateError(f"unbalanced brace in {template!r}")
        if literal:
            parts.append(literal)
        body = match.group(1)
        op = body[:1] if body[:1] in "+#./;?&=,!@|" else ""
        if op not in OPERATORS:
            raise TemplateError(f"unsupported operator {op!r} in {match.group(0)!r}")
        specs = []
        for raw in body[len(op):].split(","):
            m = _VARSPEC.match(raw)
            if not m:
                raise TemplateError(f"bad variable specification {raw!r} in {match.group(0)!r}")
            specs.append(VarSpec(m.group(1), int(m.group(2)) if m.group(2) else None, bool(m.group(3))))
        parts.append(Expression(op, tuple(specs)))
        pos = match.end()
    tail = template[pos:]
    if "{" in tail or "}" in tail:
        raise TemplateError(f"unbalanced brace in {template!r}")
    if tail:
        parts.append(tail)
    return parts


def template_variables(template: str) -> list[str]:
    names: list[str] = []
    for part in parse_template(template):
        if isinstance(part, Expression):
            names.extend(v.name for v in part.variables if v.name not in names)
    return names


def _encode(value: str) -> str:
    return quote(value, safe=_UNRESERVED)


def _encode_literal(text: str) -> str:
    # literals keep reserved characters and existing pct-encodings
    return quote(text, safe=":/?#[]@!$&'()*+,;=-._~%")


def _is_defined(value: Any) -> bool:
    if value is None:
        return False
    if isinstance(value, (list, tuple)):
        return len(value) > 0
    if isinstance(value, Mapping):
        return len(value) > 0
    return True


def _expand_expression(expr: Expression, values: Mapping[str, Any]) -> str:
    first, sep, named = OPERATORS[expr.operator]
    pieces = []
    for spec in expr.variables:
        value = values.get(spec.name)
        if not _is_defined(value):
            continue
        if isinstance(value, (str, int, float)):
            text = str(value)
            if spec.prefix is not None:
                text = text[: spec.prefix]
            text = _encode(text)
            pieces.append(f"{spec.name}={text}" if named else text)
            continue
        if spec.prefix is not None:
            raise TemplateError(f"prefix modifier not applicable to composite value {spec.name!r}")
        if isinstance(value, Mapping):
            items = [(str(k), str(v)) for k, v in value.items()]
            if spec.explode:
                pieces.append(sep.join(f"{_encode(k)}={_encode(v)}" for k, v in items))
            else:
                joined = ",".join(f"{_encode(k)},{_encode(v)}" for k, v in items)
                pieces.append(f"{spec.name}={joined}" if named else joined)
        else:
            items = [str(v) for v in value]
            if spec.explode:
                if named:
                    pieces.append(sep.join(f"{spec.name}={_encode(v)}" for v in items))
                else:
                    pieces.append(sep.join(_encode(v) for v in items))
            else:
                joined = ",".join(_encode(v) for v in items)
                pieces.append(f"{spec.name}={joined}" if named else joined)
    if not pieces:
        return ""
    return first + sep.join(pieces)


def expand_template(template: str, inputs: Mapping[str, Any], required: Iterable[str] = ()) -> str:
    """Expand ``template`` with ``inputs``; raise :class:`MissingVariable` for absent required names."""
    parts = parse_template(template)
    present = set(template_variables(template))
    for name in required:
        if name in present and not _is_defined(inputs.get(name)):
            raise MissingVariable(name)
    out = []
    for part in parts:
        out.append(_expand_expression(part, inputs) if isinstance(part, Expression) else _encode_literal(part))
    return "".join(out)
