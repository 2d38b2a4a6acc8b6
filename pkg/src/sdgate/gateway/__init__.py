"""Action discovery, URI templates and the HTTP gateway."""

from .actions import (
    ActionDescriptor,
    InputSpec,
    action_id,
    action_index,
    allowed_hosts,
    discover_actions,
    gateway_entry_point,
    parse_input_annotation,
    render_nested,
    rewrite_for_client,
)
from .app import GatewayServer, GatewaySettings, create_app, describe_api, parse_search_query
from .execute import (
    ActionError,
    ActionExecutor,
    ExecutionLog,
    ExecutionRecord,
    InputRejected,
    OriginNotAllowed,
    OriginRequest,
    UnknownAction,
    UpstreamError,
    build_origin_request,
    validate_inputs,
)
from .templates import MissingVariable, TemplateError, expand_template, parse_template, template_variables

__all__ = [
    "ActionDescriptor",
    "ActionError",
    "ActionExecutor",
    "ExecutionLog",
    "ExecutionRecord",
    "GatewayServer",
    "GatewaySettings",
    "InputRejected",
    "InputSpec",
    "MissingVariable",
    "OriginNotAllowed",
    "OriginRequest",
    "TemplateError",
    "UnknownAction",
    "UpstreamError",
    "action_id",
    "action_index",
    "allowed_hosts",
    "build_origin_request",
    "create_app",
    "describe_api",
    "discover_actions",
    "expand_template",
    "gateway_entry_point",
    "parse_input_annotation",
    "parse_search_query",
    "parse_template",
    "render_nested",
    "rewrite_for_client",
    "template_variables",
    "validate_inputs",
]
