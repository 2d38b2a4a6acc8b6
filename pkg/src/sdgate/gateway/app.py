"""HTTP surface: self-description, search, entity lookup and action execution."""

from __future__ import annotations

import json
import logging
import socket
import threading
import time
from dataclasses import dataclass
from typing import Any, Callable
from urllib.parse import unquote_plus

from starlette.applications import Starlette
from starlette.concurrency import run_in_threadpool
from starlette.requests import Request
from starlette.responses import JSONResponse, Response
from starlette.routing import Route

from ..model import SDG, IRIResolutionError
from ..registry import SchemaRegistry, default_registry
from ..retrieval import QueryRejected, QuerySpec, Weights, parse_constraint, query, resolve_term
from .actions import render_nested, rewrite_for_client
from .execute import ActionError, ActionExecutor, InputRejected

logger = logging.getLogger("sdgate.gateway")

JSONLD = "application/ld+json"
SEARCH_PARAMETERS = ("type", "q", "where", "limit", "offset", "threshold")
SDG_CONTEXT = {"@vocab": SDG}


@dataclass(frozen=True)
class GatewaySettings:
    api_root: str = "/api"
    mode: str = "proxy"
    subgraph_depth: int = 2
    threshold: float = 0.75
    public_url: str | None = None
    weights: Weights = Weights()

    def __post_init__(self) -> None:
        if self.mode not in ("proxy", "passthrough"):
            raise ValueError(f"gateway mode must be proxy or passthrough, not {self.mode!r}")


def describe_api(api_base: str) -> dict[str, Any]:
    api_base = api_base.rstrip("/")
    return {
        "@context": "https://schema.org",
        "@type": "WebAPI",
        "@id": f"{api_base}/describe",
        "name": "sdgate structured-data gateway",
        "url": api_base,
        "potentialAction": [
            {
                "@type": "SearchAction",
                "@id": f"{api_base}/describe#search",
                "target": {
                    "@type": "EntryPoint",
                    "urlTemplate": f"{api_base}/search{{?{','.join(SEARCH_PARAMETERS)}}}",
                    "httpMethod": "GET",
                    "contentType": JSONLD,
                },
                "query-input": "name=q",
            },
            {
                "@type": "Action",
                "@id": f"{api_base}/describe#execute",
                "name": "execute",
                "description": "Invoke a discovered action by id; POST a JSON object of named inputs.",
                "target": {
                    "@type": "EntryPoint",
                    "urlTemplate": f"{api_base}/actions/{{actionId}}/execute",
                    "httpMethod": "POST",
                    "contentType": JSONLD,
                },
                "actionId-input": "required name=actionId",
            },
        ],
    }


def error_body(code: str, message: str, field: str | None = None) -> dict[str, Any]:
    body = {"@context": SDG_CONTEXT, "@type": "Error", "code": code, "message": message}
    if field is not None:
        body["field"] = field
    return body


def _error(status: int, code: str, message: str, field: str | None = None) -> JSONResponse:
    return JSONResponse(error_body(code, message, field), status_code=status, media_type=JSONLD)


def parse_search_query(raw: str, default_threshold: float = 0.75) -> QuerySpec:
    """Decode a search query string.

    ``where`` may repeat or carry a comma-separated list (the form produced by
    the advertised URI template); commas inside a value must be percent-encoded.
    """
    single: dict[str, str] = {}
    where: list[str] = []
    for pair in filter(None, raw.split("&")):
        name, _, value = pair.partition("=")
        name = unquote_plus(name)
        if name not in SEARCH_PARAMETERS:
            raise QueryRejected(f"unknown search parameter {name!r}")
        if name == "where":
            where.extend(unquote_plus(v) for v in value.split(",") if v)
        elif name in single:
            raise QueryRejected(f"parameter {name!r} given more than once")
        else:
            single[name] = unquote_plus(value)

    def number(name: str, kind, default):
        if name not in single or single[name] == "":
            return default
        try:
            return kind(single[name])
        except ValueError:
            raise QueryRejected(f"{name} must be a {kind.__name__}") from None

    try:
        type_iri = resolve_term(single["type"]) if single.get("type") else None
    except IRIResolutionError as exc:
        raise QueryRejected(f"cannot resolve type {single['type']!r}: {exc}") from None
    return QuerySpec(
        type=type_iri,
        constraints=tuple(parse_constraint(w) for w in where),
        text=single.get("q") or None,
        limit=number("limit", int, 10),
        offset=number("offset", int, 0),
        threshold=number("threshold", float, default_threshold),
    )


def create_app(
    snapshot_source: Callable[[], Any],
    settings: GatewaySettings = GatewaySettings(),
    *,
    registry: SchemaRegistry | None = None,
    executor: ActionExecutor | None = None,
) -> Starlette:
    registry = registry or default_registry()
    executor = executor or ActionExecutor(snapshot_source)
    root = "/" + settings.api_root.strip("/") if settings.api_root.strip("/") else ""

    def api_base(request: Request) -> str:
        if settings.public_url:
            return settings.public_url.rstrip("/") + root
        return str(request.base_url).rstrip("/") + root

    def ld(payload: Any, status: int = 200) -> JSONResponse:
        return JSONResponse(payload, status_code=status, media_type=JSONLD)

    def describe(request: Request) -> Response:
        return ld(describe_api(api_base(request)))

    def search(request: Request) -> Response:
        try:
            spec = parse_search_query(request.url.query, settings.threshold)
        except QueryRejected as exc:
            field = exc.constraint.property if exc.constraint else None
            return _error(400, "bad-query", str(exc), field)
        snapshot = snapshot_source()
        hits = query(spec, snapshot, registry, settings.weights)
        base = api_base(request)
        items = []
        for position, hit in enumerate(hits, start=spec.offset + 1):
            doc = rewrite_for_client(render_nested(hit.id, snapshot, settings.subgraph_depth), snapshot,
                                     settings.mode, base)
            items.append({
                "@type": "ListItem",
                "position": position,
                SDG + "score": round(hit.score, 12),
                SDG + "components": {k: round(v, 12) for k, v in hit.components.items()},
                "item": doc,
            })
        return ld({
            "@context": "https://schema.org",
            "@type": "ItemList",
            "numberOfItems": len(items),
            "itemListElement": items,
        })

    def entity(request: Request) -> Response:
        identifier = request.path_params["identifier"]
        snapshot = snapshot_source()
        if snapshot.get(identifier) is None:
            return _error(404, "not-found", f"no entity {identifier!r}")
        doc = render_nested(identifier, snapshot, settings.subgraph_depth)
        return ld(rewrite_for_client(doc, snapshot, settings.mode, api_base(request)))

    def execute(action_id: str, text: str) -> Response:
        try:
            inputs = json.loads(text) if text.strip() else {}
        except ValueError:
            return _error(400, "bad-request", "request body must be a JSON object of inputs")
        if not isinstance(inputs, dict):
            return _error(400, "bad-request", "request body must be a JSON object of inputs")
        inputs = {k: v for k, v in inputs.items() if not k.startswith("@")}
        try:
            result = executor.execute(action_id, inputs)
        except InputRejected as exc:
            return _error(exc.status, exc.code, exc.message, exc.field)
        except ActionError as exc:
            return _error(exc.status, exc.code, exc.message)
        body = result.body.decode("utf-8", errors="replace")
        envelope = {
            "@context": SDG_CONTEXT,
            "@type": "ActionRelay",
            "actionId": result.action_id,
            "originMethod": result.request.method,
            "originUrl": result.request.url,
            "originStatus": result.status,
            "originContentType": result.content_type,
            "originBody": body,
        }
        return ld(envelope, status=result.status)

    async def execute_endpoint(request: Request) -> Response:
        text = (await request.body()).decode("utf-8", errors="replace")
        # origin calls block, so keep them off the event loop
        return await run_in_threadpool(execute, request.path_params["action_id"], text)

    routes = [
        Route(f"{root}/describe", describe, methods=["GET"]),
        Route(f"{root}/search", search, methods=["GET"]),
        Route(f"{root}/entities/{{identifier:path}}", entity, methods=["GET"]),
        Route(f"{root}/actions/{{action_id}}/execute", execute_endpoint, methods=["POST"]),
    ]
    app = Starlette(routes=routes)
    app.state.executor = executor
    return app


class GatewayServer:
    """Run the gateway with uvicorn on a background thread (tests, demos)."""

    def __init__(self, app: Starlette, host: str = "127.0.0.1", port: int = 0):
        import uvicorn

        if port == 0:
            with socket.socket() as s:
                s.bind((host, 0))
                port = s.getsockname()[1]
        self.host, self.port = host, port
        self.server = uvicorn.Server(uvicorn.Config(app, host=host, port=port, log_level="warning", lifespan="off"))
        self.thread = threading.Thread(target=self.server.run, daemon=True)

    @property
    def url(self) -> str:
        return f"http://{self.host}:{self.port}"

    def __enter__(self) -> "GatewayServer":
        self.thread.start()
        deadline = time.monotonic() + 10
        while not self.server.started:
            if time.monotonic() > deadline or not self.thread.is_alive():
                raise RuntimeError("gateway failed to start")
            time.sleep(0.01)
        return self

    def __exit__(self, *exc) -> None:
        self.server.should_exit = True
        self.thread.join(timeout=10)
