"""Operator configuration: YAML file with a documented default for every key."""

from __future__ import annotations

import dataclasses
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import yaml

from .crawler import CrawlSettings, PolitenessPolicy
from .crawler.schedule import DEFAULT_INTERVALS, VOLATILITY_CLASSES
from .gateway import GatewaySettings
from .retrieval import Weights

CONFIG_ENV = "SDGATE_CONFIG"


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class Politeness:
    delay: float = 1.0  # seconds between request starts to one host
    user_agent: str = PolitenessPolicy.user_agent
    timeout: float = 10.0
    max_redirects: int = 5
    backoff_base: float = 60.0  # first retry delay after a transient error
    backoff_cap: float = 3600.0
    respect_robots: bool = True


@dataclass(frozen=True)
class Crawl:
    depth: int = 1
    budget: int = 200  # pages per source per run
    workers: int = 1
    loop_interval: float = 60.0  # seconds between planning cycles in --loop


@dataclass(frozen=True)
class Retrieval:
    weights: dict[str, float] = field(default_factory=lambda: dataclasses.asdict(Weights()))
    threshold: float = 0.75
    reconcile_threshold: float = 0.6


@dataclass(frozen=True)
class Gateway:
    host: str = "127.0.0.1"
    port: int = 8080
    api_root: str = "/api"
    mode: str = "proxy"
    subgraph_depth: int = 2
    public_url: str | None = None
    rate_limit_delay: float = 1.0  # per-origin spacing of executed actions


@dataclass(frozen=True)
class Config:
    data_dir: str = "sdgate-data"
    sources: str | None = None  # default: <data_dir>/sources.yaml
    intervals: dict[str, float] = field(default_factory=lambda: dict(DEFAULT_INTERVALS))
    politeness: Politeness = Politeness()
    crawl: Crawl = Crawl()
    retrieval: Retrieval = Retrieval()
    gateway: Gateway = Gateway()

    @property
    def data_path(self) -> Path:
        return Path(self.data_dir)

    @property
    def sources_path(self) -> Path:
        return Path(self.sources) if self.sources else self.data_path / "sources.yaml"

    @property
    def store_path(self) -> Path:
        return self.data_path / "store"

    @property
    def state_path(self) -> Path:
        return self.data_path / "crawl_state.json"

    @property
    def crawl_log_path(self) -> Path:
        return self.data_path / "crawl_log.jsonl"

    @property
    def execution_log_path(self) -> Path:
        return self.data_path / "executions.jsonl"

    def weights(self) -> Weights:
        return Weights(**self.retrieval.weights)

    def crawl_settings(self) -> CrawlSettings:
        return CrawlSettings(
            intervals=dict(self.intervals),
            policy=PolitenessPolicy(**dataclasses.asdict(self.politeness)),
            depth=self.crawl.depth,
            budget=self.crawl.budget,
            workers=self.crawl.workers,
        )

    def gateway_settings(self) -> GatewaySettings:
        g = self.gateway
        return GatewaySettings(g.api_root, g.mode, g.subgraph_depth, self.retrieval.threshold, g.public_url,
                               self.weights())


_SECTIONS = {"politeness": Politeness, "crawl": Crawl, "retrieval": Retrieval, "gateway": Gateway}


def _build(cls, data: Any, where: str):
    if not isinstance(data, dict):
        raise ConfigError(f"{where} must be a mapping")
    names = {f.name for f in dataclasses.fields(cls)}
    unknown = sorted(set(data) - names)
    if unknown:
        raise ConfigError(f"unknown key(s) in {where}: {', '.join(unknown)}")
    kwargs = {}
    for key, value in data.items():
        if key in _SECTIONS and cls is Config:
            value = _build(_SECTIONS[key], {} if value is None else value, key)
        kwargs[key] = value
    return cls(**kwargs)


def from_dict(data: dict[str, Any]) -> Config:
    config = _build(Config, data or {}, "config")
    validate(config)
    return config


def validate(config: Config) -> None:
    if set(config.intervals) != set(VOLATILITY_CLASSES):
        raise ConfigError(f"intervals must define exactly {VOLATILITY_CLASSES}")
    if any(v <= 0 for v in config.intervals.values()):
        raise ConfigError("intervals must be positive")
    if config.politeness.delay < 0:
        raise ConfigError("politeness.delay must be non-negative")
    if config.crawl.depth < 0 or config.crawl.budget < 1 or config.crawl.workers < 1:
        raise ConfigError("crawl.depth >= 0, crawl.budget >= 1 and crawl.workers >= 1 are required")
    if config.gateway.mode not in ("proxy", "passthrough"):
        raise ConfigError("gateway.mode must be proxy or passthrough")
    if not 0 <= config.retrieval.threshold <= 1:
        raise ConfigError("retrieval.threshold must lie in [0, 1]")
    try:
        config.weights()
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"retrieval.weights: {exc}") from None


def to_dict(config: Config) -> dict[str, Any]:
    return dataclasses.asdict(config)


def dump_config(config: Config) -> str:
    return yaml.safe_dump(to_dict(config), sort_keys=False)


def load_config(path: str | Path | None = None) -> Config:
    """Load ``path``, else ``$SDGATE_CONFIG``, else built-in defaults."""
    path = path or os.environ.get(CONFIG_ENV)
    if not path:
        return Config()
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file {path} does not exist")
    try:
        data = yaml.safe_load(path.read_text(encoding="utf-8"))
    except yaml.YAMLError as exc:
        raise ConfigError(f"{path}: {exc}") from None
    return from_dict(data or {})


def with_overrides(config: Config, **sections: dict[str, Any]) -> Config:
    changes = {}
    for name, values in sections.items():
        values = {k: v for k, v in values.items() if v is not None}
        if values:
            changes[name] = dataclasses.replace(getattr(config, name), **values)
    return dataclasses.replace(config, **changes)
