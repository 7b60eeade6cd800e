"""Run configuration: TOML parsing, env-var interpolation, provider factories.

Every CLI flag has a config-file equivalent; flags override file values.
Secrets never live in the file: string values may reference environment
variables as ``${VAR_NAME}`` and are interpolated at load time.
"""
from __future__ import annotations

import json
import os
import re
import sys
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Mapping

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .core import Modeling, ReasoningStrategy
from .llmclient import MockProvider, OpenAIChatProvider, PriceConfig, Provider, ProviderConfig
from .prompt import PromptBundle
from .viz import Detail, RenderMode


class ConfigError(Exception):
    pass


_ENV_PATTERN = re.compile(r"\$\{([A-Za-z_][A-Za-z0-9_]*)\}")


def _interpolate(value: Any) -> Any:
    if isinstance(value, str):
        def repl(match: re.Match) -> str:
            name = match.group(1)
            if name not in os.environ:
                raise ConfigError(f"config references unset environment variable {name}")
            return os.environ[name]

        return _ENV_PATTERN.sub(repl, value)
    if isinstance(value, list):
        return [_interpolate(v) for v in value]
    if isinstance(value, dict):
        return {k: _interpolate(v) for k, v in value.items()}
    return value


@dataclass(frozen=True)
class ProviderEntry:
    """One provider profile: a live endpoint or a scripted mock."""

    kind: str  # "openai" | "mock"
    config: ProviderConfig
    script_file: Path | None = None

    def __post_init__(self) -> None:
        if self.kind not in ("openai", "mock"):
            raise ConfigError(f"provider kind must be openai|mock, got {self.kind!r}")
        if self.kind == "mock" and self.script_file is None:
            raise ConfigError("mock providers need a script_file")

    def build(self) -> Provider:
        if self.kind == "openai":
            return OpenAIChatProvider(self.config)
        return build_mock_from_script_file(self.script_file)


def build_mock_from_script_file(path: Path) -> MockProvider:
    """Build a task-keyed mock from a JSON script file.

    Schema: ``{"plans": {task: response}, "answers": {task: response | [..]}}``.
    Planning bundles replay ``plans[task]``; answer bundles replay
    ``answers[task]`` (lists are consumed per task in request order).
    """
    raw = json.loads(Path(path).read_text(encoding="utf-8"))
    plans: Mapping[str, str] = raw.get("plans", {})
    answers: Mapping[str, Any] = raw.get("answers", {})

    def fingerprint(bundle: PromptBundle) -> str:
        purpose = "plan" if bundle.strategy is None else "answer"
        return f"{purpose}:{bundle.task}"

    script: dict[str, Any] = {}
    for task, response in plans.items():
        script[f"plan:{task}"] = response
    for task, response in answers.items():
        script[f"answer:{task}"] = response
    if not script:
        raise ConfigError(f"{path}: mock script has neither plans nor answers")
    return MockProvider(script, fingerprint=fingerprint)


@dataclass(frozen=True)
class RenderOverrides:
    """Optional overrides applied on top of each task's default render config."""

    width_px: int | None = None
    height_px: int | None = None
    show_legend: bool | None = None
    show_timestamps: bool | None = None
    colormap: str | None = None
    detail: Detail | None = None
    stft_window_len: int | None = None
    stft_hop: int | None = None


@dataclass(frozen=True)
class RunConfig:
    """Everything one evaluation run needs; see ``load_run_config``."""

    tasks: tuple[str, ...]
    dataset_dirs: dict[str, Path]
    providers: tuple[ProviderEntry, ...]
    strategies: tuple[ReasoningStrategy, ...] = (ReasoningStrategy.zst(),)
    modelings: tuple[Modeling, ...] = (Modeling.NUMERIC,)
    per_class: int = 2
    runs: int = 3
    seed: int = 0
    retry_cap: int = 5
    precision: int = 4
    output_dir: Path = Path("results")
    plans_dir: Path | None = None
    render: RenderOverrides = field(default_factory=RenderOverrides)
    skip_planning: bool = False
    plan_fallback: RenderMode | None = None
    max_abstentions: int | None = None

    def __post_init__(self) -> None:
        if self.runs < 1:
            raise ConfigError("runs must be >= 1")
        if self.per_class < 1:
            raise ConfigError("per_class must be >= 1")
        for task in self.tasks:
            if task not in self.dataset_dirs:
                raise ConfigError(f"no dataset directory configured for task {task!r}")
        if Modeling.VISUAL in self.modelings:
            if not any(p.config.multimodal for p in self.providers):
                raise ConfigError("visual modeling needs a multimodal-capable provider")

    def effective_plans_dir(self) -> Path:
        return self.plans_dir if self.plans_dir is not None else self.output_dir / "plans"


def _provider_entry(raw: Mapping[str, Any], base_dir: Path) -> ProviderEntry:
    known = {
        "model_id", "base_url", "api_key_env", "temperature", "max_output_tokens",
        "image_detail", "price", "request_timeout_s", "max_retries", "parallelism",
        "multimodal",
    }
    kind = raw.get("kind", "openai")
    kwargs: dict[str, Any] = {}
    for key, value in raw.items():
        if key in ("kind", "script_file"):
            continue
        if key not in known:
            raise ConfigError(f"unknown provider field {key!r}")
        kwargs[key] = value
    if "model_id" not in kwargs:
        raise ConfigError("provider entries need a model_id")
    if "price" in kwargs:
        kwargs["price"] = PriceConfig(**kwargs["price"])
    if "image_detail" in kwargs:
        kwargs["image_detail"] = Detail(kwargs["image_detail"])
    script_file = raw.get("script_file")
    return ProviderEntry(
        kind=kind,
        config=ProviderConfig(**kwargs),
        script_file=(base_dir / script_file) if script_file else None,
    )


def run_config_from_dict(raw: Mapping[str, Any], base_dir: Path = Path(".")) -> RunConfig:
    raw = _interpolate(dict(raw))
    run = raw.get("run", {})
    datasets = raw.get("datasets", {})
    providers_raw = raw.get("providers", [])
    if not providers_raw:
        raise ConfigError("config needs at least one [[providers]] entry")
    render_raw = dict(raw.get("render", {}))
    if "detail" in render_raw:
        render_raw["detail"] = Detail(render_raw["detail"])
    ablations = raw.get("ablations", {})

    return RunConfig(
        tasks=tuple(run.get("tasks", list(datasets))),
        dataset_dirs={name: base_dir / path for name, path in datasets.items()},
        providers=tuple(_provider_entry(p, base_dir) for p in providers_raw),
        strategies=tuple(
            ReasoningStrategy.parse(s) for s in run.get("strategies", ["zst"])
        ),
        modelings=tuple(Modeling(m) for m in run.get("modelings", ["numeric"])),
        per_class=int(run.get("per_class", 2)),
        runs=int(run.get("runs", 3)),
        seed=int(run.get("seed", 0)),
        retry_cap=int(run.get("retry_cap", 5)),
        precision=int(run.get("precision", 4)),
        output_dir=base_dir / run.get("output_dir", "results"),
        plans_dir=(base_dir / run["plans_dir"]) if "plans_dir" in run else None,
        render=RenderOverrides(**render_raw),
        skip_planning=bool(ablations.get("skip_planning", False)),
        plan_fallback=(
            RenderMode(run["plan_fallback"]) if "plan_fallback" in run else None
        ),
        max_abstentions=(
            int(run["max_abstentions"]) if "max_abstentions" in run else None
        ),
    )


def load_run_config(path: str | Path, overrides: Mapping[str, Any] | None = None) -> RunConfig:
    """Load a TOML run config; ``overrides`` replace top-level RunConfig fields."""
    path = Path(path)
    try:
        raw = tomllib.loads(path.read_text(encoding="utf-8"))
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    config = run_config_from_dict(raw, base_dir=path.parent)
    if overrides:
        config = replace(config, **overrides)
    return config


def config_digest_payload(config: RunConfig) -> dict:
    """JSON-safe view of the config used for run identity and provenance."""
    return {
        "tasks": list(config.tasks),
        "datasets": {k: str(v) for k, v in sorted(config.dataset_dirs.items())},
        "providers": [
            {
                "kind": p.kind,
                "model_id": p.config.model_id,
                "base_url": p.config.base_url,
                "temperature": p.config.temperature,
                "max_output_tokens": p.config.max_output_tokens,
                "image_detail": p.config.image_detail.value,
            }
            for p in config.providers
        ],
        "strategies": [str(s) for s in config.strategies],
        "modelings": [m.value for m in config.modelings],
        "per_class": config.per_class,
        "runs": config.runs,
        "seed": config.seed,
        "retry_cap": config.retry_cap,
        "precision": config.precision,
        "skip_planning": config.skip_planning,
        "render": {
            "width_px": config.render.width_px,
            "height_px": config.render.height_px,
            "show_legend": config.render.show_legend,
            "show_timestamps": config.render.show_timestamps,
            "colormap": config.render.colormap,
            "detail": config.render.detail.value if config.render.detail else None,
        },
    }
