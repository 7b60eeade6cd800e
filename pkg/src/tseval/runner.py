"""Evaluation orchestration: cell iteration, bundle construction, retries,
and resumable record writing.

A "cell" is one task x provider x modeling x strategy x run_index. Cells run
in deterministic config order; per-sample requests inside a cell may fan out
over a worker pool, but rows are always written in subset order, so record
files are byte-identical for a given config and seed, and an interrupted run
resumes (by skipping already-written sample keys) into the same final bytes.
"""
from __future__ import annotations

import dataclasses
import hashlib
import json
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping

from .config import RenderOverrides, RunConfig, config_digest_payload
from .core import Modeling, ReasoningStrategy, TaskSpec, TimeSeriesSample
from .ingest import Dataset, DemoSet, draw_demo_set, draw_eval_subset, load_dataset
from .llmclient import ExhaustedRetries, Provider, query_until_answer
from .prompt import (
    PromptBundle,
    TextPart,
    VisualizationPlan,
    build_cot,
    build_icl,
    build_solving_prompt,
    build_zst,
    load_plan,
    serialize_numeric,
)
from .scoring import parse_answer
from .viz import RenderConfig, RenderMode, StftConfig, default_render_config, render

log = logging.getLogger(__name__)


class RunnerError(Exception):
    pass


@dataclass(frozen=True)
class RunPaths:
    root: Path
    records: Path
    config_echo: Path


# ---------------------------------------------------------------------------
# Run identity and record bookkeeping
# ---------------------------------------------------------------------------

def compute_run_id(config: RunConfig) -> str:
    """Hash of (config, seed, dataset manifest digests) for cache keys."""
    hasher = hashlib.sha256()
    hasher.update(
        json.dumps(config_digest_payload(config), sort_keys=True).encode("utf-8")
    )
    for task in sorted(config.tasks):
        manifest = config.dataset_dirs[task] / "manifest.json"
        hasher.update(task.encode("utf-8"))
        hasher.update(hashlib.sha256(manifest.read_bytes()).digest())
    return hasher.hexdigest()[:16]


def prepare_run_dir(config: RunConfig) -> RunPaths:
    run_id = compute_run_id(config)
    root = config.output_dir / run_id
    root.mkdir(parents=True, exist_ok=True)
    echo = root / "config.json"
    payload = {"run_id": run_id, **config_digest_payload(config)}
    echo.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return RunPaths(root=root, records=root / "records.jsonl", config_echo=echo)


def _row_key(row: Mapping) -> tuple:
    return (
        row["task"], row["model"], row["strategy"], row["modeling"],
        row["run_index"], row["sample_id"],
    )


def load_existing_keys(records_path: Path) -> set[tuple]:
    """Keys of rows already on disk; truncates a torn trailing line if present."""
    if not records_path.exists():
        return set()
    raw = records_path.read_bytes()
    if raw and not raw.endswith(b"\n"):
        raw = raw[: raw.rfind(b"\n") + 1]
        records_path.write_bytes(raw)
    keys = set()
    for line in raw.decode("utf-8").splitlines():
        if line.strip():
            keys.add(_row_key(json.loads(line)))
    return keys


# ---------------------------------------------------------------------------
# Bundle construction
# ---------------------------------------------------------------------------

def apply_render_overrides(
    base: RenderConfig, overrides: RenderOverrides, mode: RenderMode
) -> RenderConfig:
    kwargs: dict = {"mode": mode}
    for name in ("width_px", "height_px", "show_legend", "show_timestamps",
                 "colormap", "detail"):
        value = getattr(overrides, name)
        if value is not None:
            kwargs[name] = value
    if overrides.stft_window_len is not None or overrides.stft_hop is not None:
        kwargs["stft"] = StftConfig(
            window_len=overrides.stft_window_len or base.stft.window_len,
            hop=overrides.stft_hop or base.stft.hop,
        )
    return dataclasses.replace(base, **kwargs)


@dataclass
class _Cell:
    task: str
    spec: TaskSpec
    provider_name: str
    provider: Provider
    parallelism: int
    modeling: Modeling
    strategy: ReasoningStrategy
    run_index: int
    seed: int
    subset_samples: tuple[TimeSeriesSample, ...]
    demos: DemoSet | None
    plan: VisualizationPlan | None
    render_config: RenderConfig | None
    demo_images: tuple | None
    precision: int
    retry_cap: int


def _build_bundle(cell: _Cell, sample: TimeSeriesSample) -> PromptBundle:
    spec = cell.spec
    if cell.modeling is Modeling.NUMERIC:
        part = TextPart(serialize_numeric(sample, spec, cell.precision))
        if cell.strategy.kind == "zst":
            return build_zst(part, spec)
        if cell.strategy.kind == "cot":
            return build_cot(part, spec)
        return build_icl(cell.demos, part, spec, precision=cell.precision)
    image = render(sample, spec, cell.render_config)
    if cell.strategy.kind == "icl":
        return build_solving_prompt(
            image, spec, cell.plan, demos=cell.demos, demo_images=cell.demo_images
        )
    # Under visual modeling both zst and cot resolve to the solving prompt,
    # which already carries the step-by-step instruction.
    return build_solving_prompt(image, spec, cell.plan)


def _evaluate_sample(cell: _Cell, sample: TimeSeriesSample) -> dict:
    bundle = _build_bundle(cell, sample)
    try:
        trace, aggregate = query_until_answer(
            bundle,
            cell.provider,
            parser=lambda text: parse_answer(text, cell.spec),
            cap=cell.retry_cap,
        )
        predicted: str | None = trace.parsed_choice
        retries = trace.retries_used
    except ExhaustedRetries as exc:
        aggregate = exc.aggregate
        predicted = None
        retries = cell.retry_cap - 1
    return {
        "task": cell.task,
        "model": cell.provider_name,
        "strategy": str(cell.strategy),
        "modeling": cell.modeling.value,
        "seed": cell.seed,
        "run_index": cell.run_index,
        "sample_id": sample.id,
        "gold": sample.label,
        "predicted": predicted,
        "retries": retries,
        "input_tokens": aggregate.usage.input_tokens,
        "output_tokens": aggregate.usage.output_tokens,
        "input_source": aggregate.usage.input_source,
        "latency_ms": aggregate.latency_ms,
    }


def _run_cell(cell: _Cell, existing: set[tuple], writer, max_abstentions: int | None) -> int:
    pending = [
        s for s in cell.subset_samples
        if (cell.task, cell.provider_name, str(cell.strategy), cell.modeling.value,
            cell.run_index, s.id) not in existing
    ]
    if not pending:
        return 0
    if cell.parallelism > 1:
        with ThreadPoolExecutor(max_workers=cell.parallelism) as pool:
            rows = list(pool.map(lambda s: _evaluate_sample(cell, s), pending))
    else:
        rows = [_evaluate_sample(cell, s) for s in pending]

    written = 0
    abstentions = 0
    for row in rows:
        writer(row)
        written += 1
        if row["predicted"] is None:
            abstentions += 1
            if max_abstentions is not None and abstentions > max_abstentions:
                log.warning(
                    "cell %s/%s/%s/%s run %d aborted: %d abstentions exceed quota",
                    cell.task, cell.provider_name, cell.strategy, cell.modeling.value,
                    cell.run_index, abstentions,
                )
                break
    return written


# ---------------------------------------------------------------------------
# Top-level run
# ---------------------------------------------------------------------------

def load_plans_for(config: RunConfig) -> dict[str, VisualizationPlan]:
    """Load persisted plans for every configured task; error if one is missing."""
    plans = {}
    plans_dir = config.effective_plans_dir()
    for task in config.tasks:
        path = plans_dir / f"{task}.json"
        if not path.is_file():
            raise RunnerError(
                f"no visualization plan for task {task!r} at {path}; "
                f"run 'tseval plan' first"
            )
        plans[task] = load_plan(path)
    return plans


def run_all(config: RunConfig, *, datasets: Mapping[str, Dataset] | None = None) -> RunPaths:
    """Execute the full evaluation matrix; resumable and deterministic.

    ``datasets`` may be injected (tests); by default each task's directory is
    loaded and validated.
    """
    if datasets is None:
        datasets = {task: load_dataset(config.dataset_dirs[task]) for task in config.tasks}

    needs_plans = Modeling.VISUAL in config.modelings and not config.skip_planning
    plans = load_plans_for(config) if needs_plans else {}

    providers = [(entry.config.model_id, entry.build(), entry.config.parallelism)
                 for entry in config.providers]

    paths = prepare_run_dir(config)
    existing = load_existing_keys(paths.records)

    with paths.records.open("a", encoding="utf-8") as fh:
        def writer(row: dict) -> None:
            fh.write(json.dumps(row, sort_keys=True) + "\n")
            fh.flush()

        for task in config.tasks:
            dataset = datasets[task]
            spec = dataset.spec
            for provider_name, provider, parallelism in providers:
                for modeling in config.modelings:
                    plan = plans.get(task) if modeling is Modeling.VISUAL else None
                    render_config = None
                    if modeling is Modeling.VISUAL:
                        mode = RenderMode.TIME if config.skip_planning else plan.domain_choice
                        render_config = apply_render_overrides(
                            default_render_config(task), config.render, mode
                        )
                    for strategy in config.strategies:
                        for run_index in range(1, config.runs + 1):
                            cell_seed = config.seed + run_index
                            subset = draw_eval_subset(dataset, config.per_class, cell_seed)
                            demos = None
                            demo_images = None
                            if strategy.kind == "icl":
                                demos = draw_demo_set(
                                    dataset, strategy.demos_per_class, cell_seed
                                )
                                if modeling is Modeling.VISUAL:
                                    demo_images = tuple(
                                        render(demo, spec, render_config)
                                        for demo, _ in demos.demos
                                    )
                            cell = _Cell(
                                task=task,
                                spec=spec,
                                provider_name=provider_name,
                                provider=provider,
                                parallelism=parallelism,
                                modeling=modeling,
                                strategy=strategy,
                                run_index=run_index,
                                seed=config.seed,
                                subset_samples=subset.samples,
                                demos=demos,
                                plan=plan,
                                render_config=render_config,
                                demo_images=demo_images,
                                precision=config.precision,
                                retry_cap=config.retry_cap,
                            )
                            count = _run_cell(cell, existing, writer, config.max_abstentions)
                            if count:
                                log.info(
                                    "cell %s/%s/%s/%s run %d: wrote %d rows",
                                    task, provider_name, strategy, modeling.value,
                                    run_index, count,
                                )
    return paths
