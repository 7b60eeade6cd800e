"""Command-line interface: validate, visualize, plan, run, report.

Exit codes: 0 success, 1 dataset validation failure, 2 runtime failure.
"""
from __future__ import annotations

import dataclasses
import json
import sys
from pathlib import Path

import click

from .config import ConfigError, load_run_config
from .core import (
    AnchorTable,
    Modeling,
    ReasoningStrategy,
    TaskAnchors,
    builtin_anchor_table,
    builtin_task_registry,
)
from .ingest import IngestError, load_dataset
from .llmclient import ClientError, PriceConfig
from .prompt import (
    Unparseable,
    VisualizationPlan,
    build_planning_prompt,
    parse_plan,
    save_plan,
)
from .runner import RunnerError, run_all
from .scoring import ScoringError, emit_report, read_records_jsonl, summarize
from .viz import (
    Detail,
    GPT4O_TOKEN_RULE,
    RenderMode,
    StftConfig,
    VizError,
    default_render_config,
    estimate_image_tokens,
    render,
    render_bar_chart,
)

VALIDATION_EXIT = 1
RUNTIME_EXIT = 2


def _fail(code: int, message: str) -> None:
    click.echo(f"error: {message}", err=True)
    sys.exit(code)


@click.group()
def main() -> None:
    """Evaluate LLM reasoning over time-series classification tasks."""


# ---------------------------------------------------------------------------
# validate
# ---------------------------------------------------------------------------

@main.command()
@click.argument("dataset_dir", type=click.Path(path_type=Path))
def validate(dataset_dir: Path) -> None:
    """Validate a canonical dataset directory."""
    try:
        dataset = load_dataset(dataset_dir)
    except IngestError as exc:
        _fail(VALIDATION_EXIT, str(exc))
    spec = dataset.spec
    click.echo(
        f"{spec.name}: {spec.num_classes} classes, {spec.num_variables} channels, "
        f"{spec.series_length} points; train={len(dataset.train)}, test={len(dataset.test)}"
    )


# ---------------------------------------------------------------------------
# visualize
# ---------------------------------------------------------------------------

@main.command()
@click.argument("dataset_dir", type=click.Path(path_type=Path))
@click.option("--id", "sample_ids", multiple=True, required=True,
              help="Sample id to render (repeatable).")
@click.option("--mode", type=click.Choice(["time", "frequency"]), default=None,
              help="Override the task's default render mode.")
@click.option("--width", type=int, default=None)
@click.option("--height", type=int, default=None)
@click.option("--no-legend", is_flag=True, default=False)
@click.option("--no-timestamps", is_flag=True, default=False)
@click.option("--window-len", type=int, default=None, help="STFT window length.")
@click.option("--hop", type=int, default=None, help="STFT hop size.")
@click.option("--colormap", default=None)
@click.option("--palette", default=None, help="Comma-separated channel colors.")
@click.option("--detail", type=click.Choice(["low", "auto"]), default=None)
@click.option("--channel", type=int, default=None,
              help="Channel for frequency mode on multivariate samples.")
@click.option("--out-dir", type=click.Path(path_type=Path), default=Path("images"))
def visualize(dataset_dir: Path, sample_ids: tuple[str, ...], mode: str | None,
              width: int | None, height: int | None, no_legend: bool,
              no_timestamps: bool, window_len: int | None, hop: int | None,
              colormap: str | None, palette: str | None, detail: str | None,
              channel: int | None, out_dir: Path) -> None:
    """Render samples as PNG charts with token-estimate sidecars."""
    try:
        dataset = load_dataset(dataset_dir)
    except IngestError as exc:
        _fail(VALIDATION_EXIT, str(exc))
    base = default_render_config(dataset.spec.name)
    kwargs: dict = {}
    if mode is not None:
        kwargs["mode"] = RenderMode(mode)
    if width is not None:
        kwargs["width_px"] = width
    if height is not None:
        kwargs["height_px"] = height
    if no_legend:
        kwargs["show_legend"] = False
    if no_timestamps:
        kwargs["show_timestamps"] = False
    if colormap is not None:
        kwargs["colormap"] = colormap
    if palette is not None:
        kwargs["palette"] = tuple(c.strip() for c in palette.split(","))
    if detail is not None:
        kwargs["detail"] = Detail(detail)
    if channel is not None:
        kwargs["frequency_channel"] = channel
    if window_len is not None or hop is not None:
        kwargs["stft"] = StftConfig(
            window_len=window_len or base.stft.window_len,
            hop=hop or base.stft.hop,
        )
    config = dataclasses.replace(base, **kwargs)
    by_id = {s.id: s for s in dataset.train + dataset.test}
    out_dir.mkdir(parents=True, exist_ok=True)
    for sample_id in sample_ids:
        if sample_id not in by_id:
            _fail(RUNTIME_EXIT, f"unknown sample id {sample_id!r}")
        try:
            image = render(by_id[sample_id], dataset.spec, config)
        except VizError as exc:
            _fail(RUNTIME_EXIT, str(exc))
        tokens = estimate_image_tokens(image, GPT4O_TOKEN_RULE)
        png_path = out_dir / f"{sample_id}.png"
        png_path.write_bytes(image.png_bytes)
        sidecar = {
            "width": image.width_px,
            "height": image.height_px,
            "mode": config.mode.value,
            "detail": image.detail.value,
            "estimated_tokens": tokens,
        }
        (out_dir / f"{sample_id}.json").write_text(
            json.dumps(sidecar, indent=2) + "\n", encoding="utf-8"
        )
        click.echo(f"{png_path} ({config.mode.value}, {image.detail.value}): {tokens} tokens")


# ---------------------------------------------------------------------------
# plan
# ---------------------------------------------------------------------------

@main.command()
@click.argument("task")
@click.option("--config", "config_path", type=click.Path(path_type=Path), default=None,
              help="Run config providing the provider profile.")
@click.option("--provider", "provider_id", default=None,
              help="model_id of the provider profile to use (default: first).")
@click.option("--dataset-dir", type=click.Path(path_type=Path), default=None,
              help="Dataset directory for non-builtin tasks.")
@click.option("--plans-dir", type=click.Path(path_type=Path), default=Path("plans"))
@click.option("--manual", "manual_file", type=click.Path(path_type=Path), default=None,
              help="Skip the provider: read hint text from this file.")
@click.option("--domain", type=click.Choice(["time", "frequency"]), default=None,
              help="Domain choice when using --manual.")
@click.option("--fallback", type=click.Choice(["time", "frequency"]), default=None,
              help="Domain to assume when the response names neither.")
@click.option("--force", is_flag=True, default=False)
def plan(task: str, config_path: Path | None, provider_id: str | None,
         dataset_dir: Path | None, plans_dir: Path, manual_file: Path | None,
         domain: str | None, fallback: str | None, force: bool) -> None:
    """Run (or hand-write) the visualization-planning stage for a task."""
    plan_path = plans_dir / f"{task}.json"
    if plan_path.exists() and not force:
        click.echo(f"plan exists: {plan_path} (use --force to overwrite)")
        return

    registry = builtin_task_registry()
    if task in registry:
        spec = registry[task]
    elif dataset_dir is not None:
        try:
            spec = load_dataset(dataset_dir).spec
        except IngestError as exc:
            _fail(VALIDATION_EXIT, str(exc))
    else:
        _fail(RUNTIME_EXIT, f"unknown task {task!r}; pass --dataset-dir for custom tasks")

    if manual_file is not None:
        if domain is None:
            _fail(RUNTIME_EXIT, "--manual requires --domain")
        hints = manual_file.read_text(encoding="utf-8").strip()
        result = VisualizationPlan(
            task=task, domain_choice=RenderMode(domain), hints=hints, source="manual"
        )
    else:
        if config_path is None:
            _fail(RUNTIME_EXIT, "pass --config with a provider profile, or --manual")
        try:
            run_config = load_run_config(config_path)
        except ConfigError as exc:
            _fail(RUNTIME_EXIT, str(exc))
        entries = {e.config.model_id: e for e in run_config.providers}
        entry = entries.get(provider_id) if provider_id else run_config.providers[0]
        if entry is None:
            _fail(RUNTIME_EXIT, f"no provider {provider_id!r} in {config_path}")
        bundle = build_planning_prompt(spec)
        try:
            completion = entry.build().send(bundle)
        except ClientError as exc:
            _fail(RUNTIME_EXIT, str(exc))
        fallback_mode = RenderMode(fallback) if fallback else run_config.plan_fallback
        try:
            result = parse_plan(completion.text, task, fallback=fallback_mode)
        except Unparseable:
            dump = plans_dir / f"{task}.response.txt"
            plans_dir.mkdir(parents=True, exist_ok=True)
            dump.write_text(completion.text, encoding="utf-8")
            _fail(RUNTIME_EXIT,
                  f"planning response named neither domain; raw response saved to {dump} "
                  f"for manual editing (then use --manual)")
    saved = save_plan(result, plans_dir)
    click.echo(f"wrote {saved} ({result.domain_choice.value}, source={result.source})")


# ---------------------------------------------------------------------------
# run
# ---------------------------------------------------------------------------

@main.command(name="run")
@click.option("--config", "config_path", type=click.Path(path_type=Path), required=True)
@click.option("--seed", type=int, default=None)
@click.option("--per-class", type=int, default=None)
@click.option("--runs", type=int, default=None)
@click.option("--output-dir", type=click.Path(path_type=Path), default=None)
@click.option("--tasks", default=None, help="Comma-separated task subset.")
@click.option("--strategies", default=None, help="Comma-separated, e.g. zst,cot,icl:1.")
@click.option("--modelings", default=None, help="Comma-separated: numeric,visual.")
@click.option("--no-legend", is_flag=True, default=False)
@click.option("--no-timestamps", is_flag=True, default=False)
@click.option("--skip-planning", is_flag=True, default=False,
              help="Force time-domain charts with no hint line.")
@click.option("--smoke", is_flag=True, default=False,
              help="Live smoke mode: 1 sample per class, 1 run, no accuracy threshold.")
def run_command(config_path: Path, seed: int | None, per_class: int | None,
                runs: int | None, output_dir: Path | None, tasks: str | None,
                strategies: str | None, modelings: str | None, no_legend: bool,
                no_timestamps: bool, skip_planning: bool, smoke: bool) -> None:
    """Execute the evaluation matrix from a TOML run config."""
    overrides: dict = {}
    if smoke:
        overrides["per_class"] = 1
        overrides["runs"] = 1
    if seed is not None:
        overrides["seed"] = seed
    if per_class is not None:
        overrides["per_class"] = per_class
    if runs is not None:
        overrides["runs"] = runs
    if output_dir is not None:
        overrides["output_dir"] = output_dir
    if tasks is not None:
        overrides["tasks"] = tuple(t.strip() for t in tasks.split(","))
    if strategies is not None:
        overrides["strategies"] = tuple(
            ReasoningStrategy.parse(s) for s in strategies.split(",")
        )
    if modelings is not None:
        overrides["modelings"] = tuple(Modeling(m.strip()) for m in modelings.split(","))
    if skip_planning:
        overrides["skip_planning"] = True
    try:
        config = load_run_config(config_path, overrides)
        if no_legend or no_timestamps:
            render_overrides = config.render
            if no_legend:
                render_overrides = dataclasses.replace(render_overrides, show_legend=False)
            if no_timestamps:
                render_overrides = dataclasses.replace(render_overrides, show_timestamps=False)
            config = dataclasses.replace(config, render=render_overrides)
    except ConfigError as exc:
        _fail(RUNTIME_EXIT, str(exc))
    try:
        paths = run_all(config)
    except IngestError as exc:
        _fail(VALIDATION_EXIT, str(exc))
    except (RunnerError, ClientError, VizError) as exc:
        _fail(RUNTIME_EXIT, str(exc))
    click.echo(f"records: {paths.records}")


# ---------------------------------------------------------------------------
# report
# ---------------------------------------------------------------------------

def _load_anchor_file(path: Path) -> AnchorTable:
    raw = json.loads(path.read_text(encoding="utf-8"))
    return AnchorTable(tasks={
        task: TaskAnchors(
            random_guess_accuracy=entry["random_guess_accuracy"],
            supervised=dict(entry.get("supervised", {})),
        )
        for task, entry in raw.items()
    })


@main.command()
@click.argument("results_dirs", nargs=-1, required=True,
                type=click.Path(path_type=Path))
@click.option("--out-dir", type=click.Path(path_type=Path), default=None,
              help="Where to write report files (default: first results dir).")
@click.option("--anchors", "anchors_file", type=click.Path(path_type=Path), default=None,
              help="JSON anchor table overriding the built-in one.")
@click.option("--baseline-modeling", default="numeric",
              help="Modeling whose accuracy is the improvement baseline.")
@click.option("--formats", default="markdown,csv,json")
@click.option("--config", "config_path", type=click.Path(path_type=Path), default=None,
              help="Run config supplying provider prices for the cost column.")
@click.option("--charts", is_flag=True, default=False,
              help="Also write one normalized-score bar chart PNG per task.")
def report(results_dirs: tuple[Path, ...], out_dir: Path | None,
           anchors_file: Path | None, baseline_modeling: str, formats: str,
           config_path: Path | None, charts: bool) -> None:
    """Aggregate records into report.md / report.csv / report.json."""
    records = []
    for directory in results_dirs:
        records_path = directory / "records.jsonl" if directory.is_dir() else directory
        if not records_path.exists():
            _fail(RUNTIME_EXIT, f"no records found at {records_path}")
        records.extend(read_records_jsonl(records_path))
    if not records:
        _fail(RUNTIME_EXIT, "no records found in the given results directories")

    anchors = _load_anchor_file(anchors_file) if anchors_file else builtin_anchor_table()
    prices: dict[str, PriceConfig] = {}
    if config_path is not None:
        try:
            run_config = load_run_config(config_path)
        except ConfigError as exc:
            _fail(RUNTIME_EXIT, str(exc))
        prices = {e.config.model_id: e.config.price for e in run_config.providers}

    destination = out_dir or (
        results_dirs[0] if results_dirs[0].is_dir() else results_dirs[0].parent
    )
    try:
        written = emit_report(
            records, anchors, destination,
            formats=tuple(f.strip() for f in formats.split(",")),
            prices=prices,
            baseline_modeling=baseline_modeling or None,
        )
    except ScoringError as exc:
        _fail(RUNTIME_EXIT, str(exc))
    for name, path in sorted(written.items()):
        click.echo(f"{name}: {path}")

    if charts:
        reports = summarize(records, anchors, prices=prices,
                            baseline_modeling=baseline_modeling or None)
        by_task: dict[str, list] = {}
        for entry in reports:
            by_task.setdefault(entry.task, []).append(entry)
        for task, entries in sorted(by_task.items()):
            labels = [f"{e.model_id}/{e.strategy}/{e.modeling}" for e in entries]
            values = [e.normalized for e in entries]
            png = render_bar_chart(task, labels, values)
            chart_path = Path(destination) / f"normalized_{task}.png"
            chart_path.write_bytes(png)
            click.echo(f"chart: {chart_path}")


if __name__ == "__main__":
    main()
