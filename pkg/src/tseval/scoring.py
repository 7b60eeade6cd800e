"""Answer parsing, accuracy metrics, anchor comparisons, cost accounting, and
report emission.

Reports are byte-deterministic for identical inputs: groups are sorted, float
formatting is fixed (percentages at 2 decimals, normalized scores at 4), and
the markdown, CSV, and JSON emissions share one computed source.
"""
from __future__ import annotations

import json
import re
import statistics
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from .core import AnchorTable, Modeling, PriceConfig, ReasoningStrategy, TaskSpec


class ScoringError(Exception):
    pass


class AnswerParseError(ScoringError):
    """Base for answer extraction failures; triggers the rerun loop."""


class NoAnswer(AnswerParseError):
    pass


class AmbiguousAnswer(AnswerParseError):
    pass


class UnknownTask(ScoringError):
    pass


class ZeroBaseline(ScoringError):
    pass


# ---------------------------------------------------------------------------
# Answer parsing
# ---------------------------------------------------------------------------

_MARKER = re.compile(r"answer\s+choice\s*:\s*(.*)", re.IGNORECASE)


def parse_answer(response: str, spec: TaskSpec) -> str:
    """Extract the chosen class letter from a model response.

    Scans for the last "Answer Choice:" line and accepts, in order of
    precedence: a parenthesized letter "(X)", a standalone letter, or a
    unique case-insensitive class-name match. Raises NoAnswer when nothing
    can be extracted and AmbiguousAnswer when two distinct classes are named.
    """
    matches = _MARKER.findall(response)
    if not matches:
        raise NoAnswer("no 'Answer Choice:' line found")
    payload = matches[-1].strip().strip("*_`").strip()
    letters = set(spec.letters)

    parenthesized = {
        m.upper() for m in re.findall(r"\(([A-Za-z])\)", payload) if m.upper() in letters
    }
    candidates = parenthesized
    if not candidates:
        bare = payload.rstrip(".").strip()
        if len(bare) == 1 and bare.upper() in letters:
            candidates = {bare.upper()}
        else:
            candidates = {
                m for m in re.findall(r"\b([A-Z])\b", payload) if m in letters
            }
    if not candidates:
        lowered = payload.lower()
        candidates = {
            c.letter for c in spec.classes if c.name.lower() in lowered
        }
    if not candidates:
        raise NoAnswer(f"could not extract a choice from {payload!r}")
    if len(candidates) > 1:
        raise AmbiguousAnswer(f"{sorted(candidates)} all named in {payload!r}")
    return candidates.pop()


# ---------------------------------------------------------------------------
# Run records
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SampleResult:
    """Outcome for one evaluated sample; ``predicted`` is None on abstention."""

    sample_id: str
    gold: str
    predicted: str | None
    retries: int
    input_tokens: int
    output_tokens: int
    input_source: str = "estimated"
    latency_ms: int = 0


@dataclass(frozen=True)
class RunRecord:
    """One task x model x strategy x modeling x run evaluation."""

    task: str
    model_id: str
    strategy: ReasoningStrategy
    modeling: Modeling
    seed: int
    run_index: int
    results: tuple[SampleResult, ...]

    def __post_init__(self) -> None:
        if self.run_index < 1:
            raise ValueError("run_index starts at 1")
        if not self.results:
            raise ValueError("a RunRecord needs at least one sample result")


def record_to_rows(record: RunRecord) -> list[dict]:
    """Flatten a RunRecord to one JSON-ready dict per sample."""
    rows = []
    for r in record.results:
        rows.append(
            {
                "task": record.task,
                "model": record.model_id,
                "strategy": str(record.strategy),
                "modeling": record.modeling.value,
                "seed": record.seed,
                "run_index": record.run_index,
                **asdict(r),
            }
        )
    return rows


def rows_to_records(rows: Iterable[Mapping]) -> list[RunRecord]:
    """Group flat per-sample rows back into RunRecords (insertion-ordered)."""
    grouped: dict[tuple, list[Mapping]] = {}
    for row in rows:
        key = (row["task"], row["model"], row["strategy"], row["modeling"],
               row["seed"], row["run_index"])
        grouped.setdefault(key, []).append(row)
    records = []
    for (task, model, strategy, modeling, seed, run_index), group in grouped.items():
        results = tuple(
            SampleResult(
                sample_id=r["sample_id"],
                gold=r["gold"],
                predicted=r["predicted"],
                retries=int(r["retries"]),
                input_tokens=int(r["input_tokens"]),
                output_tokens=int(r["output_tokens"]),
                input_source=r.get("input_source", "estimated"),
                latency_ms=int(r.get("latency_ms", 0)),
            )
            for r in group
        )
        records.append(
            RunRecord(
                task=task,
                model_id=model,
                strategy=ReasoningStrategy.parse(strategy),
                modeling=Modeling(modeling),
                seed=int(seed),
                run_index=int(run_index),
                results=results,
            )
        )
    return records


def read_records_jsonl(path: str | Path) -> list[RunRecord]:
    rows = []
    with Path(path).open(encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                rows.append(json.loads(line))
    return rows_to_records(rows)


# ---------------------------------------------------------------------------
# Metrics
# ---------------------------------------------------------------------------

def accuracy(record: RunRecord) -> float:
    """Percent correct; abstentions count as incorrect."""
    correct = sum(1 for r in record.results if r.predicted == r.gold)
    return 100.0 * correct / len(record.results)


def abstention_rate(record: RunRecord) -> float:
    """Percent of samples with no parseable answer after all retries."""
    abstained = sum(1 for r in record.results if r.predicted is None)
    return 100.0 * abstained / len(record.results)


def normalize(accuracy_pct: float, task: str, anchors: AnchorTable) -> float:
    """Accuracy divided by the task's random-guessing accuracy."""
    if task not in anchors:
        raise UnknownTask(task)
    return accuracy_pct / anchors[task].random_guess_accuracy


def win_count(accuracy_pct: float, task: str, anchors: AnchorTable) -> tuple[int, int]:
    """(number of supervised anchors strictly below accuracy_pct, total anchors).

    Exact ties count as non-wins.
    """
    if task not in anchors:
        raise UnknownTask(task)
    supervised = anchors[task].supervised
    wins = sum(1 for acc in supervised.values() if accuracy_pct > acc)
    return wins, len(supervised)


def improvement(new: float, baseline: float) -> float:
    """Relative improvement in percent: 100 * (new - baseline) / baseline."""
    if baseline <= 0:
        raise ZeroBaseline(f"baseline must be positive, got {baseline}")
    return 100.0 * (new - baseline) / baseline


def cost(tokens_in: int, tokens_out: int, price: PriceConfig) -> float:
    """Dollar cost of a request at the given per-million-token prices."""
    return (
        tokens_in * price.input_per_million / 1e6
        + tokens_out * price.output_per_million / 1e6
    )


# ---------------------------------------------------------------------------
# Report emission
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class MetricReport:
    """Aggregated metrics for one task x model x strategy x modeling group."""

    task: str
    model_id: str
    strategy: str
    modeling: str
    runs: int
    accuracy_pct: float  # mean over runs
    normalized: float
    wins: int
    wins_total: int
    improvement_pct: float | None
    tokens_per_sample: float  # input tokens
    output_tokens_per_sample: float
    cost_per_sample_usd: float
    abstention_pct: float


def _group_key(record: RunRecord) -> tuple[str, str, str, str]:
    return (record.task, record.model_id, str(record.strategy), record.modeling.value)


def summarize(
    records: Sequence[RunRecord],
    anchors: AnchorTable,
    *,
    prices: Mapping[str, PriceConfig] | None = None,
    baseline_modeling: str | None = "numeric",
) -> list[MetricReport]:
    """Aggregate records into per-group MetricReports, sorted by group key.

    Improvement is computed against the group with the same task, model, and
    strategy but ``baseline_modeling``; it is None for the baseline itself or
    when no baseline group exists.
    """
    prices = prices or {}
    groups: dict[tuple, list[RunRecord]] = {}
    for record in records:
        groups.setdefault(_group_key(record), []).append(record)

    mean_acc: dict[tuple, float] = {
        key: statistics.mean(accuracy(r) for r in group)
        for key, group in groups.items()
    }

    reports = []
    for key in sorted(groups):
        task, model, strategy, modeling = key
        group = groups[key]
        acc = mean_acc[key]
        improvement_pct: float | None = None
        if baseline_modeling is not None and modeling != baseline_modeling:
            base_key = (task, model, strategy, baseline_modeling)
            if base_key in mean_acc and mean_acc[base_key] > 0:
                improvement_pct = improvement(acc, mean_acc[base_key])
        total_samples = sum(len(r.results) for r in group)
        total_in = sum(s.input_tokens for r in group for s in r.results)
        total_out = sum(s.output_tokens for r in group for s in r.results)
        in_per_sample = total_in / total_samples
        out_per_sample = total_out / total_samples
        price = prices.get(model, PriceConfig())
        wins, total = win_count(acc, task, anchors)
        reports.append(
            MetricReport(
                task=task,
                model_id=model,
                strategy=strategy,
                modeling=modeling,
                runs=len(group),
                accuracy_pct=acc,
                normalized=normalize(acc, task, anchors),
                wins=wins,
                wins_total=total,
                improvement_pct=improvement_pct,
                tokens_per_sample=in_per_sample,
                output_tokens_per_sample=out_per_sample,
                cost_per_sample_usd=cost(in_per_sample, out_per_sample, price),
                abstention_pct=statistics.mean(abstention_rate(r) for r in group),
            )
        )
    return reports


_CSV_COLUMNS = (
    "task", "model", "strategy", "modeling", "runs", "accuracy_pct", "normalized",
    "win", "improvement_pct", "tokens_per_sample", "output_tokens_per_sample",
    "cost_per_sample_usd", "abstention_pct",
)


def _formatted_row(report: MetricReport) -> dict[str, str]:
    return {
        "task": report.task,
        "model": report.model_id,
        "strategy": report.strategy,
        "modeling": report.modeling,
        "runs": str(report.runs),
        "accuracy_pct": f"{report.accuracy_pct:.2f}",
        "normalized": f"{report.normalized:.4f}",
        "win": f"{report.wins}/{report.wins_total}",
        "improvement_pct": (
            "" if report.improvement_pct is None else f"{report.improvement_pct:+.2f}"
        ),
        "tokens_per_sample": f"{report.tokens_per_sample:.2f}",
        "output_tokens_per_sample": f"{report.output_tokens_per_sample:.2f}",
        "cost_per_sample_usd": f"{report.cost_per_sample_usd:.6f}",
        "abstention_pct": f"{report.abstention_pct:.2f}",
    }


def emit_report(
    records: Sequence[RunRecord],
    anchors: AnchorTable,
    out_dir: str | Path,
    *,
    formats: Sequence[str] = ("markdown", "csv", "json"),
    prices: Mapping[str, PriceConfig] | None = None,
    baseline_modeling: str | None = "numeric",
) -> dict[str, Path]:
    """Write report files plus a normalized-score bar CSV; returns paths.

    All formats derive from one summarize() result, so their numeric values
    are identical, and output is byte-deterministic for identical inputs.
    """
    if not records:
        raise ScoringError("no records to report")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    reports = summarize(
        records, anchors, prices=prices, baseline_modeling=baseline_modeling
    )
    rows = [_formatted_row(r) for r in reports]
    written: dict[str, Path] = {}

    if "markdown" in formats:
        lines = ["| " + " | ".join(_CSV_COLUMNS) + " |",
                 "|" + "|".join(" --- " for _ in _CSV_COLUMNS) + "|"]
        for row in rows:
            lines.append("| " + " | ".join(row[c] for c in _CSV_COLUMNS) + " |")
        path = out / "report.md"
        path.write_text("\n".join(lines) + "\n", encoding="utf-8")
        written["markdown"] = path

    if "csv" in formats:
        path = out / "report.csv"
        lines = [",".join(_CSV_COLUMNS)]
        for row in rows:
            lines.append(",".join(row[c] for c in _CSV_COLUMNS))
        path.write_text("\n".join(lines) + "\n", encoding="utf-8")
        written["csv"] = path

    if "json" in formats:
        path = out / "report.json"
        path.write_text(
            json.dumps([dict(row) for row in rows], indent=2) + "\n", encoding="utf-8"
        )
        written["json"] = path

    bars = out / "bars.csv"
    lines = ["task,model,strategy,modeling,normalized"]
    for row in rows:
        lines.append(
            f"{row['task']},{row['model']},{row['strategy']},{row['modeling']},{row['normalized']}"
        )
    bars.write_text("\n".join(lines) + "\n", encoding="utf-8")
    written["bars"] = bars
    return written
