"""Dataset loading, validation, balanced subsetting, and demo selection.

Canonical on-disk layout for a dataset directory:

    manifest.json   task metadata (see ``load_dataset``)
    train.jsonl     one sample per line: {"id", "label", "values": [[...], ...]}
    test.jsonl      same schema; ``values[channel][time]``

Loaders never reorder lines: sample order equals file order.  All random
draws use ``random.Random`` (Mersenne Twister) seeded explicitly, so subsets
are reproducible across platforms and re-runnable run by run.
"""
from __future__ import annotations

import dataclasses
import hashlib
import json
import math
import random
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

from .core import ClassDef, ReasoningPattern, TaskSpec, TimeSeriesSample


class IngestError(Exception):
    """Base class for dataset ingestion failures."""


class MissingFile(IngestError):
    pass


class SchemaViolation(IngestError):
    pass


class LengthMismatch(IngestError):
    def __init__(self, sample_id: str, what: str, expected: int, actual: int) -> None:
        super().__init__(f"sample {sample_id!r}: expected {what} {expected}, got {actual}")
        self.sample_id = sample_id
        self.expected = expected
        self.actual = actual


class UnknownLabel(IngestError):
    def __init__(self, sample_id: str, label: str, letters: Sequence[str]) -> None:
        super().__init__(
            f"sample {sample_id!r}: label {label!r} not one of {', '.join(letters)}"
        )
        self.sample_id = sample_id
        self.label = label


class InsufficientSamples(IngestError):
    def __init__(self, class_letter: str, available: int, requested: int) -> None:
        super().__init__(
            f"class {class_letter}: requested {requested} samples but only {available} available"
        )
        self.class_letter = class_letter
        self.available = available
        self.requested = requested


@dataclass(frozen=True)
class Dataset:
    """A validated task dataset with train and test splits."""

    spec: TaskSpec
    train: tuple[TimeSeriesSample, ...]
    test: tuple[TimeSeriesSample, ...]

    def __post_init__(self) -> None:
        train_ids = {s.id for s in self.train}
        test_ids = {s.id for s in self.test}
        overlap = train_ids & test_ids
        if overlap:
            raise SchemaViolation(f"train/test ids overlap: {sorted(overlap)[:5]}")

    def split(self, name: str) -> tuple[TimeSeriesSample, ...]:
        if name == "train":
            return self.train
        if name == "test":
            return self.test
        raise KeyError(name)


@dataclass(frozen=True)
class EvalSubset:
    """Class-balanced, seed-shuffled selection of test samples."""

    samples: tuple[TimeSeriesSample, ...]
    seed: int
    per_class_count: int


@dataclass(frozen=True)
class DemoSet:
    """Labeled demonstrations drawn from the train split, interleaved by class."""

    demos: tuple[tuple[TimeSeriesSample, str], ...]
    demos_per_class: int

    def __post_init__(self) -> None:
        if self.demos_per_class < 1:
            raise ValueError("demos_per_class must be >= 1")
        if not self.demos:
            raise ValueError("a DemoSet cannot be empty")


# ---------------------------------------------------------------------------
# Loading and saving
# ---------------------------------------------------------------------------

_MANIFEST_REQUIRED = (
    "name", "pattern", "task_description", "classes",
    "num_variables", "series_length", "variable_labels",
)


def _parse_manifest(path: Path) -> TaskSpec:
    try:
        raw = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise SchemaViolation(f"{path}: invalid JSON: {exc}") from exc
    if not isinstance(raw, dict):
        raise SchemaViolation(f"{path}: manifest must be a JSON object")
    for key in _MANIFEST_REQUIRED:
        if key not in raw:
            raise SchemaViolation(f"{path}: missing manifest field {key!r}")
    try:
        pattern = ReasoningPattern(raw["pattern"])
    except ValueError as exc:
        raise SchemaViolation(
            f"{path}: pattern must be one of "
            f"{[p.value for p in ReasoningPattern]}, got {raw['pattern']!r}"
        ) from exc
    classes = []
    if not isinstance(raw["classes"], list) or not raw["classes"]:
        raise SchemaViolation(f"{path}: 'classes' must be a non-empty list")
    for i, entry in enumerate(raw["classes"]):
        if not isinstance(entry, dict) or "letter" not in entry or "name" not in entry:
            raise SchemaViolation(f"{path}: classes[{i}] needs 'letter' and 'name'")
        classes.append(ClassDef(entry["letter"], entry["name"], entry.get("description", "")))
    rate = raw.get("sampling_rate_hz")
    if rate is not None and (not isinstance(rate, (int, float)) or rate <= 0):
        raise SchemaViolation(f"{path}: sampling_rate_hz must be a positive number or null")
    try:
        return TaskSpec(
            name=raw["name"],
            pattern=pattern,
            task_description=raw["task_description"],
            classes=tuple(classes),
            num_variables=int(raw["num_variables"]),
            series_length=int(raw["series_length"]),
            variable_labels=tuple(raw["variable_labels"]),
            sampling_rate_hz=float(rate) if rate is not None else None,
        )
    except (TypeError, ValueError) as exc:
        raise SchemaViolation(f"{path}: {exc}") from exc


def _read_jsonl_samples(path: Path, spec: TaskSpec, split: str) -> tuple[TimeSeriesSample, ...]:
    samples = []
    with path.open(encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                raw = json.loads(line)
            except json.JSONDecodeError as exc:
                raise SchemaViolation(f"{path}:{lineno}: invalid JSON: {exc}") from exc
            for key in ("id", "label", "values"):
                if key not in raw:
                    raise SchemaViolation(f"{path}:{lineno}: missing field {key!r}")
            sample_id = str(raw["id"])
            values = raw["values"]
            if not isinstance(values, list) or not all(isinstance(ch, list) for ch in values):
                raise SchemaViolation(
                    f"{path}:{lineno}: 'values' must be a list of per-channel lists"
                )
            if len(values) != spec.num_variables:
                raise LengthMismatch(sample_id, "channel count", spec.num_variables, len(values))
            channels = []
            for ch_index, channel in enumerate(values):
                if len(channel) != spec.series_length:
                    raise LengthMismatch(
                        sample_id, "series length", spec.series_length, len(channel)
                    )
                floats = []
                for v in channel:
                    if not isinstance(v, (int, float)) or isinstance(v, bool):
                        raise SchemaViolation(
                            f"{path}:{lineno}: non-numeric value in channel {ch_index}"
                        )
                    v = float(v)
                    if not math.isfinite(v):
                        raise SchemaViolation(
                            f"{path}:{lineno}: non-finite value in channel {ch_index}"
                        )
                    floats.append(v)
                channels.append(tuple(floats))
            label = str(raw["label"])
            if label not in spec.letters:
                raise UnknownLabel(sample_id, label, spec.letters)
            samples.append(
                TimeSeriesSample(
                    id=sample_id, values=tuple(channels), label=label, split=split
                )
            )
    return tuple(samples)


def load_dataset(path: str | Path) -> Dataset:
    """Load and validate a canonical dataset directory.

    Raises MissingFile, SchemaViolation, LengthMismatch, or UnknownLabel with
    a field-level message; on success every sample is finite and conforms to
    the manifest's shape.
    """
    root = Path(path)
    if not root.is_dir():
        raise MissingFile(f"dataset directory not found: {root}")
    manifest = root / "manifest.json"
    if not manifest.is_file():
        raise MissingFile(f"missing {manifest}")
    spec = _parse_manifest(manifest)
    splits = {}
    for split in ("train", "test"):
        split_path = root / f"{split}.jsonl"
        if not split_path.is_file():
            raise MissingFile(f"missing {split_path}")
        splits[split] = _read_jsonl_samples(split_path, spec, split)
    return Dataset(spec=spec, train=splits["train"], test=splits["test"])


def save_dataset(dataset: Dataset, path: str | Path) -> None:
    """Write a dataset back out in the canonical directory format."""
    root = Path(path)
    root.mkdir(parents=True, exist_ok=True)
    spec = dataset.spec
    manifest = {
        "name": spec.name,
        "pattern": spec.pattern.value,
        "task_description": spec.task_description,
        "classes": [
            {"letter": c.letter, "name": c.name, "description": c.description}
            for c in spec.classes
        ],
        "num_variables": spec.num_variables,
        "series_length": spec.series_length,
        "variable_labels": list(spec.variable_labels),
        "sampling_rate_hz": spec.sampling_rate_hz,
    }
    (root / "manifest.json").write_text(
        json.dumps(manifest, indent=2, ensure_ascii=False) + "\n", encoding="utf-8"
    )
    for split in ("train", "test"):
        with (root / f"{split}.jsonl").open("w", encoding="utf-8") as fh:
            for sample in dataset.split(split):
                fh.write(
                    json.dumps(
                        {
                            "id": sample.id,
                            "label": sample.label,
                            "values": [list(ch) for ch in sample.values],
                        },
                        ensure_ascii=False,
                    )
                    + "\n"
                )


# ---------------------------------------------------------------------------
# Balanced draws
# ---------------------------------------------------------------------------

def _by_class(
    samples: Iterable[TimeSeriesSample], letters: Sequence[str]
) -> dict[str, list[TimeSeriesSample]]:
    pools: dict[str, list[TimeSeriesSample]] = {letter: [] for letter in letters}
    for sample in samples:
        pools[sample.label].append(sample)
    return pools


def draw_eval_subset(dataset: Dataset, per_class: int, seed: int) -> EvalSubset:
    """Draw a class-balanced evaluation subset from the test split.

    Deterministic for fixed (dataset, per_class, seed); output order is
    shuffled by the seed.
    """
    if per_class < 1:
        raise ValueError("per_class must be >= 1")
    rng = random.Random(seed)
    pools = _by_class(dataset.test, dataset.spec.letters)
    chosen: list[TimeSeriesSample] = []
    for letter in dataset.spec.letters:
        pool = pools[letter]
        if len(pool) < per_class:
            raise InsufficientSamples(letter, len(pool), per_class)
        chosen.extend(rng.sample(pool, per_class))
    rng.shuffle(chosen)
    return EvalSubset(samples=tuple(chosen), seed=seed, per_class_count=per_class)


def draw_demo_set(dataset: Dataset, demos_per_class: int, seed: int) -> DemoSet:
    """Draw balanced ICL demonstrations from the train split.

    Output interleaves classes round-robin (A, B, ..., A, B, ...) so every
    prefix stays as balanced as possible.
    """
    if not (1 <= demos_per_class <= 6):
        raise ValueError("demos_per_class must be in 1..6")
    rng = random.Random(seed)
    pools = _by_class(dataset.train, dataset.spec.letters)
    picks: dict[str, list[TimeSeriesSample]] = {}
    for letter in dataset.spec.letters:
        pool = pools[letter]
        if len(pool) < demos_per_class:
            raise InsufficientSamples(letter, len(pool), demos_per_class)
        picks[letter] = rng.sample(pool, demos_per_class)
    demos = []
    for round_index in range(demos_per_class):
        for letter in dataset.spec.letters:
            demos.append((picks[letter][round_index], letter))
    return DemoSet(demos=tuple(demos), demos_per_class=demos_per_class)


def split_train_80_20(
    samples: Sequence[TimeSeriesSample],
) -> tuple[tuple[TimeSeriesSample, ...], tuple[TimeSeriesSample, ...]]:
    """Deterministic 80/20 split for datasets that ship without a test file.

    Within each class, samples are ranked by the SHA-256 of their id and the
    first 80% (rounded up) go to train. Original input order is preserved
    inside each returned split.
    """
    def rank(sample: TimeSeriesSample) -> str:
        return hashlib.sha256(sample.id.encode("utf-8")).hexdigest()

    train_ids: set[str] = set()
    by_label: dict[str, list[TimeSeriesSample]] = {}
    for sample in samples:
        by_label.setdefault(sample.label, []).append(sample)
    for pool in by_label.values():
        ordered = sorted(pool, key=rank)
        cut = math.ceil(0.8 * len(ordered))
        train_ids.update(s.id for s in ordered[:cut])

    train = tuple(
        dataclasses.replace(s, split="train") for s in samples if s.id in train_ids
    )
    test = tuple(
        dataclasses.replace(s, split="test") for s in samples if s.id not in train_ids
    )
    return train, test
