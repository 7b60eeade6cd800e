"""Post-conversion checks against the expected task shapes."""
from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

from .sources import SOURCES


class MismatchReport(Exception):
    """One or more converted files disagree with the expected task shape."""

    def __init__(self, problems: list[str]) -> None:
        super().__init__("; ".join(problems))
        self.problems = problems


@dataclass(frozen=True)
class DatasetStats:
    name: str
    num_variables: int
    series_length: int
    num_classes: int
    train_count: int
    test_count: int

    def summary(self) -> str:
        return (
            f"{self.name}: {self.num_variables} channels, {self.series_length} points, "
            f"{self.num_classes} classes; train={self.train_count}, test={self.test_count}"
        )


def _count_split(path: Path, expected_channels: int, expected_length: int,
                 letters: set[str], problems: list[str]) -> int:
    count = 0
    with path.open(encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                row = json.loads(line)
            except json.JSONDecodeError:
                problems.append(f"{path.name}:{lineno}: invalid JSON")
                continue
            count += 1
            values = row.get("values", [])
            if len(values) != expected_channels:
                problems.append(
                    f"{path.name}:{lineno}: {len(values)} channels, expected {expected_channels}"
                )
                continue
            for channel in values:
                if len(channel) != expected_length:
                    problems.append(
                        f"{path.name}:{lineno}: length {len(channel)}, "
                        f"expected {expected_length}"
                    )
                    break
            if row.get("label") not in letters:
                problems.append(f"{path.name}:{lineno}: label {row.get('label')!r} unknown")
    return count


def verify(dataset_dir: str | Path) -> DatasetStats:
    """Check a converted directory; returns stats or raises MismatchReport."""
    root = Path(dataset_dir)
    problems: list[str] = []
    manifest_path = root / "manifest.json"
    if not manifest_path.is_file():
        raise MismatchReport([f"missing {manifest_path}"])
    manifest = json.loads(manifest_path.read_text(encoding="utf-8"))
    name = manifest.get("name", "?")
    letters = {c["letter"] for c in manifest.get("classes", [])}

    expected = SOURCES.get(name)
    if expected is None:
        problems.append(f"manifest task {name!r} is not a known source")
    else:
        if manifest.get("num_variables") != expected.num_variables:
            problems.append(
                f"num_variables {manifest.get('num_variables')} != {expected.num_variables}"
            )
        if manifest.get("series_length") != expected.series_length:
            problems.append(
                f"series_length {manifest.get('series_length')} != {expected.series_length}"
            )
        if len(letters) != expected.num_classes:
            problems.append(f"{len(letters)} classes != {expected.num_classes}")

    counts = {}
    for split in ("train", "test"):
        split_path = root / f"{split}.jsonl"
        if not split_path.is_file():
            problems.append(f"missing {split_path.name}")
            counts[split] = 0
            continue
        counts[split] = _count_split(
            split_path,
            manifest.get("num_variables", 0),
            manifest.get("series_length", 0),
            letters,
            problems,
        )
        if counts[split] == 0:
            problems.append(f"{split_path.name}: empty split")

    if problems:
        raise MismatchReport(problems)
    return DatasetStats(
        name=name,
        num_variables=manifest["num_variables"],
        series_length=manifest["series_length"],
        num_classes=len(letters),
        train_count=counts["train"],
        test_count=counts["test"],
    )
