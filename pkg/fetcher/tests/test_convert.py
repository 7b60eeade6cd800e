from __future__ import annotations

import json
import subprocess
import sys
import zipfile
from collections import Counter
from pathlib import Path

import pytest

from tsfetch.convert import ConversionError, DownloadFailed, fetch_convert
from tsfetch.sources import SOURCES
from tsfetch.verify import MismatchReport, verify

from .conftest import build_archive, build_ucr_archive

ALL_TASKS = ("RCW", "TEE", "ECG", "EMG", "CTU", "HAR")

EXPECTED_DIMS = {
    "RCW": (1, 4000, 2),
    "TEE": (1, 319, 7),
    "ECG": (1, 1500, 4),
    "EMG": (1, 1500, 3),
    "CTU": (1, 720, 2),
    "HAR": (3, 206, 6),
}


def _harness_validate(dataset_dir: Path) -> subprocess.CompletedProcess:
    return subprocess.run(
        [sys.executable, "-m", "tseval.cli", "validate", str(dataset_dir)],
        capture_output=True, text=True, timeout=120,
    )


@pytest.mark.parametrize("task", ALL_TASKS)
def test_convert_verify_and_harness_validate(task, tmp_path):
    archive = build_archive(task, tmp_path / "raw")
    out = fetch_convert(task, tmp_path / "out", archive=archive)

    stats = verify(out)
    assert (stats.num_variables, stats.series_length, stats.num_classes) == EXPECTED_DIMS[task]
    assert stats.train_count > 0 and stats.test_count > 0

    result = _harness_validate(out)
    assert result.returncode == 0, result.stdout + result.stderr

    d, length, classes = EXPECTED_DIMS[task]
    assert f"{classes} classes, {d} channels, {length} points" in result.stdout


@pytest.mark.parametrize("task", ALL_TASKS)
def test_conversion_is_idempotent(task, tmp_path):
    archive = build_archive(task, tmp_path / "raw")
    first = fetch_convert(task, tmp_path / "a", archive=archive)
    second = fetch_convert(task, tmp_path / "b", archive=archive)
    for name in ("manifest.json", "train.jsonl", "test.jsonl", "checksums.sha256"):
        assert (first / name).read_bytes() == (second / name).read_bytes(), name


def test_limit_is_class_proportional(tmp_path):
    archive = build_ucr_archive(tmp_path / "raw", "Computers", 720, ["1", "2"],
                                per_class_train=6, per_class_test=4)
    out = fetch_convert("CTU", tmp_path / "out", archive=archive, limit=4)
    for split in ("train", "test"):
        rows = [json.loads(line) for line in
                (out / f"{split}.jsonl").read_text(encoding="utf-8").splitlines()]
        assert len(rows) <= 4
        counts = Counter(row["label"] for row in rows)
        assert max(counts.values()) - min(counts.values()) <= 1


def test_zip_archive_accepted(tmp_path):
    raw = build_archive("CTU", tmp_path / "raw")
    zip_path = tmp_path / "ctu.zip"
    with zipfile.ZipFile(zip_path, "w") as zf:
        for path in sorted(raw.rglob("*")):
            zf.write(path, path.relative_to(raw))
    out = fetch_convert("CTU", tmp_path / "out", archive=zip_path)
    assert verify(out).name == "CTU"


def test_unmapped_label_is_conversion_error(tmp_path):
    archive = build_archive("ECG", tmp_path / "raw")
    reference = archive / "REFERENCE.csv"
    lines = reference.read_text(encoding="utf-8").splitlines()
    lines[0] = lines[0].rsplit(",", 1)[0] + ",X"
    reference.write_text("\n".join(lines) + "\n", encoding="utf-8")
    with pytest.raises(ConversionError, match="unmapped native label"):
        fetch_convert("ECG", tmp_path / "out", archive=archive)


def test_verify_catches_tampered_length(tmp_path):
    archive = build_archive("CTU", tmp_path / "raw")
    out = fetch_convert("CTU", tmp_path / "out", archive=archive)
    test_file = out / "test.jsonl"
    rows = test_file.read_text(encoding="utf-8").splitlines()
    row = json.loads(rows[0])
    row["values"][0] = row["values"][0][:-3]
    rows[0] = json.dumps(row)
    test_file.write_text("\n".join(rows) + "\n", encoding="utf-8")
    with pytest.raises(MismatchReport, match="length"):
        verify(out)


def test_verify_catches_missing_split(tmp_path):
    archive = build_archive("CTU", tmp_path / "raw")
    out = fetch_convert("CTU", tmp_path / "out", archive=archive)
    (out / "test.jsonl").unlink()
    with pytest.raises(MismatchReport, match="missing test.jsonl"):
        verify(out)


def test_login_walled_host_requires_archive(tmp_path):
    with pytest.raises(DownloadFailed, match="from-archive"):
        fetch_convert("ECG", tmp_path / "out", cache_dir=tmp_path / "cache")


def test_all_sources_have_canonical_shapes():
    for task, source in SOURCES.items():
        manifest = source.manifest
        assert manifest["num_variables"] == source.num_variables
        assert manifest["series_length"] == source.series_length
        assert len(manifest["classes"]) == source.num_classes
        letters = [c["letter"] for c in manifest["classes"]]
        assert letters == [chr(ord("A") + i) for i in range(len(letters))]
        assert set(source.label_map.values()) == set(letters), task
