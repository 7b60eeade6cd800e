"""Conversion from native source layouts to the canonical dataset directory.

Output layout (consumed by the evaluation harness's loader and validator):

    manifest.json, train.jsonl, test.jsonl, checksums.sha256

Conversion is idempotent: floats are written with Python's shortest
round-trip repr, iteration orders are fixed, and nothing timestamped is
emitted, so re-running over the same archive reproduces identical bytes.
"""
from __future__ import annotations

import csv
import hashlib
import json
import math
import tempfile
import zipfile
from dataclasses import dataclass
from pathlib import Path

from .formats import (
    FormatError,
    read_physionet_mat,
    read_ucr_ts,
    read_uci_har_split,
    read_wav_mono,
    read_wfdb_record,
    to_length,
)
from .sources import SOURCES, SourceSpec


class ConvertError(Exception):
    pass


class DownloadFailed(ConvertError):
    pass


class ChecksumMismatch(ConvertError):
    pass


class ConversionError(ConvertError):
    def __init__(self, sample_id: str, message: str) -> None:
        super().__init__(f"{sample_id}: {message}")
        self.sample_id = sample_id


@dataclass(frozen=True)
class RawSample:
    id: str
    channels: list[list[float]]
    letter: str


# ---------------------------------------------------------------------------
# Archive handling and download
# ---------------------------------------------------------------------------

def resolve_archive(path: Path) -> Path:
    """Accept a directory or a .zip; zips are unpacked to a temp directory."""
    if path.is_dir():
        return path
    if path.is_file() and path.suffix == ".zip":
        target = Path(tempfile.mkdtemp(prefix="tsfetch-"))
        with zipfile.ZipFile(path) as archive:
            archive.extractall(target)
        return target
    raise ConvertError(f"archive path {path} is neither a directory nor a .zip")


def download_archive(source: SourceSpec, cache_dir: Path) -> Path:
    """Download the source's first direct-link archive into the cache.

    Hosts that require a login (Kaggle, PhysioNet) have no direct link; use
    --from-archive with a manually downloaded copy instead.
    """
    import requests

    url = source.urls[0]
    if not url.endswith(".zip"):
        raise DownloadFailed(
            f"{source.task}: {url} is not a direct archive link; download it "
            f"manually and pass --from-archive"
        )
    cache_dir.mkdir(parents=True, exist_ok=True)
    target = cache_dir / f"{source.task}.zip"
    if not target.exists():
        try:
            response = requests.get(url, timeout=120)
            response.raise_for_status()
        except Exception as exc:
            raise DownloadFailed(f"{source.task}: {url}: {exc}") from exc
        target.write_bytes(response.content)
    if source.archive_sha256:
        digest = hashlib.sha256(target.read_bytes()).hexdigest()
        if digest != source.archive_sha256:
            raise ChecksumMismatch(
                f"{source.task}: archive sha256 {digest} != expected {source.archive_sha256}"
            )
    return target


# ---------------------------------------------------------------------------
# Per-source readers -> RawSamples with native split tags
# ---------------------------------------------------------------------------

def _find_one(root: Path, pattern: str) -> Path:
    matches = sorted(root.rglob(pattern))
    if not matches:
        raise ConvertError(f"no file matching {pattern!r} under {root}")
    return matches[0]


def _map_label(source: SourceSpec, native: str, sample_id: str) -> str:
    native = native.strip()
    if native not in source.label_map:
        raise ConversionError(sample_id, f"unmapped native label {native!r}")
    return source.label_map[native]


def _read_rcw(source: SourceSpec, root: Path) -> dict[str, list[RawSample]]:
    labels_path = _find_one(root, "train.csv")
    clips_dir = labels_path.parent
    samples = []
    with labels_path.open(encoding="utf-8", newline="") as fh:
        for row in csv.DictReader(fh):
            clip, native = row["clip_name"], row["label"]
            sample_id = f"RCW-{Path(clip).stem}"
            clip_path = clips_dir / "train" / clip
            if not clip_path.is_file():
                raise ConversionError(sample_id, f"missing clip file {clip_path}")
            try:
                series = read_wav_mono(clip_path)
                series = to_length(series, source.series_length, source.length_policy)
            except FormatError as exc:
                raise ConversionError(sample_id, str(exc)) from exc
            samples.append(RawSample(sample_id, [series], _map_label(source, native, sample_id)))
    return {"all": samples}


def _read_ucr(source: SourceSpec, root: Path) -> dict[str, list[RawSample]]:
    splits = {}
    for split, suffix in (("train", "*_TRAIN.ts"), ("test", "*_TEST.ts")):
        rows = read_ucr_ts(_find_one(root, suffix))
        samples = []
        for index, (values, native) in enumerate(rows):
            sample_id = f"{source.task}-{split}-{index:04d}"
            try:
                series = to_length(values, source.series_length, source.length_policy)
            except FormatError as exc:
                raise ConversionError(sample_id, str(exc)) from exc
            samples.append(RawSample(sample_id, [series], _map_label(source, native, sample_id)))
        splits[split] = samples
    return splits


def _read_ecg(source: SourceSpec, root: Path) -> dict[str, list[RawSample]]:
    reference = _find_one(root, "REFERENCE.csv")
    records_dir = reference.parent
    samples = []
    with reference.open(encoding="utf-8", newline="") as fh:
        for row in csv.reader(fh):
            if not row:
                continue
            record, native = row[0].strip(), row[1]
            sample_id = f"ECG-{record}"
            mat_path = records_dir / f"{record}.mat"
            if not mat_path.is_file():
                raise ConversionError(sample_id, f"missing record file {mat_path}")
            try:
                series = read_physionet_mat(mat_path)
                series = to_length(series, source.series_length, source.length_policy)
            except FormatError as exc:
                raise ConversionError(sample_id, str(exc)) from exc
            samples.append(RawSample(sample_id, [series], _map_label(source, native, sample_id)))
    return {"all": samples}


def _read_emg(source: SourceSpec, root: Path) -> dict[str, list[RawSample]]:
    samples = []
    headers = sorted(root.rglob("*.hea"))
    if not headers:
        raise ConvertError(f"no WFDB headers under {root}")
    for header in headers:
        stem = header.stem.lower()
        native = next((key for key in source.label_map if key in stem), None)
        if native is None:
            raise ConversionError(f"EMG-{header.stem}", f"cannot infer class from {header.name}")
        try:
            series = read_wfdb_record(header)
        except FormatError as exc:
            raise ConversionError(f"EMG-{header.stem}", str(exc)) from exc
        window = source.series_length
        count = len(series) // window
        if count == 0:
            raise ConversionError(f"EMG-{header.stem}", f"record shorter than {window} samples")
        for index in range(count):
            segment = series[index * window:(index + 1) * window]
            sample_id = f"EMG-{header.stem}-{index:03d}"
            samples.append(
                RawSample(sample_id, [segment], _map_label(source, native, sample_id))
            )
    return {"all": samples}


def _read_har(source: SourceSpec, root: Path) -> dict[str, list[RawSample]]:
    base = root
    if not (base / "train").is_dir():
        candidates = [p for p in root.rglob("train") if p.is_dir()]
        if not candidates:
            raise ConvertError(f"no train/ directory under {root}")
        base = sorted(candidates)[0].parent
    splits = {}
    for split in ("train", "test"):
        try:
            rows, labels = read_uci_har_split(base, split)
        except FormatError as exc:
            raise ConvertError(str(exc)) from exc
        samples = []
        for index, (channels, native) in enumerate(zip(rows, labels)):
            sample_id = f"HAR-{split}-{index:05d}"
            try:
                resampled = [
                    to_length(channel, source.series_length, source.length_policy)
                    for channel in channels
                ]
            except FormatError as exc:
                raise ConversionError(sample_id, str(exc)) from exc
            samples.append(RawSample(sample_id, resampled, _map_label(source, native, sample_id)))
        splits[split] = samples
    return splits


_READERS = {
    "wav_clips": _read_rcw,
    "ucr_ts": _read_ucr,
    "physionet_mat": _read_ecg,
    "wfdb": _read_emg,
    "uci_har_txt": _read_har,
}


# ---------------------------------------------------------------------------
# Splitting, limiting, writing
# ---------------------------------------------------------------------------

def _hash_split(samples: list[RawSample]) -> dict[str, list[RawSample]]:
    """Deterministic 80/20 split per class, ranked by sha256 of the sample id."""
    def rank(sample: RawSample) -> str:
        return hashlib.sha256(sample.id.encode("utf-8")).hexdigest()

    train_ids = set()
    by_class: dict[str, list[RawSample]] = {}
    for sample in samples:
        by_class.setdefault(sample.letter, []).append(sample)
    for pool in by_class.values():
        ordered = sorted(pool, key=rank)
        cut = math.ceil(0.8 * len(ordered))
        train_ids.update(s.id for s in ordered[:cut])
    return {
        "train": [s for s in samples if s.id in train_ids],
        "test": [s for s in samples if s.id not in train_ids],
    }


def _limit_per_split(samples: list[RawSample], limit: int | None) -> list[RawSample]:
    """Cap a split at ``limit`` samples, drawing classes round-robin in
    first-seen order so the cap stays class-proportional."""
    if limit is None or len(samples) <= limit:
        return samples
    by_class: dict[str, list[RawSample]] = {}
    order: list[str] = []
    for sample in samples:
        if sample.letter not in by_class:
            order.append(sample.letter)
        by_class.setdefault(sample.letter, []).append(sample)
    picked: list[RawSample] = []
    round_index = 0
    while len(picked) < limit:
        advanced = False
        for letter in order:
            pool = by_class[letter]
            if round_index < len(pool):
                picked.append(pool[round_index])
                advanced = True
                if len(picked) == limit:
                    break
        if not advanced:
            break
        round_index += 1
    ordered_ids = {s.id for s in picked}
    return [s for s in samples if s.id in ordered_ids]


def _write_dataset(source: SourceSpec, splits: dict[str, list[RawSample]], out_dir: Path) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    manifest = dict(source.manifest)
    manifest["conversion"] = {
        "source_format": source.native_format,
        "length_policy": source.length_policy,
        "channel_selection": (
            "body linear acceleration x/y/z" if source.task == "HAR" else "native"
        ),
    }
    (out_dir / "manifest.json").write_text(
        json.dumps(manifest, indent=2, ensure_ascii=False) + "\n", encoding="utf-8"
    )
    for split in ("train", "test"):
        with (out_dir / f"{split}.jsonl").open("w", encoding="utf-8") as fh:
            for sample in splits[split]:
                fh.write(
                    json.dumps(
                        {"id": sample.id, "label": sample.letter, "values": sample.channels},
                        ensure_ascii=False,
                    )
                    + "\n"
                )
    checksum_lines = []
    for name in ("manifest.json", "train.jsonl", "test.jsonl"):
        digest = hashlib.sha256((out_dir / name).read_bytes()).hexdigest()
        checksum_lines.append(f"{digest}  {name}")
    (out_dir / "checksums.sha256").write_text(
        "\n".join(checksum_lines) + "\n", encoding="utf-8"
    )


def fetch_convert(
    task: str,
    out_dir: str | Path,
    *,
    archive: str | Path | None = None,
    limit: int | None = None,
    cache_dir: str | Path = Path("archives"),
) -> Path:
    """Convert one task's raw source into a canonical dataset directory.

    ``archive`` points at a pre-downloaded directory or zip; without it the
    source archive is fetched (only for hosts with direct links). The native
    train/test split is honored when the source has one; otherwise a
    deterministic 80/20 split by id hash is applied. ``limit`` caps each
    split class-proportionally.
    """
    if task not in SOURCES:
        raise ConvertError(f"unknown task {task!r}; expected one of {sorted(SOURCES)}")
    source = SOURCES[task]
    if archive is not None:
        root = resolve_archive(Path(archive))
    else:
        root = resolve_archive(download_archive(source, Path(cache_dir)))

    splits = _READERS[source.native_format](source, root)
    if "all" in splits:
        splits = _hash_split(splits["all"])
    splits = {name: _limit_per_split(samples, limit) for name, samples in splits.items()}

    for name in ("train", "test"):
        if not splits.get(name):
            raise ConvertError(f"{task}: conversion produced an empty {name} split")
    out = Path(out_dir)
    _write_dataset(source, splits, out)
    return out
