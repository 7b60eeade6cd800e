"""Readers for the native on-disk formats of the supported sources."""
from __future__ import annotations

import struct
import wave
from pathlib import Path

import numpy as np
import scipy.io


class FormatError(Exception):
    pass


def read_ucr_ts(path: Path) -> list[tuple[list[float], str]]:
    """Parse a univariate classification .ts file.

    Header lines start with '@' or '#'; after '@data' each line is
    ``v1,v2,...,vn:label``.
    """
    rows: list[tuple[list[float], str]] = []
    in_data = False
    for lineno, line in enumerate(path.read_text(encoding="utf-8").splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if line.startswith("@"):
            if line.lower() == "@data":
                in_data = True
            continue
        if not in_data:
            raise FormatError(f"{path}:{lineno}: data before @data marker")
        if ":" not in line:
            raise FormatError(f"{path}:{lineno}: missing ':label' suffix")
        series_text, label = line.rsplit(":", 1)
        try:
            values = [float(v) for v in series_text.split(",")]
        except ValueError as exc:
            raise FormatError(f"{path}:{lineno}: bad float: {exc}") from exc
        rows.append((values, label.strip()))
    if not rows:
        raise FormatError(f"{path}: no data rows")
    return rows


def read_wav_mono(path: Path) -> list[float]:
    """Read a WAV clip as a mono float series in [-1, 1]."""
    with wave.open(str(path), "rb") as wav:
        n_channels = wav.getnchannels()
        sample_width = wav.getsampwidth()
        frames = wav.readframes(wav.getnframes())
    if sample_width != 2:
        raise FormatError(f"{path}: only 16-bit PCM supported, got width {sample_width}")
    data = np.frombuffer(frames, dtype="<i2").astype(float)
    if n_channels > 1:
        data = data.reshape(-1, n_channels).mean(axis=1)
    return (data / 32768.0).tolist()


def read_physionet_mat(path: Path) -> list[float]:
    """Read one waveform record stored as a MATLAB file with a 'val' matrix."""
    try:
        mat = scipy.io.loadmat(str(path))
    except Exception as exc:
        raise FormatError(f"{path}: not a readable MATLAB file: {exc}") from exc
    if "val" not in mat:
        raise FormatError(f"{path}: no 'val' matrix")
    values = np.asarray(mat["val"], dtype=float)
    if values.ndim != 2 or values.shape[0] < 1:
        raise FormatError(f"{path}: expected a 2-D 'val' matrix")
    return values[0].tolist()


def read_wfdb_record(header_path: Path) -> list[float]:
    """Read a single-signal WFDB record (format 16, little-endian).

    The header's first non-comment line is ``name nsig fs nsamples``; each
    signal line starts ``filename format gain(units)/...``. Samples convert
    to physical units by dividing by the gain.
    """
    lines = [
        line.strip() for line in header_path.read_text(encoding="utf-8").splitlines()
        if line.strip() and not line.startswith("#")
    ]
    if not lines:
        raise FormatError(f"{header_path}: empty header")
    head = lines[0].split()
    if len(head) < 2:
        raise FormatError(f"{header_path}: malformed record line")
    nsig = int(head[1])
    if nsig != 1:
        raise FormatError(f"{header_path}: only single-signal records supported, got {nsig}")
    signal = lines[1].split()
    if len(signal) < 3:
        raise FormatError(f"{header_path}: malformed signal line")
    dat_name, fmt, gain_field = signal[0], signal[1], signal[2]
    if fmt.split("+")[0] != "16":
        raise FormatError(f"{header_path}: only format 16 supported, got {fmt}")
    gain = float(gain_field.split("(")[0].split("/")[0]) or 200.0
    dat_path = header_path.parent / dat_name
    if not dat_path.is_file():
        raise FormatError(f"{header_path}: missing signal file {dat_name}")
    raw = dat_path.read_bytes()
    count = len(raw) // 2
    samples = struct.unpack(f"<{count}h", raw[: count * 2])
    return [s / gain for s in samples]


def read_uci_har_split(root: Path, split: str) -> tuple[list[list[list[float]]], list[str]]:
    """Read one UCI smartphone-recordings split.

    Returns (samples, labels) where each sample is [x, y, z] body linear
    acceleration rows aligned across the three per-axis files.
    """
    signals_dir = root / split / "Inertial Signals"
    label_path = root / split / f"y_{split}.txt"
    if not label_path.is_file():
        raise FormatError(f"missing {label_path}")
    axes = []
    for axis in ("x", "y", "z"):
        axis_path = signals_dir / f"body_acc_{axis}_{split}.txt"
        if not axis_path.is_file():
            raise FormatError(f"missing {axis_path}")
        rows = [
            [float(v) for v in line.split()]
            for line in axis_path.read_text(encoding="utf-8").splitlines()
            if line.strip()
        ]
        axes.append(rows)
    labels = [line.strip() for line in label_path.read_text(encoding="utf-8").splitlines()
              if line.strip()]
    if not (len(axes[0]) == len(axes[1]) == len(axes[2]) == len(labels)):
        raise FormatError(f"{root}/{split}: axis/label row counts disagree")
    samples = [[axes[0][i], axes[1][i], axes[2][i]] for i in range(len(labels))]
    return samples, labels


def to_length(values: list[float], target: int, policy: str = "linear_resample") -> list[float]:
    """Bring a series to exactly ``target`` samples."""
    n = len(values)
    if n == target:
        return list(values)
    if policy == "truncate":
        if n < target:
            raise FormatError(f"series of {n} samples cannot be truncated to {target}")
        return list(values[:target])
    if policy == "linear_resample":
        if n < 2:
            raise FormatError("need at least 2 samples to resample")
        positions = np.linspace(0.0, n - 1.0, target)
        return np.interp(positions, np.arange(n), np.asarray(values, dtype=float)).tolist()
    raise FormatError(f"unknown length policy {policy!r}")
