from __future__ import annotations

import math
import struct
import wave
from pathlib import Path

import numpy as np
import scipy.io


def _wave_values(length: int, freq: float, amp: float = 0.4) -> list[float]:
    return [amp * math.sin(2.0 * math.pi * freq * t / length) for t in range(length)]


def write_wav(path: Path, values: list[float], rate: int = 2000) -> None:
    data = (np.asarray(values) * 32767).astype("<i2").tobytes()
    with wave.open(str(path), "wb") as wav:
        wav.setnchannels(1)
        wav.setsampwidth(2)
        wav.setframerate(rate)
        wav.writeframes(data)


def build_rcw_archive(root: Path) -> Path:
    clips_dir = root / "train"
    clips_dir.mkdir(parents=True)
    rows = ["clip_name,label"]
    for index in range(10):
        label = index % 2
        name = f"clip{index:02d}.wav"
        # a couple of off-length clips exercise the resampling policy
        length = 4000 if index % 3 else 3600
        write_wav(clips_dir / name, _wave_values(length, 3.0 + label))
        rows.append(f"{name},{label}")
    (root / "train.csv").write_text("\n".join(rows) + "\n", encoding="utf-8")
    return root


def _write_ts(path: Path, name: str, rows: list[tuple[list[float], str]]) -> None:
    lines = [
        f"@problemName {name}",
        "@timeStamps false",
        "@univariate true",
        "@equalLength true",
        "@data",
    ]
    for values, label in rows:
        lines.append(",".join(f"{v:.4f}" for v in values) + f":{label}")
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def build_ucr_archive(root: Path, name: str, length: int, labels: list[str],
                      per_class_train: int = 2, per_class_test: int = 1) -> Path:
    root.mkdir(parents=True, exist_ok=True)
    train_rows = [
        (_wave_values(length, 2.0 + i), label)
        for label in labels for i in range(per_class_train)
    ]
    test_rows = [
        (_wave_values(length, 2.5 + i), label)
        for label in labels for i in range(per_class_test)
    ]
    _write_ts(root / f"{name}_TRAIN.ts", name, train_rows)
    _write_ts(root / f"{name}_TEST.ts", name, test_rows)
    return root


def build_ecg_archive(root: Path, per_class: int = 5) -> Path:
    root.mkdir(parents=True)
    rows = []
    index = 0
    for native in ("N", "A", "O", "~"):
        for _ in range(per_class):
            record = f"A{index:05d}"
            length = 1500 if index % 2 else 2700
            scipy.io.savemat(
                root / f"{record}.mat",
                {"val": np.asarray([_wave_values(length, 5.0)]) * 1000},
            )
            rows.append(f"{record},{native}")
            index += 1
    (root / "REFERENCE.csv").write_text("\n".join(rows) + "\n", encoding="utf-8")
    return root


def build_emg_archive(root: Path, windows_per_class: int = 5) -> Path:
    root.mkdir(parents=True)
    total = 1500 * windows_per_class
    for record in ("emg_healthy", "emg_neuropathy", "emg_myopathy"):
        (root / f"{record}.hea").write_text(
            f"{record} 1 4000 {total}\n{record}.dat 16 200 16 0 0 0 0 EMG\n",
            encoding="utf-8",
        )
        values = [int(2000 * math.sin(2.0 * math.pi * 7 * t / 1500)) for t in range(total)]
        (root / f"{record}.dat").write_bytes(struct.pack(f"<{total}h", *values))
    return root


def build_har_archive(root: Path, per_class_train: int = 2, per_class_test: int = 1) -> Path:
    for split, per_class in (("train", per_class_train), ("test", per_class_test)):
        signals = root / split / "Inertial Signals"
        signals.mkdir(parents=True)
        labels = []
        rows = {axis: [] for axis in "xyz"}
        for label in range(1, 7):
            for i in range(per_class):
                labels.append(str(label))
                for axis_index, axis in enumerate("xyz"):
                    rows[axis].append(_wave_values(128, 1.0 + label + axis_index + i))
        for axis in "xyz":
            text = "\n".join(
                " ".join(f"{v: .6e}" for v in row) for row in rows[axis]
            )
            (signals / f"body_acc_{axis}_{split}.txt").write_text(text + "\n", encoding="utf-8")
        (root / split / f"y_{split}.txt").write_text(
            "\n".join(labels) + "\n", encoding="utf-8"
        )
    return root


def build_archive(task: str, root: Path) -> Path:
    if task == "RCW":
        return build_rcw_archive(root)
    if task == "TEE":
        return build_ucr_archive(root, "Lightning7", 319,
                                 [str(i) for i in range(7)])
    if task == "ECG":
        return build_ecg_archive(root)
    if task == "EMG":
        return build_emg_archive(root)
    if task == "CTU":
        return build_ucr_archive(root, "Computers", 720, ["1", "2"],
                                 per_class_train=3, per_class_test=2)
    if task == "HAR":
        return build_har_archive(root)
    raise ValueError(task)
