from __future__ import annotations

import math
import random

import pytest

from tseval.core import TaskSpec, TimeSeriesSample, builtin_task_registry
from tseval.ingest import Dataset, save_dataset

_SPLIT_OFFSET = {"train": 0, "test": 1}


def synth_sample(spec: TaskSpec, letter: str, index: int, split: str, seed: int = 0) -> TimeSeriesSample:
    """Deterministic class-dependent waveform: per-class frequency and
    amplitude plus a little seeded noise."""
    class_index = spec.letters.index(letter)
    rng = random.Random((seed * 1000 + class_index) * 10 + _SPLIT_OFFSET[split] * 5 + index)
    length = spec.series_length
    channels = []
    for ch in range(spec.num_variables):
        freq = 2.0 * (class_index + 1) + ch
        amp = 1.0 + 0.5 * class_index
        channels.append(tuple(
            round(amp * math.sin(2.0 * math.pi * freq * t / length)
                  + 0.05 * rng.uniform(-1.0, 1.0), 6)
            for t in range(length)
        ))
    return TimeSeriesSample(
        id=f"{spec.name}-{split}-{letter}{index}",
        values=tuple(channels),
        label=letter,
        split=split,
    )


def make_dataset(task_name: str, n_train: int = 3, n_test: int = 3, seed: int = 0) -> Dataset:
    spec = builtin_task_registry()[task_name]
    train = [
        synth_sample(spec, letter, i, "train", seed)
        for letter in spec.letters for i in range(n_train)
    ]
    test = [
        synth_sample(spec, letter, i, "test", seed)
        for letter in spec.letters for i in range(n_test)
    ]
    return Dataset(spec=spec, train=tuple(train), test=tuple(test))


@pytest.fixture(scope="session")
def registry():
    return builtin_task_registry()


@pytest.fixture(scope="session")
def ctu_dataset():
    return make_dataset("CTU")


@pytest.fixture(scope="session")
def har_dataset():
    return make_dataset("HAR")


@pytest.fixture()
def ctu_dataset_dir(tmp_path, ctu_dataset):
    path = tmp_path / "ctu"
    save_dataset(ctu_dataset, path)
    return path


@pytest.fixture()
def har_dataset_dir(tmp_path, har_dataset):
    path = tmp_path / "har"
    save_dataset(har_dataset, path)
    return path
