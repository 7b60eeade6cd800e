"""Shared domain types and the built-in task and anchor registries."""
from __future__ import annotations

import enum
from dataclasses import dataclass, field


class ReasoningPattern(enum.Enum):
    """Difficulty tier of a classification task's input-to-label mapping."""

    SIMPLE_DETERMINISTIC = "simple_deterministic"
    COMPLEX_DETERMINISTIC = "complex_deterministic"
    PROBABILISTIC = "probabilistic"


class Modeling(enum.Enum):
    """How a sample is presented to the model: serialized numbers or a chart image."""

    NUMERIC = "numeric"
    VISUAL = "visual"


MIN_DEMOS_PER_CLASS = 1
MAX_DEMOS_PER_CLASS = 6


@dataclass(frozen=True)
class ReasoningStrategy:
    """Prompting strategy: zero-shot, zero-shot chain-of-thought, or few-shot ICL.

    ``demos_per_class`` is set only for ICL and is bounded to 1..6.
    """

    kind: str  # "zst" | "cot" | "icl"
    demos_per_class: int | None = None

    def __post_init__(self) -> None:
        if self.kind not in ("zst", "cot", "icl"):
            raise ValueError(f"unknown strategy kind: {self.kind!r}")
        if self.kind == "icl":
            if self.demos_per_class is None or not (
                MIN_DEMOS_PER_CLASS <= self.demos_per_class <= MAX_DEMOS_PER_CLASS
            ):
                raise ValueError(
                    f"icl demos_per_class must be in {MIN_DEMOS_PER_CLASS}..{MAX_DEMOS_PER_CLASS}, "
                    f"got {self.demos_per_class!r}"
                )
        elif self.demos_per_class is not None:
            raise ValueError(f"{self.kind} takes no demos_per_class")

    @classmethod
    def zst(cls) -> ReasoningStrategy:
        return cls("zst")

    @classmethod
    def cot(cls) -> ReasoningStrategy:
        return cls("cot")

    @classmethod
    def icl(cls, demos_per_class: int) -> ReasoningStrategy:
        return cls("icl", demos_per_class)

    @classmethod
    def parse(cls, text: str) -> ReasoningStrategy:
        """Parse "zst", "cot", or "icl:<n>" (also accepts "icl-<n>")."""
        text = text.strip().lower()
        if text in ("zst", "cot"):
            return cls(text)
        for sep in (":", "-"):
            if text.startswith("icl" + sep):
                return cls.icl(int(text[len("icl" + sep):]))
        raise ValueError(f"cannot parse strategy {text!r}")

    def __str__(self) -> str:
        if self.kind == "icl":
            return f"icl:{self.demos_per_class}"
        return self.kind


@dataclass(frozen=True)
class TimeSeriesSample:
    """One labeled multivariate series: ``values[channel][time]``."""

    id: str
    values: tuple[tuple[float, ...], ...]
    label: str
    split: str  # "train" | "test"

    def __post_init__(self) -> None:
        if not self.values:
            raise ValueError(f"sample {self.id!r} has no channels")
        lengths = {len(ch) for ch in self.values}
        if len(lengths) != 1 or 0 in lengths:
            raise ValueError(
                f"sample {self.id!r} channels must share one nonzero length, got {sorted(lengths)}"
            )
        if self.split not in ("train", "test"):
            raise ValueError(f"sample {self.id!r} split must be train|test, got {self.split!r}")

    @property
    def num_variables(self) -> int:
        return len(self.values)

    @property
    def series_length(self) -> int:
        return len(self.values[0])


@dataclass(frozen=True)
class ClassDef:
    """One answer choice: canonical letter, display name, short description."""

    letter: str
    name: str
    description: str = ""


@dataclass(frozen=True)
class TaskSpec:
    """A classification task: question text, answer choices, and data shape."""

    name: str
    pattern: ReasoningPattern
    task_description: str
    classes: tuple[ClassDef, ...]
    num_variables: int
    series_length: int
    variable_labels: tuple[str, ...]
    sampling_rate_hz: float | None = None

    def __post_init__(self) -> None:
        if not self.classes:
            raise ValueError(f"task {self.name!r} has no classes")
        expected = [chr(ord("A") + i) for i in range(len(self.classes))]
        actual = [c.letter for c in self.classes]
        if actual != expected:
            raise ValueError(
                f"task {self.name!r} class letters must be {expected}, got {actual}"
            )
        if self.num_variables < 1 or self.series_length < 1:
            raise ValueError(f"task {self.name!r} needs num_variables, series_length >= 1")
        if len(self.variable_labels) != self.num_variables:
            raise ValueError(
                f"task {self.name!r} has {self.num_variables} variables but "
                f"{len(self.variable_labels)} variable_labels"
            )
        if self.sampling_rate_hz is not None and self.sampling_rate_hz <= 0:
            raise ValueError(f"task {self.name!r} sampling_rate_hz must be positive")

    @property
    def num_classes(self) -> int:
        return len(self.classes)

    @property
    def letters(self) -> tuple[str, ...]:
        return tuple(c.letter for c in self.classes)

    @property
    def random_guess_accuracy(self) -> float:
        """Accuracy of uniform random guessing, in percent."""
        return 100.0 / self.num_classes

    def class_by_letter(self, letter: str) -> ClassDef:
        for c in self.classes:
            if c.letter == letter:
                return c
        raise KeyError(f"task {self.name!r} has no class {letter!r}")

    def validate_sample(self, sample: TimeSeriesSample) -> None:
        """Raise ValueError if the sample's shape or label disagrees with this task."""
        if sample.num_variables != self.num_variables:
            raise ValueError(
                f"sample {sample.id!r}: expected {self.num_variables} channels, "
                f"got {sample.num_variables}"
            )
        if sample.series_length != self.series_length:
            raise ValueError(
                f"sample {sample.id!r}: expected length {self.series_length}, "
                f"got {sample.series_length}"
            )
        if sample.label not in self.letters:
            raise ValueError(
                f"sample {sample.id!r}: label {sample.label!r} not in {self.letters}"
            )


@dataclass(frozen=True)
class ReasoningTrace:
    """Raw model response plus the parsed answer letter, if any."""

    raw_response: str
    parsed_choice: str | None
    retries_used: int = 0

    def __post_init__(self) -> None:
        if self.retries_used < 0:
            raise ValueError("retries_used must be >= 0")


@dataclass(frozen=True)
class PriceConfig:
    """USD per million input/output tokens."""

    input_per_million: float = 0.0
    output_per_million: float = 0.0

    def __post_init__(self) -> None:
        if self.input_per_million < 0 or self.output_per_million < 0:
            raise ValueError("prices must be >= 0")


@dataclass(frozen=True)
class TaskAnchors:
    """Reference accuracies for one task: random guessing plus supervised models."""

    random_guess_accuracy: float
    supervised: dict[str, float] = field(default_factory=dict)

    def __post_init__(self) -> None:
        for name, acc in {"random guess": self.random_guess_accuracy, **self.supervised}.items():
            if not (0.0 <= acc <= 100.0):
                raise ValueError(f"anchor {name!r} accuracy {acc} outside [0, 100]")


@dataclass(frozen=True)
class AnchorTable:
    """Per-task reference accuracies used to normalize and rank LLM results."""

    tasks: dict[str, TaskAnchors]

    def __getitem__(self, task: str) -> TaskAnchors:
        return self.tasks[task]

    def __contains__(self, task: str) -> bool:
        return task in self.tasks


# ---------------------------------------------------------------------------
# Built-in task registry
# ---------------------------------------------------------------------------

_RCW_DESCRIPTION = (
    "Play the role of a marine biology expert: is there a right whale call in the record?"
)

_TEE_DESCRIPTION = (
    "Based on the power density time series data and select the transient electromagnetic "
    "event that best matches. The FORTE satellite detects transient electromagnetic events "
    "associated with lightning using a suite of optical and radio-frequency (RF) instruments. "
    "There are 7 event types. CG Positive Initial Return Stroke: A positive charge is lowered "
    "from a cloud to the ground. The characteristic feature of this type of event in the power "
    "density time series is a sharp turn-on of radiation, followed by a few hundreds of "
    "microseconds of noise; IR Negative Initial Return Stroke: A negative charge is lowered "
    "from a cloud to ground. The power waveform slowly ramps up to a level known as an "
    "attachment point, where a large surge current causes the VHF power to 'spike'. This "
    "attachment is followed by an exponentially shaped decline in the waveform.; SR Subsequent "
    "Negative Return Stroke: A negative charge is lowered from a cloud to ground. As the name "
    "implies, subsequent return strokes come after initial return strokes. Note that subsequent "
    "positive return strokes don't exist. I Impulsive Event: Typically an intra-cloud event "
    "characterized by a sudden peak in the waveform. I2 Impulsive Event Pair: Another "
    "intra-cloud event characterized by sudden peaks in the waveform that come in closely "
    "separated pairs. These are also called TIPPs (Trans-Ionospheric Pulse Pairs). KM Gradual "
    "Intra-Cloud Stroke: An intra-cloud event which increases in power more gradually than an "
    "impulsive event. O Off-record: 800 microseconds was not enough to fully capture the "
    "lightning event."
)

_ECG_DESCRIPTION = (
    "As a cardiologist, you are tasked with classifying a patient's heart condition based on "
    "single-lead ECG recordings."
)

_EMG_DESCRIPTION = (
    "As an Electromyograms (EMG) analysis expert, you are tasked with determining the type of "
    "the subject based on the EMG record."
)

_CTU_DESCRIPTION = (
    "Play as a computer energy consumption analysis expert, please correctly determine whether "
    "this computer is a desktop or a laptop based on the 24-hour power consumption data."
)

_HAR_DESCRIPTION = (
    "As a human activity recognition expert, you are tasked with determining the type of "
    "activity performed by the subject based on the accelerometer record series along the x, "
    "y, and z axes over time."
)

_BUILTIN_TASKS: tuple[TaskSpec, ...] = (
    TaskSpec(
        name="RCW",
        pattern=ReasoningPattern.SIMPLE_DETERMINISTIC,
        task_description=_RCW_DESCRIPTION,
        classes=(
            ClassDef("A", "no right whale call", "only ambient ocean noise or other sounds"),
            ClassDef("B", "right whale call", "a brief up-call that sweeps upward in pitch"),
        ),
        num_variables=1,
        series_length=4000,
        variable_labels=("amplitude",),
    ),
    TaskSpec(
        name="TEE",
        pattern=ReasoningPattern.SIMPLE_DETERMINISTIC,
        task_description=_TEE_DESCRIPTION,
        classes=(
            ClassDef("A", "CG Positive Initial Return Stroke",
                     "sharp turn-on of radiation followed by hundreds of microseconds of noise"),
            ClassDef("B", "IR Negative Initial Return Stroke",
                     "slow ramp to an attachment point, a spike, then an exponential decline"),
            ClassDef("C", "SR Subsequent Negative Return Stroke",
                     "negative return stroke arriving after an initial return stroke"),
            ClassDef("D", "I Impulsive Event", "single sudden peak from an intra-cloud event"),
            ClassDef("E", "I2 Impulsive Event Pair",
                     "two sudden peaks in a closely separated pair"),
            ClassDef("F", "KM Gradual Intra-Cloud Stroke",
                     "power increases more gradually than an impulsive event"),
            ClassDef("G", "O Off-record",
                     "event not fully captured within the 800 microsecond record"),
        ),
        num_variables=1,
        series_length=319,
        variable_labels=("power",),
    ),
    TaskSpec(
        name="ECG",
        pattern=ReasoningPattern.COMPLEX_DETERMINISTIC,
        task_description=_ECG_DESCRIPTION,
        classes=(
            ClassDef("A", "normal sinus rhythm", "regular rhythm with consistent beat spacing"),
            ClassDef("B", "fibrillation", "irregularly irregular rhythm without clear P waves"),
            ClassDef("C", "alternative rhythm", "an abnormal rhythm other than fibrillation"),
            ClassDef("D", "too noisy to be classified", "signal quality too poor to interpret"),
        ),
        num_variables=1,
        series_length=1500,
        variable_labels=("signal",),
    ),
    TaskSpec(
        name="EMG",
        pattern=ReasoningPattern.COMPLEX_DETERMINISTIC,
        task_description=_EMG_DESCRIPTION,
        classes=(
            ClassDef("A", "healthy", "normal motor unit potentials"),
            ClassDef("B", "neuropathy", "high-amplitude, long-duration, polyphasic potentials"),
            ClassDef("C", "myopathy", "low-amplitude, short-duration potentials"),
        ),
        num_variables=1,
        series_length=1500,
        variable_labels=("signal",),
    ),
    TaskSpec(
        name="CTU",
        pattern=ReasoningPattern.PROBABILISTIC,
        task_description=_CTU_DESCRIPTION,
        classes=(
            ClassDef("A", "desktop", "higher, sustained draw while in use"),
            ClassDef("B", "laptop", "lower draw with battery charge cycles"),
        ),
        num_variables=1,
        series_length=720,
        variable_labels=("power",),
    ),
    TaskSpec(
        name="HAR",
        pattern=ReasoningPattern.PROBABILISTIC,
        task_description=_HAR_DESCRIPTION,
        classes=(
            ClassDef("A", "walking", "periodic acceleration at a steady cadence"),
            ClassDef("B", "walking upstairs", "periodic with pronounced vertical effort"),
            ClassDef("C", "walking downstairs", "periodic with sharp impact spikes"),
            ClassDef("D", "sitting", "near-static, low variance"),
            ClassDef("E", "standing", "near-static with gravity along one axis"),
            ClassDef("F", "lying down", "near-static with gravity rotated across axes"),
        ),
        num_variables=3,
        series_length=206,
        variable_labels=("x", "y", "z"),
    ),
)

BUILTIN_TASK_NAMES: tuple[str, ...] = tuple(t.name for t in _BUILTIN_TASKS)


def builtin_task_registry() -> dict[str, TaskSpec]:
    """Return the six built-in task specifications keyed by name."""
    return {t.name: t for t in _BUILTIN_TASKS}


# Supervised reference accuracies per task, in percent, in a fixed model order.
_SUPERVISED_MODELS = (
    "Transformer", "Autoformer", "Informer", "FEDformer",
    "PatchTST", "iTransformer", "TimesNet", "DLinear",
)

_SUPERVISED_ACCURACIES: dict[str, tuple[float, ...]] = {
    "RCW": (64.12, 62.59, 75.51, 76.59, 82.11, 76.92, 80.23, 56.96),
    "TEE": (59.52, 26.19, 59.52, 42.86, 57.14, 21.43, 61.90, 47.63),
    "ECG": (25.00, 23.95, 22.39, 26.40, 24.82, 24.48, 26.20, 23.61),
    "EMG": (86.67, 46.67, 66.66, 73.33, 60.00, 46.67, 73.33, 46.67),
    "CTU": (59.20, 67.20, 67.20, 51.60, 64.00, 46.40, 64.00, 52.40),
    "HAR": (87.26, 75.04, 85.83, 89.88, 79.60, 89.49, 88.65, 48.97),
}


def builtin_anchor_table() -> AnchorTable:
    """Reference accuracies for the six built-in tasks.

    Random-guess entries are exact (100 / number of classes); supervised entries
    are fixed reference numbers for the eight baseline models.
    """
    registry = builtin_task_registry()
    tasks = {}
    for name, accs in _SUPERVISED_ACCURACIES.items():
        tasks[name] = TaskAnchors(
            random_guess_accuracy=registry[name].random_guess_accuracy,
            supervised=dict(zip(_SUPERVISED_MODELS, accs)),
        )
    return AnchorTable(tasks=tasks)
