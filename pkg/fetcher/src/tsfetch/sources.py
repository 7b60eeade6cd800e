"""Source metadata for the six supported tasks.

Each entry pins the public download location, the native on-disk format, the
channel/label mapping, and the exact output shape the converted dataset must
have.  The manifest content here mirrors the evaluation harness's built-in
task registry; `tsfetch verify` and the harness's `tseval validate` both check
converted output against these shapes.
"""
from __future__ import annotations

from dataclasses import dataclass, field


@dataclass(frozen=True)
class SourceSpec:
    """Where a task's raw data lives and how to convert it."""

    task: str
    urls: tuple[str, ...]
    native_format: str  # "wav_clips" | "ucr_ts" | "physionet_mat" | "wfdb" | "uci_har_txt"
    num_variables: int
    series_length: int
    num_classes: int
    manifest: dict = field(repr=False, default_factory=dict)
    #: native label value -> class letter
    label_map: dict = field(default_factory=dict)
    #: how raw series are brought to series_length when lengths differ
    length_policy: str = "linear_resample"
    #: sha256 of the expected archive; checked when downloads are used
    archive_sha256: str | None = None


_RCW_MANIFEST = {
    "name": "RCW",
    "pattern": "simple_deterministic",
    "task_description": (
        "Play the role of a marine biology expert: is there a right whale call in the record?"
    ),
    "classes": [
        {"letter": "A", "name": "no right whale call",
         "description": "only ambient ocean noise or other sounds"},
        {"letter": "B", "name": "right whale call",
         "description": "a brief up-call that sweeps upward in pitch"},
    ],
    "num_variables": 1,
    "series_length": 4000,
    "variable_labels": ["amplitude"],
    "sampling_rate_hz": None,
}

_TEE_MANIFEST = {
    "name": "TEE",
    "pattern": "simple_deterministic",
    "task_description": (
        "Based on the power density time series data and select the transient electromagnetic "
        "event that best matches. The FORTE satellite detects transient electromagnetic events "
        "associated with lightning using a suite of optical and radio-frequency (RF) "
        "instruments. There are 7 event types. CG Positive Initial Return Stroke: A positive "
        "charge is lowered from a cloud to the ground. The characteristic feature of this type "
        "of event in the power density time series is a sharp turn-on of radiation, followed "
        "by a few hundreds of microseconds of noise; IR Negative Initial Return Stroke: A "
        "negative charge is lowered from a cloud to ground. The power waveform slowly ramps up "
        "to a level known as an attachment point, where a large surge current causes the VHF "
        "power to 'spike'. This attachment is followed by an exponentially shaped decline in "
        "the waveform.; SR Subsequent Negative Return Stroke: A negative charge is lowered "
        "from a cloud to ground. As the name implies, subsequent return strokes come after "
        "initial return strokes. Note that subsequent positive return strokes don't exist. I "
        "Impulsive Event: Typically an intra-cloud event characterized by a sudden peak in the "
        "waveform. I2 Impulsive Event Pair: Another intra-cloud event characterized by sudden "
        "peaks in the waveform that come in closely separated pairs. These are also called "
        "TIPPs (Trans-Ionospheric Pulse Pairs). KM Gradual Intra-Cloud Stroke: An intra-cloud "
        "event which increases in power more gradually than an impulsive event. O Off-record: "
        "800 microseconds was not enough to fully capture the lightning event."
    ),
    "classes": [
        {"letter": "A", "name": "CG Positive Initial Return Stroke",
         "description": "sharp turn-on of radiation followed by hundreds of microseconds of noise"},
        {"letter": "B", "name": "IR Negative Initial Return Stroke",
         "description": "slow ramp to an attachment point, a spike, then an exponential decline"},
        {"letter": "C", "name": "SR Subsequent Negative Return Stroke",
         "description": "negative return stroke arriving after an initial return stroke"},
        {"letter": "D", "name": "I Impulsive Event",
         "description": "single sudden peak from an intra-cloud event"},
        {"letter": "E", "name": "I2 Impulsive Event Pair",
         "description": "two sudden peaks in a closely separated pair"},
        {"letter": "F", "name": "KM Gradual Intra-Cloud Stroke",
         "description": "power increases more gradually than an impulsive event"},
        {"letter": "G", "name": "O Off-record",
         "description": "event not fully captured within the 800 microsecond record"},
    ],
    "num_variables": 1,
    "series_length": 319,
    "variable_labels": ["power"],
    "sampling_rate_hz": None,
}

_ECG_MANIFEST = {
    "name": "ECG",
    "pattern": "complex_deterministic",
    "task_description": (
        "As a cardiologist, you are tasked with classifying a patient's heart condition based "
        "on single-lead ECG recordings."
    ),
    "classes": [
        {"letter": "A", "name": "normal sinus rhythm",
         "description": "regular rhythm with consistent beat spacing"},
        {"letter": "B", "name": "fibrillation",
         "description": "irregularly irregular rhythm without clear P waves"},
        {"letter": "C", "name": "alternative rhythm",
         "description": "an abnormal rhythm other than fibrillation"},
        {"letter": "D", "name": "too noisy to be classified",
         "description": "signal quality too poor to interpret"},
    ],
    "num_variables": 1,
    "series_length": 1500,
    "variable_labels": ["signal"],
    "sampling_rate_hz": None,
}

_EMG_MANIFEST = {
    "name": "EMG",
    "pattern": "complex_deterministic",
    "task_description": (
        "As an Electromyograms (EMG) analysis expert, you are tasked with determining the type "
        "of the subject based on the EMG record."
    ),
    "classes": [
        {"letter": "A", "name": "healthy", "description": "normal motor unit potentials"},
        {"letter": "B", "name": "neuropathy",
         "description": "high-amplitude, long-duration, polyphasic potentials"},
        {"letter": "C", "name": "myopathy",
         "description": "low-amplitude, short-duration potentials"},
    ],
    "num_variables": 1,
    "series_length": 1500,
    "variable_labels": ["signal"],
    "sampling_rate_hz": None,
}

_CTU_MANIFEST = {
    "name": "CTU",
    "pattern": "probabilistic",
    "task_description": (
        "Play as a computer energy consumption analysis expert, please correctly determine "
        "whether this computer is a desktop or a laptop based on the 24-hour power "
        "consumption data."
    ),
    "classes": [
        {"letter": "A", "name": "desktop", "description": "higher, sustained draw while in use"},
        {"letter": "B", "name": "laptop", "description": "lower draw with battery charge cycles"},
    ],
    "num_variables": 1,
    "series_length": 720,
    "variable_labels": ["power"],
    "sampling_rate_hz": None,
}

_HAR_MANIFEST = {
    "name": "HAR",
    "pattern": "probabilistic",
    "task_description": (
        "As a human activity recognition expert, you are tasked with determining the type of "
        "activity performed by the subject based on the accelerometer record series along the "
        "x, y, and z axes over time."
    ),
    "classes": [
        {"letter": "A", "name": "walking",
         "description": "periodic acceleration at a steady cadence"},
        {"letter": "B", "name": "walking upstairs",
         "description": "periodic with pronounced vertical effort"},
        {"letter": "C", "name": "walking downstairs",
         "description": "periodic with sharp impact spikes"},
        {"letter": "D", "name": "sitting", "description": "near-static, low variance"},
        {"letter": "E", "name": "standing",
         "description": "near-static with gravity along one axis"},
        {"letter": "F", "name": "lying down",
         "description": "near-static with gravity rotated across axes"},
    ],
    "num_variables": 3,
    "series_length": 206,
    "variable_labels": ["x", "y", "z"],
    "sampling_rate_hz": None,
}


SOURCES: dict[str, SourceSpec] = {
    "RCW": SourceSpec(
        task="RCW",
        urls=("https://www.kaggle.com/competitions/whale-detection-challenge/data",),
        native_format="wav_clips",
        num_variables=1,
        series_length=4000,
        num_classes=2,
        manifest=_RCW_MANIFEST,
        label_map={"0": "A", "1": "B"},
    ),
    "TEE": SourceSpec(
        task="TEE",
        urls=(
            "https://www.timeseriesclassification.com/aeon-toolkit/Lightning7.zip",
        ),
        native_format="ucr_ts",
        num_variables=1,
        series_length=319,
        num_classes=7,
        manifest=_TEE_MANIFEST,
        # Lightning7 class ids follow the event-type order of the task text
        label_map={"0": "A", "1": "B", "2": "C", "3": "D", "4": "E", "5": "F", "6": "G"},
    ),
    "ECG": SourceSpec(
        task="ECG",
        urls=("https://physionet.org/content/challenge-2017/1.0.0/",),
        native_format="physionet_mat",
        num_variables=1,
        series_length=1500,
        num_classes=4,
        manifest=_ECG_MANIFEST,
        label_map={"N": "A", "A": "B", "O": "C", "~": "D"},
    ),
    "EMG": SourceSpec(
        task="EMG",
        urls=("https://physionet.org/content/emgdb/1.0.0/",),
        native_format="wfdb",
        num_variables=1,
        series_length=1500,
        num_classes=3,
        manifest=_EMG_MANIFEST,
        label_map={"healthy": "A", "neuropathy": "B", "myopathy": "C"},
    ),
    "CTU": SourceSpec(
        task="CTU",
        urls=(
            "https://www.timeseriesclassification.com/aeon-toolkit/Computers.zip",
        ),
        native_format="ucr_ts",
        num_variables=1,
        series_length=720,
        num_classes=2,
        manifest=_CTU_MANIFEST,
        label_map={"1": "A", "2": "B"},
    ),
    "HAR": SourceSpec(
        task="HAR",
        urls=(
            "https://archive.ics.uci.edu/static/public/240/"
            "human+activity+recognition+using+smartphones.zip",
        ),
        native_format="uci_har_txt",
        num_variables=3,
        series_length=206,
        num_classes=6,
        manifest=_HAR_MANIFEST,
        label_map={"1": "A", "2": "B", "3": "C", "4": "D", "5": "E", "6": "F"},
    ),
}
