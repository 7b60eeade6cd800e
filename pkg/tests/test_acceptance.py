"""Acceptance suite: one test per release criterion, each printing a
PASS/FAIL line (run with ``pytest -s`` to see them inline).

Tolerances and time limits are pinned here, not configurable.
"""
from __future__ import annotations

import json
import random
import subprocess
import sys
import time
from pathlib import Path

import numpy as np
import pytest

from tseval.core import (
    PriceConfig,
    TimeSeriesSample,
    builtin_anchor_table,
    builtin_task_registry,
)
from tseval.ingest import save_dataset
from tseval.llmclient import ExhaustedRetries, MockProvider, query_until_answer
from tseval.prompt import TextPart, build_zst, serialize_numeric
from tseval.scoring import (
    RunRecord,
    SampleResult,
    abstention_rate,
    accuracy,
    cost,
    improvement,
    parse_answer,
    win_count,
)
from tseval.core import Modeling, ReasoningStrategy
from tseval.viz import (
    Detail,
    GPT4O_TOKEN_RULE,
    RenderConfig,
    StftConfig,
    default_render_config,
    dft,
    estimate_image_tokens,
    render,
    stft_spectrogram,
)

from .conftest import make_dataset, synth_sample
from .oracles import naive_dft
from .prompt_fixtures import GOLDEN_DIR, build_fixture_bundles

ANCHORS = builtin_anchor_table()
REGISTRY = builtin_task_registry()
TASK_ORDER = ("RCW", "TEE", "ECG", "EMG", "CTU", "HAR")


def _report(name: str, ok: bool = True) -> None:
    print(f"\nACCEPTANCE {name}: {'PASS' if ok else 'FAIL'}")


def _elapsed_under(started: float, limit_s: float, name: str) -> None:
    elapsed = time.monotonic() - started
    assert elapsed < limit_s, f"{name} took {elapsed:.1f}s, limit {limit_s}s"


# ---------------------------------------------------------------------------
# 1. Cost arithmetic reproduction
# ---------------------------------------------------------------------------

TOKENS_PER_SAMPLE = {
    # task: (numeric-prompt tokens, chart-prompt tokens)
    "RCW": (60000, 262),
    "TEE": (4466, 85),
    "ECG": (25500, 85),
    "EMG": (25500, 85),
    "CTU": (10800, 85),
    "HAR": (7416, 85),
}

EXPECTED_COST_USD = {
    "RCW": (0.15, 0.000657),
    "TEE": (0.0112, 0.000213),
    "ECG": (0.0638, 0.000213),
    "EMG": (0.0638, 0.000213),
    "CTU": (0.027, 0.000213),
    "HAR": (0.0185, 0.000213),
}

INPUT_PRICE = PriceConfig(input_per_million=2.50)


def test_cost_arithmetic_reproduction():
    started = time.monotonic()
    for task in TASK_ORDER:
        for tokens, expected in zip(TOKENS_PER_SAMPLE[task], EXPECTED_COST_USD[task]):
            got = cost(tokens, 0, INPUT_PRICE)
            assert abs(got - expected) / expected <= 0.01, (
                f"{task}: cost({tokens}) = {got}, expected {expected} within 1%"
            )
    _elapsed_under(started, 1.0, "cost arithmetic")
    _report("cost arithmetic reproduction (6 tasks, both prompt styles, +/-1%)")


# ---------------------------------------------------------------------------
# 2. Random-guess anchors
# ---------------------------------------------------------------------------

def test_random_guess_anchors():
    started = time.monotonic()
    expected = {"RCW": 50.00, "TEE": 14.29, "ECG": 25.00,
                "EMG": 33.33, "CTU": 50.00, "HAR": 16.67}
    for task in TASK_ORDER:
        computed = 100.0 / REGISTRY[task].num_classes
        assert round(computed, 2) == expected[task]
        assert round(ANCHORS[task].random_guess_accuracy, 2) == expected[task]
    _elapsed_under(started, 1.0, "random-guess anchors")
    _report("random-guess anchors match reference row to 2 decimals")


# ---------------------------------------------------------------------------
# 3. Metric reproduction from reference accuracies
# ---------------------------------------------------------------------------

ZST_NUMERIC = {"RCW": 50.00, "TEE": 21.43, "ECG": 25.00, "EMG": 33.33, "CTU": 45.45, "HAR": 29.17}
ZST_VISUAL = {"RCW": 70.02, "TEE": 24.88, "ECG": 26.33, "EMG": 33.33, "CTU": 50.71, "HAR": 37.50}
ZST_IMPROVEMENT = {"RCW": "+40.04", "TEE": "+16.10", "ECG": "+5.32",
                   "EMG": "+0.00", "CTU": "+11.57", "HAR": "+28.56"}
ZST_WINS = {"RCW": (3, 8), "TEE": (1, 8), "ECG": (7, 8),
            "EMG": (0, 8), "CTU": (1, 8), "HAR": (0, 8)}

ICL_NUMERIC = {"RCW": 50.00, "TEE": 35.71, "ECG": 31.25, "EMG": 33.33, "CTU": 50.00, "HAR": 12.50}
ICL_VISUAL = {"RCW": 91.03, "TEE": 64.29, "ECG": 43.75, "EMG": 91.67, "CTU": 63.64, "HAR": 66.67}
ICL_IMPROVEMENT = {"RCW": "+82.06", "TEE": "+80.03", "ECG": "+40.00",
                   "EMG": "+175.04", "CTU": "+27.28", "HAR": "+433.36"}
ICL_WINS = {"RCW": (8, 8), "TEE": (8, 8), "ECG": (8, 8),
            "EMG": (8, 8), "CTU": (4, 8), "HAR": (1, 8)}


def test_metric_reproduction_reference_rows():
    started = time.monotonic()
    for task in TASK_ORDER:
        zst_imp = improvement(ZST_VISUAL[task], ZST_NUMERIC[task])
        assert f"{zst_imp:+.2f}" == ZST_IMPROVEMENT[task], task
        assert win_count(ZST_VISUAL[task], task, ANCHORS) == ZST_WINS[task], task

        icl_imp = improvement(ICL_VISUAL[task], ICL_NUMERIC[task])
        assert f"{icl_imp:+.2f}" == ICL_IMPROVEMENT[task], task
        assert win_count(ICL_VISUAL[task], task, ANCHORS) == ICL_WINS[task], task
    _elapsed_under(started, 1.0, "metric reproduction")
    _report("improvement and win rows reproduce the reference table exactly")


# ---------------------------------------------------------------------------
# 4. DFT oracle suite
# ---------------------------------------------------------------------------

def test_dft_oracle_suite():
    started = time.monotonic()
    rng = np.random.default_rng(2024)
    sizes = rng.integers(4, 1025, size=200)
    worst_rel = 0.0
    worst_parseval = 0.0
    for n in sizes:
        x = rng.normal(size=int(n))
        got = dft(x)
        want = naive_dft(x)
        rel = float(np.abs(got - want).max() / np.abs(want).max())
        worst_rel = max(worst_rel, rel)
        time_energy = float(np.sum(np.abs(x) ** 2))
        freq_energy = float(np.sum(np.abs(got) ** 2)) / int(n)
        worst_parseval = max(worst_parseval, abs(time_energy - freq_energy) / time_energy)
    assert worst_rel <= 1e-6, f"max relative error {worst_rel}"
    assert worst_parseval <= 1e-6, f"max Parseval error {worst_parseval}"
    _elapsed_under(started, 30.0, "DFT oracle suite")
    _report(f"DFT vs naive oracle, 200 signals (max rel err {worst_rel:.2e})")


# ---------------------------------------------------------------------------
# 5. Spectrogram chirp property
# ---------------------------------------------------------------------------

def test_spectrogram_chirp_and_sine():
    started = time.monotonic()
    config = RenderConfig(stft=StftConfig(window_len=256, hop=128))
    n, window = 2048, 256
    t = np.arange(n)

    f0, f1 = 4 / window, 100 / window
    chirp = np.sin(2 * np.pi * (f0 * t + (f1 - f0) * t ** 2 / (2 * n)))
    arg = stft_spectrogram(chirp, config).magnitudes_db.argmax(axis=0)
    assert all(arg[i] <= arg[i + 1] for i in range(len(arg) - 1)), arg
    assert arg[-1] > arg[0]

    for k in (3, 8, 40):
        sine = np.sin(2 * np.pi * k * t / window)
        bins = stft_spectrogram(sine, config).magnitudes_db.argmax(axis=0)
        assert set(bins.tolist()) == {k}
    _elapsed_under(started, 5.0, "spectrogram chirp property")
    _report("chirp argmax rises monotonically; sine argmax sits at its bin")


# ---------------------------------------------------------------------------
# 6. Prompt golden files
# ---------------------------------------------------------------------------

def test_prompt_golden_files():
    started = time.monotonic()
    kinds = ("zst", "cot", "icl1", "planning", "solving")
    for task in TASK_ORDER:
        bundles = build_fixture_bundles(REGISTRY[task])
        assert set(bundles) == set(kinds)
        for kind, text in bundles.items():
            golden = (GOLDEN_DIR / f"{task}_{kind}.txt").read_text(encoding="utf-8")
            assert text == golden, f"{task}_{kind} drifted"
    all_text = "".join(
        (GOLDEN_DIR / f"{task}_{kind}.txt").read_text(encoding="utf-8")
        for task in TASK_ORDER for kind in kinds
    )
    assert "---BEGIN FORMAT TEMPLATE---" in all_text
    assert "Please solve this problem step by step." in all_text
    assert "Hint: Consider characteristics including" in all_text
    _elapsed_under(started, 5.0, "prompt golden files")
    _report("30 prompt golden files byte-equal with required marker strings")


# ---------------------------------------------------------------------------
# 7. Token budget
# ---------------------------------------------------------------------------

def test_image_token_budget():
    started = time.monotonic()
    har = synth_sample(REGISTRY["HAR"], "A", 0, "test")
    low = render(har, REGISTRY["HAR"], RenderConfig(detail=Detail.LOW))
    assert estimate_image_tokens(low, GPT4O_TOKEN_RULE) == 85

    rcw = synth_sample(REGISTRY["RCW"], "B", 0, "test")
    auto = render(rcw, REGISTRY["RCW"], default_render_config("RCW"))
    assert estimate_image_tokens(auto, GPT4O_TOKEN_RULE) == 262
    _elapsed_under(started, 30.0, "image token budget")
    _report("low-detail image = 85 tokens; auto-detail spectrogram = 262 tokens")


def _load_provider_tokenizer():
    try:
        import tiktoken
    except ImportError:
        return None
    for encoding in ("o200k_base", "cl100k_base"):
        try:
            return tiktoken.get_encoding(encoding)
        except Exception:
            continue
    return None


def test_numeric_serialization_token_budget():
    tokenizer = _load_provider_tokenizer()
    if tokenizer is None:
        print("\nACCEPTANCE numeric 4000-point token budget: SKIP "
              "(no provider tokenizer installed)")
        pytest.skip("no provider tokenizer installed")
    rng = random.Random(0)
    values = tuple(rng.gauss(0.0, 0.25) for _ in range(4000))
    sample = TimeSeriesSample("rcw-shaped", (values,), "A", "test")
    text = serialize_numeric(sample, REGISTRY["RCW"], precision=4)
    count = len(tokenizer.encode(text))
    assert abs(count - 60000) / 60000 <= 0.15, f"{count} tokens vs 60000 +/-15%"
    _report(f"numeric 4000-point prompt = {count} tokens (within 15% of 60000)")


# ---------------------------------------------------------------------------
# 8. End-to-end mock determinism
# ---------------------------------------------------------------------------

E2E_TOML = """\
[run]
tasks = ["CTU", "HAR"]
strategies = ["zst", "cot", "icl:1"]
modelings = ["visual"]
per_class = 2
runs = 3
seed = 11
output_dir = "out_a"
plans_dir = "plans"

[datasets]
CTU = "data/ctu"
HAR = "data/har"

[render]
width_px = 320
height_px = 240

[[providers]]
kind = "mock"
model_id = "mock-model"
script_file = "script.json"
"""

E2E_SCRIPT = {
    "plans": {
        "CTU": (
            "Consider characteristics including 1. Daily usage cycles; "
            "2. Idle baseline power\n\nFrequency-domain visualization is better."
        ),
        "HAR": (
            "Consider characteristics including 1. Axis variance; 2. Periodicity"
            "\n\nTime-domain visualization is better."
        ),
    },
    "answers": {"CTU": "Answer Choice: (A)", "HAR": "Answer Choice: (C)"},
}

REPORT_FILES = ("report.md", "report.csv", "report.json", "bars.csv")


def _cli(args: list[str], cwd: Path) -> None:
    result = subprocess.run(
        [sys.executable, "-m", "tseval.cli", *args],
        cwd=cwd, capture_output=True, text=True, timeout=300,
    )
    assert result.returncode == 0, f"{args}: {result.stdout}\n{result.stderr}"


def _results_dir(workspace: Path, out: str) -> Path:
    dirs = sorted(p for p in (workspace / out).iterdir() if p.is_dir())
    assert len(dirs) == 1
    return dirs[0]


def test_end_to_end_mock_determinism(tmp_path):
    started = time.monotonic()
    save_dataset(make_dataset("CTU"), tmp_path / "data" / "ctu")
    save_dataset(make_dataset("HAR"), tmp_path / "data" / "har")
    (tmp_path / "script.json").write_text(json.dumps(E2E_SCRIPT), encoding="utf-8")
    (tmp_path / "run.toml").write_text(E2E_TOML, encoding="utf-8")

    _cli(["validate", "data/ctu"], tmp_path)
    _cli(["validate", "data/har"], tmp_path)
    _cli(["plan", "CTU", "--config", "run.toml", "--plans-dir", "plans"], tmp_path)
    _cli(["plan", "HAR", "--config", "run.toml", "--plans-dir", "plans"], tmp_path)

    _cli(["run", "--config", "run.toml", "--output-dir", "out_a"], tmp_path)
    _cli(["run", "--config", "run.toml", "--output-dir", "out_b"], tmp_path)

    dir_a = _results_dir(tmp_path, "out_a")
    dir_b = _results_dir(tmp_path, "out_b")
    records_a = (dir_a / "records.jsonl").read_bytes()
    records_b = (dir_b / "records.jsonl").read_bytes()
    assert records_a == records_b, "two executions produced different records"
    assert len(records_a.decode("utf-8").splitlines()) == 16 * 3 * 3

    _cli(["report", str(dir_a), "--config", "run.toml"], tmp_path)
    _cli(["report", str(dir_b), "--config", "run.toml"], tmp_path)
    for name in REPORT_FILES:
        assert (dir_a / name).read_bytes() == (dir_b / name).read_bytes(), name

    # interrupt simulation: keep a 40-line prefix, resume, compare everything
    lines = records_b.decode("utf-8").splitlines(keepends=True)
    (dir_b / "records.jsonl").write_text("".join(lines[:40]), encoding="utf-8")
    _cli(["run", "--config", "run.toml", "--output-dir", "out_b"], tmp_path)
    assert (dir_b / "records.jsonl").read_bytes() == records_a
    _cli(["report", str(dir_b), "--config", "run.toml"], tmp_path)
    for name in REPORT_FILES:
        assert (dir_a / name).read_bytes() == (dir_b / name).read_bytes(), name

    _elapsed_under(started, 60.0, "end-to-end mock determinism")
    _report("validate-plan-run-report byte-identical across executions and resume")


# ---------------------------------------------------------------------------
# 9. Retry protocol
# ---------------------------------------------------------------------------

def test_retry_protocol():
    started = time.monotonic()
    spec = REGISTRY["CTU"]
    bundle = build_zst(TextPart("power: 1, 2, 3"), spec)
    per_attempt = len(bundle.text) // 4
    parser = lambda text: parse_answer(text, spec)  # noqa: E731

    provider = MockProvider(["no idea", "really cannot say", "Answer Choice: (B)"])
    trace, aggregate = query_until_answer(bundle, provider, parser, cap=5)
    assert trace.parsed_choice == "B"
    assert trace.retries_used == 2
    assert aggregate.usage.input_tokens == 3 * per_attempt, "usage must sum all attempts"

    stubborn = MockProvider(["no idea"] * 4)
    with pytest.raises(ExhaustedRetries) as excinfo:
        query_until_answer(bundle, stubborn, parser, cap=4)
    assert stubborn.request_count == 4
    assert excinfo.value.aggregate.usage.input_tokens == 4 * per_attempt

    # abstention after exhausted retries scores as incorrect
    record = RunRecord(
        task="CTU", model_id="m", strategy=ReasoningStrategy.zst(),
        modeling=Modeling.NUMERIC, seed=0, run_index=1,
        results=(
            SampleResult("s1", "A", "A", 0, 10, 5),
            SampleResult("s2", "B", None, 3, 40, 20),
        ),
    )
    assert accuracy(record) == 50.0
    assert abstention_rate(record) == 50.0
    _elapsed_under(started, 5.0, "retry protocol")
    _report("parse-failure rerun caps, sums usage, and scores abstention incorrect")
