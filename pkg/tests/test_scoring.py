from __future__ import annotations

import json

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tseval.core import (
    Modeling,
    PriceConfig,
    ReasoningStrategy,
    builtin_anchor_table,
    builtin_task_registry,
)
from tseval.scoring import (
    AmbiguousAnswer,
    NoAnswer,
    RunRecord,
    SampleResult,
    UnknownTask,
    ZeroBaseline,
    accuracy,
    cost,
    emit_report,
    improvement,
    normalize,
    parse_answer,
    read_records_jsonl,
    record_to_rows,
    rows_to_records,
    summarize,
    win_count,
)

ANCHORS = builtin_anchor_table()
REGISTRY = builtin_task_registry()

TASK_ORDER = ("RCW", "TEE", "ECG", "EMG", "CTU", "HAR")


# ---------------------------------------------------------------------------
# parse_answer
# ---------------------------------------------------------------------------

def test_parse_template_round_trip_every_letter():
    for spec in REGISTRY.values():
        for letter in spec.letters:
            response = (
                "---BEGIN FORMAT TEMPLATE---\n"
                f"Answer Choice: ({letter})\n"
                "---END FORMAT TEMPLATE---"
            )
            assert parse_answer(response, spec) == letter


def test_parse_class_name_match():
    spec = REGISTRY["ECG"]
    assert parse_answer("Answer Choice: fibrillation", spec) == "B"


def test_parse_bare_letter_variants():
    spec = REGISTRY["ECG"]
    assert parse_answer("Answer Choice: B", spec) == "B"
    assert parse_answer("Answer Choice: b.", spec) == "B"
    assert parse_answer("Answer Choice: (C) alternative rhythm", spec) == "C"


def test_parse_uses_last_marker():
    spec = REGISTRY["ECG"]
    response = "Answer Choice: (A)\nOn reflection...\nAnswer Choice: (D)"
    assert parse_answer(response, spec) == "D"


def test_parse_no_marker():
    spec = REGISTRY["ECG"]
    with pytest.raises(NoAnswer):
        parse_answer("I think it is A or B", spec)


def test_parse_placeholder_echo_is_no_answer():
    spec = REGISTRY["ECG"]
    with pytest.raises(NoAnswer):
        parse_answer("Answer Choice: [Your Answer Choice Here]", spec)


def test_parse_ambiguous():
    spec = REGISTRY["ECG"]
    with pytest.raises(AmbiguousAnswer):
        parse_answer("Answer Choice: A or B", spec)


# ---------------------------------------------------------------------------
# accuracy
# ---------------------------------------------------------------------------

def _record(golds, preds, task="CTU", strategy="zst", modeling=Modeling.NUMERIC,
            run_index=1, model="m", tokens=(10, 5)):
    results = tuple(
        SampleResult(
            sample_id=f"s{i}", gold=g, predicted=p, retries=0,
            input_tokens=tokens[0], output_tokens=tokens[1],
        )
        for i, (g, p) in enumerate(zip(golds, preds))
    )
    return RunRecord(
        task=task, model_id=model, strategy=ReasoningStrategy.parse(strategy),
        modeling=modeling, seed=0, run_index=run_index, results=results,
    )


def test_accuracy_examples():
    assert round(accuracy(_record("ABB", "ABA")), 2) == 66.67
    assert accuracy(_record("AB", "AB")) == 100.0
    assert accuracy(_record("AB", [None, None])) == 0.0


def test_accuracy_permutation_invariant():
    a = _record("AABB", "ABBA")
    b = _record("BBAA", "ABBA"[::-1])
    assert accuracy(a) == accuracy(b)


# ---------------------------------------------------------------------------
# normalize / win_count / improvement / cost
# ---------------------------------------------------------------------------

def test_normalize_examples():
    assert normalize(50.00, "RCW", ANCHORS) == 1.0
    assert round(normalize(91.03, "RCW", ANCHORS), 4) == 1.8206
    assert round(normalize(16.67, "HAR", ANCHORS), 4) == 1.0002


def test_normalize_random_guess_is_exactly_one():
    for task in TASK_ORDER:
        assert normalize(ANCHORS[task].random_guess_accuracy, task, ANCHORS) == 1.0


def test_normalize_unknown_task():
    with pytest.raises(UnknownTask):
        normalize(50.0, "NOPE", ANCHORS)


def test_win_count_examples():
    assert win_count(91.03, "RCW", ANCHORS) == (8, 8)
    assert win_count(70.02, "RCW", ANCHORS) == (3, 8)
    assert win_count(0.0, "RCW", ANCHORS) == (0, 8)


def test_win_count_perfect_accuracy_beats_all():
    for task in TASK_ORDER:
        assert win_count(100.0, task, ANCHORS) == (8, 8)


def test_win_count_ties_are_non_wins():
    # ECG has a supervised anchor at exactly 25.00
    wins_at_tie, _ = win_count(25.00, "ECG", ANCHORS)
    wins_above, _ = win_count(25.01, "ECG", ANCHORS)
    assert wins_above == wins_at_tie + 1


@settings(max_examples=50, deadline=None)
@given(
    low=st.floats(min_value=0, max_value=100, allow_nan=False),
    high=st.floats(min_value=0, max_value=100, allow_nan=False),
    task=st.sampled_from(TASK_ORDER),
)
def test_win_count_monotone(low, high, task):
    if low > high:
        low, high = high, low
    assert win_count(low, task, ANCHORS)[0] <= win_count(high, task, ANCHORS)[0]


def test_improvement_examples():
    assert round(improvement(91.03, 50.00), 2) == 82.06
    assert round(improvement(66.67, 12.50), 2) == 433.36
    assert improvement(42.0, 42.0) == 0.0


def test_improvement_zero_baseline():
    with pytest.raises(ZeroBaseline):
        improvement(10.0, 0.0)


def test_cost_examples():
    price = PriceConfig(input_per_million=2.50)
    assert cost(60000, 0, price) == pytest.approx(0.15)
    assert cost(85, 0, price) == pytest.approx(0.0002125)
    assert cost(0, 0, price) == 0.0


@settings(max_examples=50, deadline=None)
@given(a=st.integers(0, 10**7), b=st.integers(0, 10**7))
def test_cost_is_linear(a, b):
    price = PriceConfig(input_per_million=2.50, output_per_million=10.0)
    assert cost(a + b, 0, price) == pytest.approx(cost(a, 0, price) + cost(b, 0, price))
    assert cost(0, a + b, price) == pytest.approx(cost(0, a, price) + cost(0, b, price))


# ---------------------------------------------------------------------------
# records round trip
# ---------------------------------------------------------------------------

def test_record_rows_round_trip(tmp_path):
    record = _record("ABAB", ["A", None, "A", "B"])
    rows = record_to_rows(record)
    assert rows_to_records(rows) == [record]
    path = tmp_path / "records.jsonl"
    path.write_text(
        "".join(json.dumps(r, sort_keys=True) + "\n" for r in rows), encoding="utf-8"
    )
    assert read_records_jsonl(path) == [record]


# ---------------------------------------------------------------------------
# summarize / emit_report
# ---------------------------------------------------------------------------

def test_mean_over_runs():
    records = [
        _record(["A"] * 50, ["A"] * 30 + ["B"] * 20, run_index=1),  # 60%
        _record(["A"] * 50, ["A"] * 31 + ["B"] * 19, run_index=2),  # 62%
        _record(["A"] * 50, ["A"] * 32 + ["B"] * 18, run_index=3),  # 64%
    ]
    reports = summarize(records, ANCHORS, baseline_modeling=None)
    assert len(reports) == 1
    assert f"{reports[0].accuracy_pct:.2f}" == "62.00"
    assert reports[0].runs == 3


def _exact_accuracy_record(task, acc_pct, modeling, strategy="icl:1", n=10000):
    correct = round(acc_pct * n / 100)
    golds = ["A"] * n
    preds = ["A"] * correct + ["B"] * (n - correct)
    return _record(golds, preds, task=task, strategy=strategy, modeling=modeling)


ICL_VISUAL_ACC = {"RCW": 91.03, "TEE": 64.29, "ECG": 43.75,
                  "EMG": 91.67, "CTU": 63.64, "HAR": 66.67}
ICL_NUMERIC_ACC = {"RCW": 50.00, "TEE": 35.71, "ECG": 31.25,
                   "EMG": 33.33, "CTU": 50.00, "HAR": 12.50}
ICL_EXPECTED_WINS = {"RCW": "8/8", "TEE": "8/8", "ECG": "8/8",
                     "EMG": "8/8", "CTU": "4/8", "HAR": "1/8"}
ICL_EXPECTED_IMPROVEMENT = {"RCW": "+82.06", "TEE": "+80.03", "ECG": "+40.00",
                            "EMG": "+175.04", "CTU": "+27.28", "HAR": "+433.36"}


def test_summarize_reproduces_reference_icl_rows():
    records = []
    for task in TASK_ORDER:
        records.append(_exact_accuracy_record(task, ICL_VISUAL_ACC[task], Modeling.VISUAL))
        records.append(_exact_accuracy_record(task, ICL_NUMERIC_ACC[task], Modeling.NUMERIC))
    reports = summarize(records, ANCHORS, baseline_modeling="numeric")
    visual = {r.task: r for r in reports if r.modeling == "visual"}
    for task in TASK_ORDER:
        row = visual[task]
        assert f"{row.wins}/{row.wins_total}" == ICL_EXPECTED_WINS[task]
        assert f"{row.improvement_pct:+.2f}" == ICL_EXPECTED_IMPROVEMENT[task]


def test_emit_report_formats_agree(tmp_path):
    records = [
        _record(["A"] * 10, ["A"] * 6 + ["B"] * 4, modeling=Modeling.NUMERIC),
        _record(["A"] * 10, ["A"] * 8 + ["B"] * 2, modeling=Modeling.VISUAL),
    ]
    prices = {"m": PriceConfig(input_per_million=2.50)}
    written = emit_report(records, ANCHORS, tmp_path, prices=prices)
    assert set(written) == {"markdown", "csv", "json", "bars"}

    csv_lines = written["csv"].read_text(encoding="utf-8").strip().splitlines()
    header = csv_lines[0].split(",")
    csv_rows = [dict(zip(header, line.split(","))) for line in csv_lines[1:]]
    json_rows = json.loads(written["json"].read_text(encoding="utf-8"))
    assert csv_rows == json_rows

    visual_row = next(r for r in json_rows if r["modeling"] == "visual")
    assert visual_row["accuracy_pct"] == "80.00"
    assert visual_row["improvement_pct"] == "+33.33"
    assert visual_row["cost_per_sample_usd"] == f"{10 * 2.5 / 1e6:.6f}"


def test_emit_report_deterministic(tmp_path):
    records = [_record(["A"] * 5, ["A"] * 3 + ["B"] * 2)]
    a = emit_report(records, ANCHORS, tmp_path / "a")
    b = emit_report(records, ANCHORS, tmp_path / "b")
    for key in a:
        assert a[key].read_bytes() == b[key].read_bytes()


def test_emit_report_requires_records(tmp_path):
    with pytest.raises(Exception):
        emit_report([], ANCHORS, tmp_path)
