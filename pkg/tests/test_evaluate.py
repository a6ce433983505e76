"""Eval harness vs an independent nested-loop counting oracle."""

from __future__ import annotations

import csv
import json
import random

import pytest

from scenemine.evaluate import (
    CATEGORIES,
    CATEGORY_PREDICATES,
    EvalReport,
    GoldLabel,
    append_gold,
    category_present,
    derive_category,
    emit_report,
    estimate_cost,
    evaluate_predictions,
    f1_score,
    load_gold,
    micro_prf,
    per_class_prf,
    reasoning_density,
    risk_mae,
)
from scenemine.index import ScoutSummary

from conftest import build_dna


def gold_label(frame_id: str, dna, category=None) -> GoldLabel:
    return GoldLabel(
        frame_id=frame_id,
        dna=dna,
        category=category or derive_category(dna),
        annotator="tester",
        verified_at="1970-01-01T00:00:00Z",
    )


def construction_dna():
    return build_dna(tags=("construction",), scene_type="construction_zone", risk=6)


def nominal_dna():
    return build_dna()


# ---------------------------------------------------------------------------
# Category predicates.


def test_tracked_categories():
    assert CATEGORIES == (
        "adverse_weather",
        "construction",
        "fod_debris",
        "special_vehicle",
        "vru_hazard",
    )


def test_category_present_by_tag_or_field():
    assert category_present(construction_dna(), "construction")
    assert category_present(build_dna(scene_type="construction_zone"), "construction")
    assert category_present(build_dna(weather="fog"), "adverse_weather")
    assert category_present(build_dna(vru_status="cyclist_in_lane"), "vru_hazard")
    assert category_present(build_dna(special_agent_class="ambulance"), "special_vehicle")
    assert category_present(build_dna(blocking_factor="debris"), "fod_debris")
    assert not category_present(nominal_dna(), "construction")


def test_derive_category_first_match_else_nominal():
    assert derive_category(nominal_dna()) == "nominal"
    assert derive_category(construction_dna()) == "construction"
    # Satisfies weather and construction; alphabetical first wins.
    both = build_dna(tags=("construction",), weather="snow")
    assert derive_category(both) == "adverse_weather"


# ---------------------------------------------------------------------------
# Micro P/R/F1 against the brute-force oracle.


def oracle_counts(predictions, gold):
    """Deliberately naive recount: nested loops, no shared helpers."""
    tp = fp = fn = 0
    for frame_id, label in gold.items():
        for category in CATEGORIES:
            in_gold = category_present(label.dna, category)
            pred = predictions.get(frame_id)
            in_pred = pred is not None and category_present(pred, category)
            if in_gold and in_pred:
                tp += 1
            elif in_pred and not in_gold:
                fp += 1
            elif in_gold and not in_pred:
                fn += 1
    return tp, fp, fn


def random_world(rng: random.Random, n_frames: int):
    makers = [
        construction_dna,
        nominal_dna,
        lambda: build_dna(weather=rng.choice(["rain", "fog", "snow"])),
        lambda: build_dna(vru_status="legal_crossing", tags=("vru_hazard",)),
        lambda: build_dna(special_agent_class="police_car"),
        lambda: build_dna(blocking_factor="debris", ego_required_action="slow_down"),
    ]
    gold = {}
    predictions = {}
    for i in range(n_frames):
        frame_id = f"frame_{i:05d}"
        gold[frame_id] = gold_label(frame_id, rng.choice(makers)())
        roll = rng.random()
        if roll < 0.15:
            continue  # missing prediction
        predictions[frame_id] = (
            gold[frame_id].dna if roll < 0.7 else rng.choice(makers)()
        )
    return predictions, gold


def test_micro_prf_matches_oracle_on_random_fixtures():
    rng = random.Random(77)
    for trial in range(25):
        predictions, gold = random_world(rng, rng.randint(1, 120))
        tp, fp, fn = oracle_counts(predictions, gold)
        got = micro_prf(predictions, gold)
        assert got["tp"] == tp and got["fp"] == fp and got["fn"] == fn
        expected_p = tp / (tp + fp) if tp + fp else 0.0
        expected_r = tp / (tp + fn) if tp + fn else 0.0
        assert abs(got["precision"] - expected_p) <= 1e-9
        assert abs(got["recall"] - expected_r) <= 1e-9
        assert abs(got["f1"] - f1_score(expected_p, expected_r)) <= 1e-9


def test_micro_prf_simple_counts():
    gold = {
        "a": gold_label("a", construction_dna()),
        "b": gold_label("b", construction_dna()),
        "c": gold_label("c", construction_dna()),
        "d": gold_label("d", nominal_dna()),
    }
    predictions = {
        "a": construction_dna(),  # TP
        "b": construction_dna(),  # TP
        "c": nominal_dna(),       # FN
        "d": construction_dna(),  # FP
    }
    got = micro_prf(predictions, gold)
    assert (got["tp"], got["fp"], got["fn"]) == (2, 1, 1)
    assert got["precision"] == pytest.approx(2 / 3)
    assert got["recall"] == pytest.approx(2 / 3)
    assert got["f1"] == pytest.approx(2 / 3)


def test_table_style_f1_consistency():
    assert f1_score(0.712, 0.966) == pytest.approx(0.820, abs=1e-3)


def test_empty_predictions_zero_rates():
    gold = {"a": gold_label("a", construction_dna())}
    got = micro_prf({}, gold)
    assert got["precision"] == 0.0
    assert got["recall"] == 0.0
    assert got["f1"] == 0.0


def test_missing_prediction_counts_as_all_fn():
    gold = {
        "a": gold_label("a", build_dna(tags=("construction", "vru_hazard"))),
    }
    got = micro_prf({}, gold)
    assert got["fn"] == 2 and got["tp"] == 0 and got["fp"] == 0


# ---------------------------------------------------------------------------
# Per-class breakdown.


def test_per_class_integer_fixture_hits_published_rates():
    # 21/24 precision and 21/22 recall print as 0.88 / 0.95.
    gold = {}
    predictions = {}
    for i in range(21):  # true positives
        fid = f"tp_{i}"
        gold[fid] = gold_label(fid, construction_dna())
        predictions[fid] = construction_dna()
    for i in range(3):  # false positives
        fid = f"fp_{i}"
        gold[fid] = gold_label(fid, nominal_dna())
        predictions[fid] = construction_dna()
    fid = "fn_0"  # one miss
    gold[fid] = gold_label(fid, construction_dna())
    predictions[fid] = nominal_dna()

    row = per_class_prf(predictions, gold)["construction"]
    assert (row["tp"], row["fp"], row["fn"]) == (21, 3, 1)
    assert f"{row['precision']:.2f}" == "0.88"
    assert f"{row['recall']:.2f}" == "0.95"


def test_per_class_perfect_and_all_wrong():
    gold = {"a": gold_label("a", construction_dna())}
    perfect = per_class_prf({"a": construction_dna()}, gold)["construction"]
    assert (perfect["precision"], perfect["recall"], perfect["f1"]) == (1.0, 1.0, 1.0)

    wrong = per_class_prf({"a": nominal_dna()}, gold)["construction"]
    assert wrong["precision"] == 0.0 and wrong["recall"] == 0.0


def test_zero_gold_category_omits_recall_with_note():
    gold = {"a": gold_label("a", construction_dna())}
    rows = per_class_prf({"a": construction_dna()}, gold)
    assert "recall" not in rows["fod_debris"]
    assert "f1" not in rows["fod_debris"]
    assert "no gold positives" in rows["fod_debris"]["note"]
    assert "recall" in rows["construction"]


# ---------------------------------------------------------------------------
# Risk MAE.


def test_risk_mae_examples():
    assert risk_mae({"a": 6, "b": 5}, {"a": 7, "b": 3}) == 1.5
    assert risk_mae({"a": 4, "b": 9}, {"a": 4, "b": 9}) == 0.0


def test_risk_mae_uses_shared_keys_only():
    assert risk_mae({"a": 5, "z": 9}, {"a": 5, "q": 0}) == 0.0


def test_risk_mae_empty_intersection_is_error():
    with pytest.raises(ValueError):
        risk_mae({"a": 5}, {"b": 5})


def test_risk_mae_triangle_bound():
    rng = random.Random(9)
    keys = [f"k{i}" for i in range(40)]
    x = {k: rng.randint(0, 10) for k in keys}
    y = {k: rng.randint(0, 10) for k in keys}
    z = {k: rng.randint(0, 10) for k in keys}
    assert risk_mae(x, z) <= risk_mae(x, y) + risk_mae(y, z) + 1e-12
    assert risk_mae(x, y) == risk_mae(y, x)


# ---------------------------------------------------------------------------
# Economics.


def test_reasoning_density_examples():
    assert reasoning_density(31.5, 99.5) == 3134
    assert reasoning_density(8.0, 36.3) == 290
    assert reasoning_density(0.0, 123.0) == 0
    with pytest.raises(ValueError):
        reasoning_density(-1.0, 10.0)


def test_estimate_cost_examples():
    slow = estimate_cost(31.5, 350.0, 0.15, 1000)
    assert 0.45 <= slow <= 0.47
    assert slow == pytest.approx(0.459375)
    fast = estimate_cost(8.0, 350.0, 0.15, 1000)
    assert 0.11 <= fast <= 0.13
    assert estimate_cost(31.5, 350.0, 0.15, 0) == 0.0


# ---------------------------------------------------------------------------
# Full report and emission.


def summaries(scout_name, latency_s, tokens, n=3):
    return [
        ScoutSummary(
            scout_name=scout_name,
            risk_score=2,
            latency_s=latency_s,
            completion_tokens=tokens,
        )
        for _ in range(n)
    ]


def test_evaluate_predictions_end_to_end():
    gold = {
        "a": gold_label("a", construction_dna()),
        "b": gold_label("b", nominal_dna()),
    }
    predictions = {"a": construction_dna(), "b": nominal_dna()}
    scout_summaries = {
        "a": summaries("scout-slow", 31.5, 3134) + summaries("scout-fast", 8.0, 290),
        "b": summaries("scout-slow", 31.5, 3134) + summaries("scout-fast", 8.0, 290),
    }
    report = evaluate_predictions(predictions, gold, scout_summaries)
    assert report.n_frames == 2
    assert report.micro["f1"] == 1.0
    assert report.risk_mae == 0.0
    assert report.missing_frames == ()
    assert report.density_stats["scout-slow"]["implied_tokens"] == 3134
    assert report.density_stats["scout-fast"]["implied_tokens"] == 290
    assert 0.45 <= report.cost_stats["scout-slow"]["per_1000_frames"] <= 0.47
    assert 0.11 <= report.cost_stats["scout-fast"]["per_1000_frames"] <= 0.13


def test_evaluate_requires_gold():
    with pytest.raises(ValueError):
        evaluate_predictions({}, {})


def test_f1_consistency_on_emitted_report():
    rng = random.Random(5)
    predictions, gold = random_world(rng, 60)
    report = evaluate_predictions(predictions, gold)
    rows = [report.micro] + [
        r for r in report.per_class.values() if "f1" in r
    ]
    for row in rows:
        assert abs(row["f1"] - f1_score(row["precision"], row["recall"])) <= 1e-9


def test_emit_report_files_and_round_trip(tmp_path):
    rng = random.Random(11)
    predictions, gold = random_world(rng, 40)
    scout_summaries = {fid: summaries("scout-a", 10.0, 700, n=1) for fid in predictions}
    report = evaluate_predictions(predictions, gold, scout_summaries)
    written = emit_report(report, tmp_path / "out")
    names = {p.name for p in written}
    assert names == {"summary.txt", "per_class.csv", "density.csv", "report.json"}

    summary = (tmp_path / "out" / "summary.txt").read_text()
    assert f"F1 {report.micro['f1']:.3f}" in summary
    assert "tracked categories:" in summary

    reloaded = json.loads((tmp_path / "out" / "report.json").read_text())
    assert reloaded == report.to_payload()

    with open(tmp_path / "out" / "per_class.csv", newline="") as handle:
        rows = list(csv.DictReader(handle))
    assert {r["category"] for r in rows} == set(CATEGORIES)
    for row in rows:
        recomputed = report.per_class[row["category"]]
        assert int(row["tp"]) == recomputed["tp"]


def test_emit_summary_prints_table_style_f1(tmp_path):
    micro = {
        "precision": 0.712,
        "recall": 0.966,
        "f1": f1_score(0.712, 0.966),
        "tp": 0,
        "fp": 0,
        "fn": 0,
    }
    report = EvalReport(
        micro=micro,
        per_class={c: {"precision": 0.0, "tp": 0, "fp": 0, "fn": 0, "note": ""} for c in CATEGORIES},
        risk_mae=0.676,
        n_frames=108,
        missing_frames=(),
        categories=CATEGORY_PREDICATES,
    )
    emit_report(report, tmp_path)
    assert "F1 0.820" in (tmp_path / "summary.txt").read_text()


def test_emit_refuses_empty_gold(tmp_path):
    report = EvalReport(
        micro={}, per_class={}, risk_mae=0.0, n_frames=0,
        missing_frames=(), categories={},
    )
    with pytest.raises(ValueError):
        emit_report(report, tmp_path)


# ---------------------------------------------------------------------------
# Gold file IO.


def test_gold_append_and_load_round_trip(tmp_path):
    path = tmp_path / "gold.jsonl"
    first = gold_label("a", construction_dna())
    append_gold(path, first)
    append_gold(path, gold_label("b", nominal_dna()))
    loaded = load_gold(path)
    assert sorted(loaded) == ["a", "b"]
    assert loaded["a"] == first


def test_gold_later_lines_win(tmp_path):
    path = tmp_path / "gold.jsonl"
    append_gold(path, gold_label("a", nominal_dna(), category="nominal"))
    append_gold(path, gold_label("a", construction_dna(), category="construction"))
    loaded = load_gold(path)
    assert loaded["a"].category == "construction"


def test_gold_bad_lines_skipped(tmp_path, caplog):
    path = tmp_path / "gold.jsonl"
    append_gold(path, gold_label("a", nominal_dna()))
    with open(path, "a") as handle:
        handle.write("{nope\n")
    with caplog.at_level("WARNING", logger="scenemine.evaluate"):
        loaded = load_gold(path)
    assert list(loaded) == ["a"]
    assert any("skipped bad gold line" in r.message for r in caplog.records)
