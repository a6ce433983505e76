"""Index store: durability, torn-tail recovery, query semantics vs brute force."""

from __future__ import annotations

import json
import random

import pytest

from scenemine.index import (
    DuplicateFrame,
    IndexRecord,
    Query,
    ScoutSummary,
    SemanticIndex,
    import_released_index,
    normalize_released_payload,
    record_from_payload,
)
from scenemine.schema import VOCAB, WOD_E2E_TAGS, serialize_dna
from scenemine.verifier import CandidateScore

from conftest import build_dna


def make_record(frame_id: str, dna=None, scene_id="scene_0") -> IndexRecord:
    return IndexRecord(
        frame_id=frame_id,
        scene_id=scene_id,
        dna=dna if dna is not None else build_dna(),
        winner_score=CandidateScore(
            candidate_index=0, g=1, c=1, h=0, reward=5.0, verdicts=("Causality OK",)
        ),
        scout_summaries=(
            ScoutSummary(
                scout_name="scout-a", risk_score=2, latency_s=4.0, completion_tokens=600
            ),
        ),
        flagged_for_review=(),
        created_at="1970-01-01T00:00:00Z",
    )


def random_dna(rng: random.Random):
    fields = {}
    for name in (
        "weather",
        "scene_type",
        "vru_status",
        "blocking_factor",
        "ego_required_action",
        "primary_challenge",
    ):
        fields[name] = rng.choice(sorted(VOCAB[name]))
    fields["traffic_controls"] = rng.sample(
        sorted(VOCAB["traffic_controls"]), k=rng.randint(1, 2)
    )
    tags = rng.sample(sorted(WOD_E2E_TAGS), k=rng.randint(0, 3))
    return build_dna(
        tags=tags,
        risk=rng.randint(0, 10),
        description=rng.choice(
            ["A busy junction.", "Quiet residential road.", "Wet merge at night."]
        ),
        **fields,
    )


# ---------------------------------------------------------------------------
# Round trip and durability.


def test_append_then_reload_round_trip(tmp_path):
    path = tmp_path / "index.jsonl"
    index = SemanticIndex(path)
    record = make_record("frame_0001", build_dna(weather="rain", risk=6))
    index.append_record(record)

    reloaded = SemanticIndex(path)
    assert len(reloaded) == 1
    got = reloaded.get("frame_0001")
    assert got is not None
    assert serialize_dna(got.dna) == serialize_dna(record.dna)
    assert got.winner_score == record.winner_score
    assert got.scout_summaries == record.scout_summaries
    assert got.created_at == record.created_at


def test_payload_round_trip_is_identity():
    record = make_record("f1", build_dna(weather="fog", tags=("sensor_failure",)))
    assert record_from_payload(json.loads(json.dumps(record.to_payload()))) == record


def test_duplicate_append_rejected(tmp_path):
    index = SemanticIndex(tmp_path / "index.jsonl")
    index.append_record(make_record("f1"))
    with pytest.raises(DuplicateFrame):
        index.append_record(make_record("f1"))
    assert len(index) == 1


def test_contains_and_frame_ids(tmp_path):
    index = SemanticIndex(tmp_path / "index.jsonl")
    index.append_record(make_record("f2"))
    index.append_record(make_record("f1"))
    assert "f1" in index and "f3" not in index
    assert index.frame_ids() == ["f1", "f2"]


# ---------------------------------------------------------------------------
# Crash recovery.


def test_torn_tail_line_dropped_with_warning(tmp_path, caplog):
    path = tmp_path / "index.jsonl"
    index = SemanticIndex(path)
    index.append_record(make_record("f1"))
    index.append_record(make_record("f2"))
    # Simulate a crash mid-append: truncated final line, no newline.
    with open(path, "a", encoding="utf-8") as handle:
        handle.write('{"frame_id": "f3", "dna": {"odd')

    with caplog.at_level("WARNING", logger="scenemine.index"):
        reloaded = SemanticIndex(path)
    assert reloaded.frame_ids() == ["f1", "f2"]
    assert any("torn tail" in r.message for r in caplog.records)
    assert all(r.levelname == "WARNING" for r in caplog.records)


def test_mid_file_corruption_is_an_error_but_load_continues(tmp_path, caplog):
    path = tmp_path / "index.jsonl"
    index = SemanticIndex(path)
    index.append_record(make_record("f1"))
    index.append_record(make_record("f2"))
    lines = path.read_text().splitlines()
    lines[0] = lines[0][:40]
    path.write_text("\n".join(lines) + "\n")

    with caplog.at_level("ERROR", logger="scenemine.index"):
        reloaded = SemanticIndex(path)
    assert reloaded.frame_ids() == ["f2"]
    assert any("corrupt line 1" in r.message for r in caplog.records)


def test_duplicate_line_keeps_first_occurrence(tmp_path, caplog):
    path = tmp_path / "index.jsonl"
    index = SemanticIndex(path)
    index.append_record(make_record("f1", build_dna(risk=2)))
    first_line = path.read_text()
    dupe = make_record("f1", build_dna(risk=9))
    path.write_text(first_line + json.dumps(dupe.to_payload()) + "\n")

    with caplog.at_level("WARNING", logger="scenemine.index"):
        reloaded = SemanticIndex(path)
    record = reloaded.get("f1")
    assert record is not None
    assert record.dna.scenario_criticality.risk_score == 2


def test_append_after_recovery_continues_cleanly(tmp_path):
    path = tmp_path / "index.jsonl"
    SemanticIndex(path).append_record(make_record("f1"))
    with open(path, "a", encoding="utf-8") as handle:
        handle.write("{torn")
    index = SemanticIndex(path)
    index.append_record(make_record("f2"))
    assert SemanticIndex(path).frame_ids() == ["f1", "f2"]


# ---------------------------------------------------------------------------
# Query semantics: checked against a brute-force scan on random records.


def brute_force(records, q: Query):
    hits = [r for r in records if q.matches(r)]
    return sorted(hits, key=lambda r: (-r.dna.scenario_criticality.risk_score, r.frame_id))


def test_query_equals_brute_force_on_random_corpus(tmp_path):
    rng = random.Random(1234)
    index = SemanticIndex(tmp_path / "index.jsonl")
    records = [make_record(f"frame_{i:04d}", random_dna(rng)) for i in range(120)]
    for record in records:
        index.append_record(record)

    queries = [
        Query(),
        Query(risk_min=7),
        Query(risk_max=2),
        Query(filters={"weather": "rain"}),
        Query(filters={"weather": "rain", "scene_type": "highway"}),
        Query(filters={"blocking_factor": {"vehicle", "debris"}}),
        Query(filters={"traffic_controls": "red_light"}),
        Query(filters={"traffic_controls": ["red_light", "stop_sign"]}),
        Query(required_tags=frozenset({"construction"})),
        Query(required_tags=frozenset({"construction", "lane_diversion"})),
        Query(description_contains="JUNCTION"),
        Query(filters={"vru_status": "cyclist_in_lane"}, risk_min=5, risk_max=9),
    ]
    for q in queries:
        assert index.query(q) == brute_force(records, q)


def test_query_orders_riskiest_first_then_frame_id(tmp_path):
    index = SemanticIndex(tmp_path / "index.jsonl")
    index.append_record(make_record("b", build_dna(risk=9)))
    index.append_record(make_record("a", build_dna(risk=9)))
    index.append_record(make_record("c", build_dna(risk=3)))
    assert [r.frame_id for r in index.query(Query())] == ["a", "b", "c"]


def test_query_validation():
    with pytest.raises(ValueError):
        Query(risk_min=11)
    with pytest.raises(ValueError):
        Query(risk_max=-1)
    with pytest.raises(ValueError):
        Query(filters={"not_a_field": "x"})
    with pytest.raises(ValueError):
        Query(filters={"weather": 42})


def test_description_match_is_case_insensitive(tmp_path):
    index = SemanticIndex(tmp_path / "index.jsonl")
    index.append_record(make_record("f1", build_dna(description="Stalled Truck ahead.")))
    assert len(index.query(Query(description_contains="stalled truck"))) == 1
    assert index.query(Query(description_contains="bicycle")) == []


# ---------------------------------------------------------------------------
# Stats.


def test_stats_recounts_records(tmp_path):
    index = SemanticIndex(tmp_path / "index.jsonl")
    index.append_record(make_record("f1", build_dna(weather="rain", risk=4)))
    index.append_record(make_record("f2", build_dna(weather="rain", risk=4, tags=("construction",))))
    index.append_record(make_record("f3", build_dna(risk=0)))
    stats = index.stats()
    assert stats["n_records"] == 3
    assert stats["fields"]["weather"] == {"clear": 1, "rain": 2}
    assert stats["tags"] == {"construction": 1}
    assert stats["risk"]["4"] == 2
    assert stats["risk"]["0"] == 1
    assert sum(stats["risk"].values()) == 3


def test_stats_on_empty_index(tmp_path):
    stats = SemanticIndex(tmp_path / "index.jsonl").stats()
    assert stats["n_records"] == 0
    assert set(stats["risk"]) == {str(i) for i in range(11)}


# ---------------------------------------------------------------------------
# Released-artifact adapter.


def test_normalize_released_payload_aliases():
    raw = {
        "frameId": "f1",
        "scene": "s1",
        "scenarioDna": {"scenario_criticality": {"riskScore": 5}, "wodE2eTags": ["construction"]},
        "mystery": True,
    }
    out = normalize_released_payload(raw)
    assert out["frame_id"] == "f1"
    assert out["scene_id"] == "s1"
    assert out["dna"]["scenario_criticality"]["risk_score"] == 5
    assert out["dna"]["wod_e2e_tags"] == ["construction"]
    assert out["extras"] == {"mystery": True}


def test_import_released_index(tmp_path):
    dna_payload = build_dna(weather="rain", risk=6).to_payload()
    rows = [
        {"frameId": "r1", "dna": dna_payload},
        {"frame_id": "r2", "scenario_dna": dna_payload, "createdAt": "2024-01-01T00:00:00Z"},
        {"frameId": "r1", "dna": dna_payload},  # duplicate: skipped
        {"frameId": "r3", "dna": {"bad": "shape"}},  # invalid: skipped
    ]
    src = tmp_path / "released.jsonl"
    src.write_text("\n".join(json.dumps(r) for r in rows) + "\n")
    dest = tmp_path / "imported.jsonl"

    imported = import_released_index(src, dest)
    assert imported == 2
    index = SemanticIndex(dest)
    assert index.frame_ids() == ["r1", "r2"]
    record = index.get("r2")
    assert record is not None
    assert record.created_at == "2024-01-01T00:00:00Z"
    assert record.winner_score.reward == 5.0
