"""End-to-end orchestration: ingest -> scouts -> consensus -> verify -> index.

Frames fan out to a bounded worker pool, but commits happen strictly in
manifest order, so the index file is byte-reproducible for a fixed config
and seed no matter how the pool schedules work. Frames already present in
the index are skipped up front, which is the whole resume story: killing a
run between frames and restarting converges on the same file.
"""

from __future__ import annotations

import json
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Mapping, Sequence

from .config import PipelineConfig
from .consensus import (
    CandidateSet,
    ConsensusResult,
    JudgeUnavailable,
    build_judge_prompt,
    candidate_set_to_payload,
    deterministic_candidate_set,
    deterministic_consensus,
    generate_candidates,
    valid_reports,
)
from .evaluate import EvalReport, GoldLabel, emit_report, evaluate_predictions, load_gold
from .gateway import ScoutReport, encode_image, run_scout
from .index import IndexRecord, ScoutSummary, SemanticIndex
from .inventory import ObjectInventory, build_inventory, load_detections
from .synthetic import mock_scout_reports
from .verifier import SelectionResult, select_best

logger = logging.getLogger(__name__)

EPOCH_TIMESTAMP = "1970-01-01T00:00:00Z"


@dataclass(frozen=True)
class ManifestRow:
    frame_id: str
    scene_id: str
    keyframe_slot: str
    image_paths: Mapping[str, str]


@dataclass
class RunSummary:
    frames_selected: int = 0
    frames_committed: int = 0
    frames_skipped: int = 0
    frames_failed: int = 0
    flags: int = 0
    failures: list[str] = field(default_factory=list)

    def to_payload(self) -> dict:
        return {
            "frames_selected": self.frames_selected,
            "frames_committed": self.frames_committed,
            "frames_skipped": self.frames_skipped,
            "frames_failed": self.frames_failed,
            "flags": self.flags,
            "failures": list(self.failures),
        }


def load_manifest(path: str | Path) -> list[ManifestRow]:
    rows: list[ManifestRow] = []
    with open(path, encoding="utf-8") as handle:
        for lineno, line in enumerate(handle, start=1):
            if not line.strip():
                continue
            try:
                raw = json.loads(line)
                rows.append(
                    ManifestRow(
                        frame_id=str(raw["frame_id"]),
                        scene_id=str(raw["scene_id"]),
                        keyframe_slot=str(raw.get("keyframe_slot", "start")),
                        image_paths=dict(raw.get("image_paths", {})),
                    )
                )
            except (json.JSONDecodeError, KeyError, TypeError) as exc:
                logger.warning("%s:%d skipped malformed manifest row: %s", path, lineno, exc)
    return rows


def select_keyframes(rows: Sequence[ManifestRow], k: int) -> list[ManifestRow]:
    """Evenly spaced frames per scene in manifest order; k=3 means start,
    middle (floor), end. Scenes with at most k frames are taken whole."""
    if k < 1:
        raise ValueError("k must be >= 1")
    by_scene: dict[str, list[ManifestRow]] = {}
    scene_order: list[str] = []
    for row in rows:
        if row.scene_id not in by_scene:
            scene_order.append(row.scene_id)
        by_scene.setdefault(row.scene_id, []).append(row)
    selected: list[ManifestRow] = []
    for scene_id in scene_order:
        scene_rows = by_scene[scene_id]
        n = len(scene_rows)
        if n <= k:
            selected.extend(scene_rows)
            continue
        if k == 1:
            indices = [0]
        else:
            indices = sorted({j * (n - 1) // (k - 1) for j in range(k)})
        selected.extend(scene_rows[i] for i in indices)
    return selected


@dataclass(frozen=True)
class FrameOutcome:
    row: ManifestRow
    inventory: ObjectInventory
    reports: tuple[ScoutReport, ...]
    consensus: ConsensusResult
    candidate_set: CandidateSet
    selection: SelectionResult


class _FrameFailure(Exception):
    pass


def _gather_reports(
    config: PipelineConfig, row: ManifestRow, inventory: ObjectInventory,
    gold: Mapping[str, GoldLabel],
) -> list[ScoutReport]:
    if config.mode == "mock":
        truth = gold.get(row.frame_id)
        if truth is None:
            raise _FrameFailure(f"{row.frame_id}: no gold truth for mock scouts")
        return mock_scout_reports(
            truth, inventory, config.mock.noise, config.mock.seed, config.mock.scouts
        )
    image_refs = [
        encode_image(row.image_paths[cam])
        for cam in ("front_left", "front_center", "front_right")
    ]
    reports: list[ScoutReport] = []
    with ThreadPoolExecutor(max_workers=config.scout_workers) as pool:
        futures = {
            scout.name: pool.submit(
                run_scout, scout, row.frame_id, inventory.rendered_text, image_refs
            )
            for scout in config.scouts
        }
        for name in sorted(futures):
            try:
                reports.append(futures[name].result())
            except Exception as exc:
                logger.warning("%s: scout %s failed: %s", row.frame_id, name, exc)
    if not reports:
        raise _FrameFailure(f"{row.frame_id}: every scout failed")
    return reports


def _build_candidates(
    config: PipelineConfig, row: ManifestRow, inventory: ObjectInventory,
    reports: Sequence[ScoutReport], consensus: ConsensusResult,
) -> CandidateSet:
    if config.mode == "mock" or config.judge is None:
        return deterministic_candidate_set(row.frame_id, consensus)
    prompt = build_judge_prompt(reports, inventory.rendered_text)
    try:
        llm_set = generate_candidates(
            config.judge, prompt, config.n_candidates, consensus.dna, row.frame_id
        )
    except JudgeUnavailable as exc:
        logger.warning("%s; using deterministic consensus", exc)
        return deterministic_candidate_set(row.frame_id, consensus)
    # The grounded deterministic candidate rides along at index 0.
    return CandidateSet(
        frame_id=row.frame_id,
        candidates=(consensus.dna,) + llm_set.candidates,
        source=llm_set.source,
    )


def _process_frame(
    config: PipelineConfig,
    row: ManifestRow,
    detections,
    gold: Mapping[str, GoldLabel],
) -> FrameOutcome:
    inventory = build_inventory(row.frame_id, detections, config.tau_recall)
    reports = _gather_reports(config, row, inventory, gold)
    usable = valid_reports(reports)
    if not usable:
        raise _FrameFailure(f"{row.frame_id}: no report produced valid DNA")
    if config.baseline == "single_scout_no_verifier":
        first = reports[0]
        if first.dna is None:
            raise _FrameFailure(f"{row.frame_id}: baseline scout produced no DNA")
        consensus = ConsensusResult(dna=first.dna, flagged_for_review=())
        candidate_set = CandidateSet(
            frame_id=row.frame_id, candidates=(first.dna,), source="deterministic"
        )
        selection = select_best(
            candidate_set.candidates, inventory, (), config.weights, config.indicator_mode
        )
        # Baseline commits the scout's DNA as-is; the score is advisory only.
        return FrameOutcome(row, inventory, tuple(reports), consensus, candidate_set, selection)
    consensus = deterministic_consensus(reports, inventory)
    candidate_set = _build_candidates(config, row, inventory, reports, consensus)
    selection = select_best(
        candidate_set.candidates, inventory, usable, config.weights, config.indicator_mode
    )
    return FrameOutcome(row, inventory, tuple(reports), consensus, candidate_set, selection)


def _timestamp(config: PipelineConfig) -> str:
    if config.deterministic_timestamps:
        return EPOCH_TIMESTAMP
    return datetime.now(timezone.utc).isoformat().replace("+00:00", "Z")


def _commit(
    config: PipelineConfig,
    index: SemanticIndex,
    outcome: FrameOutcome,
    reports_log,
    candidates_log,
) -> IndexRecord:
    summaries = tuple(
        ScoutSummary(
            scout_name=r.scout_name,
            risk_score=r.dna.scenario_criticality.risk_score,
            latency_s=r.latency_s,
            completion_tokens=r.completion_tokens,
        )
        for r in outcome.reports
        if r.dna is not None
    )
    record = IndexRecord(
        frame_id=outcome.row.frame_id,
        scene_id=outcome.row.scene_id,
        dna=outcome.selection.winner,
        winner_score=outcome.selection.scores[outcome.selection.winner_index],
        scout_summaries=summaries,
        flagged_for_review=outcome.consensus.flagged_for_review,
        created_at=_timestamp(config),
    )
    index.append_record(record)
    for report in outcome.reports:
        reports_log.write(json.dumps(report.to_payload(), ensure_ascii=False) + "\n")
    audit = candidate_set_to_payload(outcome.candidate_set)
    audit["inventory_text"] = outcome.inventory.rendered_text
    audit["image_paths"] = dict(outcome.row.image_paths)
    audit["scores"] = [s.to_payload() for s in outcome.selection.scores]
    audit["winner_index"] = outcome.selection.winner_index
    candidates_log.write(json.dumps(audit, ensure_ascii=False) + "\n")
    return record


def run_mine(config: PipelineConfig, max_frames: int | None = None) -> RunSummary:
    """Mine every selected keyframe not yet indexed; commit in manifest order.

    max_frames caps the number of new commits this call (the interruption
    knob used by resume tests); per-frame failures are recorded, not fatal.
    """
    rows = load_manifest(config.paths.manifest)
    if not rows:
        raise FileNotFoundError(f"manifest {config.paths.manifest} has no usable rows")
    detections_by_frame = load_detections(config.paths.detections)
    gold: Mapping[str, GoldLabel] = {}
    if config.mode == "mock":
        gold = load_gold(config.paths.gold)

    selected = select_keyframes(rows, config.keyframes_per_scene)
    index = SemanticIndex(config.paths.index)
    summary = RunSummary(frames_selected=len(selected))

    pending = []
    for row in selected:
        if row.frame_id in index:
            summary.frames_skipped += 1
        else:
            pending.append(row)
    if max_frames is not None:
        pending = pending[:max_frames]

    run_dir = Path(config.paths.run_dir)
    run_dir.mkdir(parents=True, exist_ok=True)
    reports_path = run_dir / "reports.jsonl"
    candidates_path = run_dir / "candidates.jsonl"

    with open(reports_path, "a", encoding="utf-8") as reports_log, open(
        candidates_path, "a", encoding="utf-8"
    ) as candidates_log, ThreadPoolExecutor(max_workers=config.frame_workers) as pool:
        futures = [
            (
                row,
                pool.submit(
                    _process_frame, config, row, detections_by_frame.get(row.frame_id, []), gold
                ),
            )
            for row in pending
        ]
        for row, future in futures:
            try:
                outcome = future.result()
            except _FrameFailure as exc:
                summary.frames_failed += 1
                summary.failures.append(str(exc))
                logger.error("frame failed: %s", exc)
                continue
            except Exception as exc:
                summary.frames_failed += 1
                summary.failures.append(f"{row.frame_id}: {exc}")
                logger.exception("frame %s failed unexpectedly", row.frame_id)
                continue
            record = _commit(config, index, outcome, reports_log, candidates_log)
            summary.frames_committed += 1
            summary.flags += len(record.flagged_for_review)
    logger.info(
        "mined %d frames (%d skipped, %d failed, %d flags)",
        summary.frames_committed,
        summary.frames_skipped,
        summary.frames_failed,
        summary.flags,
    )
    return summary


def run_ingest(config: PipelineConfig) -> dict[str, Any]:
    """Validate manifest and detections files; report counts and problems."""
    rows = load_manifest(config.paths.manifest)
    detections = load_detections(config.paths.detections)
    selected = select_keyframes(rows, config.keyframes_per_scene)
    frames_without_detections = sorted(
        row.frame_id for row in selected if not detections.get(row.frame_id)
    )
    return {
        "manifest_rows": len(rows),
        "scenes": len({row.scene_id for row in rows}),
        "selected_keyframes": len(selected),
        "frames_with_detections": len(detections),
        "selected_without_detections": frames_without_detections,
    }


def run_eval(config: PipelineConfig, out_dir: str | Path | None = None) -> EvalReport:
    """Evaluate the index against the gold set; write report files."""
    index_path = Path(config.paths.index)
    gold_path = Path(config.paths.gold)
    if not index_path.exists():
        raise FileNotFoundError(f"index file not found: {index_path}")
    if not gold_path.exists():
        raise FileNotFoundError(f"gold file not found: {gold_path}")
    index = SemanticIndex(index_path)
    gold = load_gold(gold_path)
    if not gold:
        raise ValueError(f"gold file {gold_path} holds no usable labels")
    predictions = {r.frame_id: r.dna for r in index.records()}
    summaries = {r.frame_id: r.scout_summaries for r in index.records()}
    report = evaluate_predictions(predictions, gold, summaries)
    if out_dir is not None:
        emit_report(report, out_dir)
    return report
