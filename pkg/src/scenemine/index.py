"""Append-only JSONL index of mined records, with structured queries.

One record per line keeps the store auditable with text tools and makes
crash behavior easy to reason about: an interrupted append leaves at most
one torn final line, which the loader drops with a warning. Queries run
against an in-memory view built at load time; a small inverted map per enum
field keeps conjunctive filters cheap without any database dependency.
"""

from __future__ import annotations

import json
import logging
import os
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping, Sequence

from .schema import (
    RISK_MAX,
    RISK_MIN,
    ScenarioDNA,
    ValidationError,
    all_fields,
    dna_from_payload,
    validate_payload,
)
from .verifier import CandidateScore

logger = logging.getLogger(__name__)


class DuplicateFrame(Exception):
    """frame_id already present in the index."""


@dataclass(frozen=True)
class ScoutSummary:
    scout_name: str
    risk_score: int
    latency_s: float
    completion_tokens: int

    def to_payload(self) -> dict:
        return {
            "scout_name": self.scout_name,
            "risk_score": self.risk_score,
            "latency_s": self.latency_s,
            "completion_tokens": self.completion_tokens,
        }


@dataclass(frozen=True)
class IndexRecord:
    frame_id: str
    scene_id: str
    dna: ScenarioDNA
    winner_score: CandidateScore
    scout_summaries: tuple[ScoutSummary, ...]
    flagged_for_review: tuple[str, ...]
    created_at: str

    def to_payload(self) -> dict:
        return {
            "frame_id": self.frame_id,
            "scene_id": self.scene_id,
            "dna": self.dna.to_payload(),
            "winner_score": self.winner_score.to_payload(),
            "scout_summaries": [s.to_payload() for s in self.scout_summaries],
            "flagged_for_review": list(self.flagged_for_review),
            "created_at": self.created_at,
        }


def record_from_payload(payload: Mapping[str, Any]) -> IndexRecord:
    report = validate_payload(payload["dna"])
    if not report.valid:
        raise ValidationError(report)
    ws = payload["winner_score"]
    return IndexRecord(
        frame_id=str(payload["frame_id"]),
        scene_id=str(payload.get("scene_id", "")),
        dna=dna_from_payload(payload["dna"]),
        winner_score=CandidateScore(
            candidate_index=int(ws["candidate_index"]),
            g=int(ws["g"]),
            c=int(ws["c"]),
            h=int(ws["h"]),
            reward=float(ws["reward"]),
            verdicts=tuple(ws["verdicts"]),
        ),
        scout_summaries=tuple(
            ScoutSummary(
                scout_name=str(s["scout_name"]),
                risk_score=int(s["risk_score"]),
                latency_s=float(s["latency_s"]),
                completion_tokens=int(s["completion_tokens"]),
            )
            for s in payload.get("scout_summaries", [])
        ),
        flagged_for_review=tuple(payload.get("flagged_for_review", [])),
        created_at=str(payload.get("created_at", "")),
    )


@dataclass(frozen=True)
class Query:
    filters: Mapping[str, Any] = field(default_factory=dict)
    risk_min: int = RISK_MIN
    risk_max: int = RISK_MAX
    required_tags: frozenset[str] = frozenset()
    description_contains: str = ""

    def __post_init__(self):
        if not (RISK_MIN <= self.risk_min <= RISK_MAX):
            raise ValueError(f"risk_min {self.risk_min} outside [{RISK_MIN}, {RISK_MAX}]")
        if not (RISK_MIN <= self.risk_max <= RISK_MAX):
            raise ValueError(f"risk_max {self.risk_max} outside [{RISK_MIN}, {RISK_MAX}]")
        known = set(all_fields())
        for name, value in self.filters.items():
            if name not in known:
                raise ValueError(f"unknown filter field {name!r}")
            if not isinstance(value, str) and not (
                isinstance(value, (list, tuple, set, frozenset))
                and all(isinstance(v, str) for v in value)
            ):
                raise ValueError(f"filter {name!r} must be a string or set of strings")

    def matches(self, record: IndexRecord) -> bool:
        risk = record.dna.scenario_criticality.risk_score
        if not (self.risk_min <= risk <= self.risk_max):
            return False
        if not self.required_tags <= record.dna.wod_e2e_tags:
            return False
        if (
            self.description_contains
            and self.description_contains.lower() not in record.dna.description.lower()
        ):
            return False
        for name, wanted in self.filters.items():
            value = record.dna.field_value(name)
            if name == "traffic_controls":
                tokens = set(value)
                if isinstance(wanted, str):
                    if wanted not in tokens:
                        return False
                elif not set(wanted) & tokens:
                    return False
            elif isinstance(wanted, str):
                if value != wanted:
                    return False
            elif value not in wanted:
                return False
        return True


class SemanticIndex:
    """Single-writer append-only store; readers load a snapshot."""

    def __init__(self, path: str | Path):
        self.path = Path(path)
        self._records: dict[str, IndexRecord] = {}
        self._by_field: dict[str, dict[str, set[str]]] = {}
        # Set when the file's tail is unusable: truncate point for the torn
        # bytes, or a missing final newline before a record kept as-is.
        self._truncate_to: int | None = None
        self._needs_newline = False
        if self.path.exists():
            self._load()

    def _load(self) -> None:
        blob = self.path.read_bytes()
        lines = blob.split(b"\n")
        offset = 0
        for lineno, raw in enumerate(lines, start=1):
            start = offset
            offset += len(raw) + 1
            if not raw.strip():
                continue
            is_tail = lineno == len(lines)  # only a file without final newline
            try:
                record = record_from_payload(json.loads(raw.decode("utf-8")))
            except (json.JSONDecodeError, UnicodeDecodeError, KeyError, TypeError,
                    ValueError, ValidationError) as exc:
                if is_tail:
                    logger.warning("%s: dropped torn tail line %d (%s)", self.path, lineno, exc)
                    self._truncate_to = start
                else:
                    logger.error("%s: skipped corrupt line %d (%s)", self.path, lineno, exc)
                continue
            if is_tail:
                self._needs_newline = True
            if record.frame_id in self._records:
                logger.warning("%s: duplicate frame_id %s at line %d kept first occurrence",
                               self.path, record.frame_id, lineno)
                continue
            self._remember(record)

    def _remember(self, record: IndexRecord) -> None:
        self._records[record.frame_id] = record
        for name in all_fields():
            value = record.dna.field_value(name)
            tokens = value if name == "traffic_controls" else (value,)
            for token in tokens:
                self._by_field.setdefault(name, {}).setdefault(token, set()).add(record.frame_id)

    def __len__(self) -> int:
        return len(self._records)

    def __contains__(self, frame_id: str) -> bool:
        return frame_id in self._records

    def frame_ids(self) -> list[str]:
        return sorted(self._records)

    def get(self, frame_id: str) -> IndexRecord | None:
        return self._records.get(frame_id)

    def records(self) -> list[IndexRecord]:
        return [self._records[fid] for fid in sorted(self._records)]

    def append_record(self, record: IndexRecord) -> None:
        """Durable append: written, flushed, and fsynced before the memory
        view updates, so an ack implies the line is on disk."""
        if record.frame_id in self._records:
            raise DuplicateFrame(record.frame_id)
        data = json.dumps(record.to_payload(), ensure_ascii=False).encode("utf-8") + b"\n"
        if self._needs_newline:
            data = b"\n" + data
        self.path.parent.mkdir(parents=True, exist_ok=True)
        with open(self.path, "ab") as handle:
            if self._truncate_to is not None:
                handle.truncate(self._truncate_to)  # reclaim torn tail bytes
            handle.write(data)
            handle.flush()
            os.fsync(handle.fileno())
        self._truncate_to = None
        self._needs_newline = False
        self._remember(record)

    def query(self, q: Query) -> list[IndexRecord]:
        """All records matching every filter, riskiest first."""
        hits = [
            record
            for fid in self._candidate_ids(q)
            if q.matches(record := self._records[fid])
        ]
        return sorted(hits, key=lambda r: (-r.dna.scenario_criticality.risk_score, r.frame_id))

    def _candidate_ids(self, q: Query) -> set[str]:
        # Narrow by the most selective equality filter before the full scan.
        best: set[str] | None = None
        for name, wanted in q.filters.items():
            if not isinstance(wanted, str):
                continue
            ids = self._by_field.get(name, {}).get(wanted, set())
            if best is None or len(ids) < len(best):
                best = ids
        return set(self._records) if best is None else set(best)

    def stats(self) -> dict:
        """Value histograms per field, tag counts, risk histogram."""
        field_hist: dict[str, Counter] = {name: Counter() for name in all_fields()}
        tag_hist: Counter = Counter()
        risk_hist = {i: 0 for i in range(RISK_MIN, RISK_MAX + 1)}
        for record in self._records.values():
            for name in all_fields():
                value = record.dna.field_value(name)
                tokens = value if name == "traffic_controls" else (value,)
                for token in tokens:
                    field_hist[name][token] += 1
            for tag in record.dna.wod_e2e_tags:
                tag_hist[tag] += 1
            risk_hist[record.dna.scenario_criticality.risk_score] += 1
        return {
            "n_records": len(self._records),
            "fields": {name: dict(sorted(field_hist[name].items())) for name in all_fields()},
            "tags": dict(sorted(tag_hist.items())),
            "risk": {str(k): v for k, v in risk_hist.items()},
        }


_FIELD_ALIASES = {
    "frameId": "frame_id",
    "frame": "frame_id",
    "sceneId": "scene_id",
    "scene": "scene_id",
    "scenario_dna": "dna",
    "scenarioDna": "dna",
    "riskScore": "risk_score",
    "wodE2eTags": "wod_e2e_tags",
    "tags": "wod_e2e_tags",
    "createdAt": "created_at",
}


def normalize_released_payload(raw: Mapping[str, Any]) -> dict:
    """Map alternate field spellings from released artifacts onto ours.

    Unrecognized keys are preserved under "extras" rather than dropped.
    """
    known = {"frame_id", "scene_id", "dna", "winner_score", "scout_summaries",
             "flagged_for_review", "created_at", "category", "annotator", "verified_at"}
    out: dict[str, Any] = {}
    extras: dict[str, Any] = {}
    for key, value in raw.items():
        mapped = _FIELD_ALIASES.get(key, key)
        if mapped in known:
            out[mapped] = value
        else:
            extras[key] = value
    dna = out.get("dna")
    if isinstance(dna, dict):
        crit = dna.get("scenario_criticality")
        if isinstance(crit, dict) and "riskScore" in crit:
            crit["risk_score"] = crit.pop("riskScore")
        if "wodE2eTags" in dna:
            dna["wod_e2e_tags"] = dna.pop("wodE2eTags")
    if extras:
        out["extras"] = extras
    return out


def import_released_index(src: str | Path, dest: str | Path) -> int:
    """Adapt a released index file into our record schema; returns count."""
    dest_index = SemanticIndex(dest)
    imported = 0
    with open(src, encoding="utf-8") as handle:
        for lineno, line in enumerate(handle, start=1):
            if not line.strip():
                continue
            payload = normalize_released_payload(json.loads(line))
            payload.setdefault("scene_id", "")
            payload.setdefault("created_at", "")
            payload.setdefault(
                "winner_score",
                {"candidate_index": 0, "g": 1, "c": 1, "h": 0, "reward": 5.0, "verdicts": []},
            )
            try:
                record = record_from_payload(payload)
            except (KeyError, TypeError, ValueError, ValidationError) as exc:
                logger.error("%s:%d not importable: %s", src, lineno, exc)
                continue
            try:
                dest_index.append_record(record)
                imported += 1
            except DuplicateFrame:
                logger.warning("%s:%d duplicate frame_id %s skipped", src, lineno, record.frame_id)
    return imported
