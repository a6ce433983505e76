"""Consensus over scout reports: LLM judge candidates plus a deterministic vote.

The deterministic vote is the availability floor: it runs with no endpoint,
it is injected as candidate 0 into every LLM candidate set, and its rules
are biased toward safety. Field votes go to the majority; ties resolve to
the higher entry in that field's shipped safety ordering. Object-implying
enum values need either two independent votes or inventory corroboration,
mirroring the tag rule, so one model cannot smuggle an object into the
consensus on its own.
"""

from __future__ import annotations

import json
import logging
import math
import statistics
from collections import Counter
from dataclasses import dataclass
from importlib import resources
from typing import Sequence

from .gateway import (
    GatewayError,
    PromptBundle,
    ScoutConfig,
    ScoutReport,
    parse_scout_response,
    query_scout,
    scout_system_prompt,
)
from .schema import ScenarioDNA, dna_from_payload, enum_fields, serialize_dna
from .verifier import GROUNDING_LEXICON, OBJECT_LEXICON

logger = logging.getLogger(__name__)

DEFAULT_N_CANDIDATES = 3

_TRACE_BUDGET_CHARS = 1200

# Enum fields whose non-none values assert a physical object's presence.
_OBJECT_FIELDS = ("vru_status", "special_agent_class", "blocking_factor")


class JudgeUnavailable(Exception):
    """Every judge call failed at transport level; use the deterministic vote."""


@dataclass(frozen=True)
class CandidateSet:
    frame_id: str
    candidates: tuple[ScenarioDNA, ...]
    source: str  # "llm_judge" or "deterministic"

    def __post_init__(self):
        if not self.candidates:
            raise ValueError("candidate set must not be empty")


@dataclass(frozen=True)
class ConsensusResult:
    dna: ScenarioDNA
    flagged_for_review: tuple[str, ...]


def _load_safety_orders() -> dict[str, tuple[str, ...]]:
    orders: dict[str, tuple[str, ...]] = {}
    root = resources.files("scenemine.data.safety_order")
    for name in list(enum_fields()) + ["traffic_controls"]:
        text = root.joinpath(f"{name}.txt").read_text()
        orders[name] = tuple(line.strip() for line in text.splitlines() if line.strip())
    return orders


#: field -> values ranked highest-risk first; used for all tie-breaks.
SAFETY_ORDER: dict[str, tuple[str, ...]] = _load_safety_orders()


def _safety_rank(field: str, value: str) -> int:
    return SAFETY_ORDER[field].index(value)


def _scout_prompt_section(start_marker: str, end_marker: str) -> str:
    text = scout_system_prompt()
    start = text.index(start_marker)
    end = text.index(end_marker, start)
    return text[start:end].rstrip()


def judge_system_prompt() -> str:
    """Judge prompt with the schema guide and skeleton spliced in from the
    scout prompt, so both roles see the same vocabulary text."""
    template = resources.files("scenemine.data.prompts").joinpath(
        "judge_system_prompt.txt"
    ).read_text()
    guide = _scout_prompt_section("### 3. SCHEMA VOCABULARY", "### 4. OUTPUT JSON SKELETON")
    skeleton = _scout_prompt_section("### 4. OUTPUT JSON SKELETON", "### 5. FEW-SHOT EXAMPLES")
    return template.replace("{SCHEMA_GUIDE}", guide).replace("{OUTPUT_SKELETON}", skeleton)


def build_judge_prompt(reports: Sequence[ScoutReport], inventory_text: str) -> PromptBundle:
    """Text-only bundle: inventory, then one labeled section per scout."""
    if not reports:
        raise ValueError("at least one scout report is required")
    sections = [f"[YOLO Inventory]:\n{inventory_text}"]
    for report in reports:
        lines = [f"### Scout: {report.scout_name}"]
        trace = report.reasoning_trace.strip()
        if trace:
            lines.append(f"Trace: {trace[:_TRACE_BUDGET_CHARS]}")
        if report.dna is not None:
            lines.append(f"DNA: {serialize_dna(report.dna)}")
        else:
            lines.append("DNA: INVALID JSON")
        sections.append("\n".join(lines))
    return PromptBundle(
        system=judge_system_prompt(),
        user_text="\n\n".join(sections),
        images=(),
    )


def valid_reports(reports: Sequence[ScoutReport]) -> list[ScoutReport]:
    return [r for r in reports if r.dna is not None]


def _dedupe(reports: Sequence[ScoutReport]) -> list[ScoutReport]:
    # Exact duplicates (same scout, same DNA) vote once; keeps consensus
    # monotone under report duplication and permutation-invariant.
    seen: dict[tuple[str, str], ScoutReport] = {}
    for report in reports:
        seen.setdefault((report.scout_name, serialize_dna(report.dna)), report)
    return sorted(seen.values(), key=lambda r: (r.scout_name, serialize_dna(r.dna)))


def _eligible_enum_value(
    field: str, value: str, votes: int, inventory_classes: frozenset[str]
) -> bool:
    if field not in _OBJECT_FIELDS or value == "none":
        return True
    classes = OBJECT_LEXICON.get(field, {}).get(value)
    if classes is None:
        return True  # no detector class exists for this value; exempt
    return votes >= 2 or bool(classes & inventory_classes)


def _vote_enum(field: str, reports: Sequence[ScoutReport], inventory_classes: frozenset[str]) -> str:
    votes = Counter(r.dna.field_value(field) for r in reports)
    eligible = {
        value: n
        for value, n in votes.items()
        if _eligible_enum_value(field, value, n, inventory_classes)
    }
    for value, n in votes.items():
        if value not in eligible:
            logger.info(
                "field %s: value %r rejected (1 vote, no inventory support)", field, value
            )
    if not eligible:
        # Every vote was an uncorroborated object claim; fall back to the
        # safest reading, the lowest-risk vocabulary entry.
        return SAFETY_ORDER[field][-1]
    top = max(eligible.values())
    tied = [value for value, n in eligible.items() if n == top]
    return min(tied, key=lambda v: _safety_rank(field, v))


def _vote_traffic_controls(reports: Sequence[ScoutReport]) -> tuple[str, ...]:
    votes: Counter[str] = Counter()
    for report in reports:
        for token in set(report.dna.road_topology.traffic_controls):
            votes[token] += 1
    threshold = len(reports) // 2 + 1
    majority = [t for t, n in votes.items() if n >= threshold]
    if not majority:
        top = max(votes.values())
        tied = [t for t, n in votes.items() if n == top]
        majority = [min(tied, key=lambda t: _safety_rank("traffic_controls", t))]
    return tuple(sorted(majority, key=lambda t: _safety_rank("traffic_controls", t)))


def _vote_tags(
    reports: Sequence[ScoutReport], inventory_classes: frozenset[str]
) -> tuple[frozenset[str], tuple[str, ...]]:
    votes: Counter[str] = Counter()
    for report in reports:
        for tag in report.dna.wod_e2e_tags:
            votes[tag] += 1
    included: set[str] = set()
    flagged: list[str] = []
    for tag, n in sorted(votes.items()):
        if n >= 2:
            included.add(tag)
        elif GROUNDING_LEXICON.get(tag, frozenset()) & inventory_classes:
            included.add(tag)
        else:
            flagged.append(tag)
    return frozenset(included), tuple(flagged)


def deterministic_consensus(reports: Sequence[ScoutReport], inventory) -> ConsensusResult:
    """Safety-biased vote across reports that carry valid DNA.

    Risk is the ceiling of the median (rounds toward danger); the description
    comes from the report whose risk sits closest to the consensus, ties to
    the lexicographically first scout name.
    """
    usable = _dedupe(valid_reports(reports))
    if not usable:
        raise ValueError("no valid reports to aggregate")
    inventory_classes = inventory.mapped_classes()

    values: dict[str, object] = {
        field: _vote_enum(field, usable, inventory_classes) for field in enum_fields()
    }
    controls = _vote_traffic_controls(usable)
    tags, flagged = _vote_tags(usable, inventory_classes)
    risk = math.ceil(
        statistics.median(r.dna.scenario_criticality.risk_score for r in usable)
    )
    closest = min(
        usable,
        key=lambda r: (abs(r.dna.scenario_criticality.risk_score - risk), r.scout_name),
    )

    payload = {
        "odd_attributes": {
            k: values[k]
            for k in (
                "weather",
                "time_of_day",
                "lighting_condition",
                "road_surface_friction",
                "sensor_integrity",
            )
        },
        "road_topology": {
            "scene_type": values["scene_type"],
            "lane_configuration": values["lane_configuration"],
            "drivable_area_status": values["drivable_area_status"],
            "traffic_controls": list(controls),
        },
        "key_interacting_agents": {
            k: values[k]
            for k in (
                "vru_status",
                "lead_vehicle_behavior",
                "adjacent_vehicle_behavior",
                "special_agent_class",
            )
        },
        "scenario_criticality": {
            "primary_challenge": values["primary_challenge"],
            "ego_required_action": values["ego_required_action"],
            "blocking_factor": values["blocking_factor"],
            "risk_score": risk,
        },
        "wod_e2e_tags": sorted(tags),
        "description": closest.dna.description,
    }
    return ConsensusResult(dna=dna_from_payload(payload), flagged_for_review=flagged)


def generate_candidates(
    judge: ScoutConfig,
    prompt: PromptBundle,
    n: int,
    fallback: ScenarioDNA,
    frame_id: str,
    **query_kwargs,
) -> CandidateSet:
    """n sampled judge completions; unparseable ones become the fallback so
    the set always has n members. All-transport-failure raises JudgeUnavailable."""
    if n < 1:
        raise ValueError("n must be >= 1")
    candidates: list[ScenarioDNA] = []
    transport_failures = 0
    for i in range(n):
        try:
            completion = query_scout(judge, prompt, **query_kwargs)
        except GatewayError as exc:
            transport_failures += 1
            logger.warning("judge call %d/%d failed: %s", i + 1, n, exc)
            candidates.append(fallback)
            continue
        _, outcome = parse_scout_response(completion.text)
        if isinstance(outcome, ScenarioDNA):
            candidates.append(outcome)
        else:
            logger.info("judge candidate %d unparseable, substituting fallback", i)
            candidates.append(fallback)
    if transport_failures == n:
        raise JudgeUnavailable(f"all {n} judge calls failed for frame {frame_id}")
    return CandidateSet(frame_id=frame_id, candidates=tuple(candidates), source="llm_judge")


def deterministic_candidate_set(frame_id: str, consensus: ConsensusResult) -> CandidateSet:
    return CandidateSet(
        frame_id=frame_id, candidates=(consensus.dna,), source="deterministic"
    )


def candidate_set_to_payload(cs: CandidateSet) -> dict:
    return {
        "frame_id": cs.frame_id,
        "candidates": [json.loads(serialize_dna(c)) for c in cs.candidates],
        "source": cs.source,
    }
