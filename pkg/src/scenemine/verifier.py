"""Deterministic reward scoring and Best-of-N selection for candidate records.

Three indicator checks run against the frame's object inventory and the raw
scout reports: grounding (are critical tags backed by a detection), causality
(does the planner action have a stated cause), hallucination (does any
object-implying field value lack both inventory and scout support). The
reward combines them linearly with a hallucination weight large enough to
dominate the other two, so an ungrounded object can never win on style.

Scoring is pure: identical inputs produce byte-equal verdict strings, which
the audit log and the review UI rely on.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass
from importlib import resources
from typing import Sequence

from .schema import ScenarioDNA

logger = logging.getLogger(__name__)

DEFAULT_ALPHA = 2.0
DEFAULT_BETA = 3.0
DEFAULT_GAMMA = 10.0


def _load_json(name: str) -> dict:
    return json.loads(resources.files("scenemine.data").joinpath(name).read_text())


#: tag -> detector classes that count as evidence for it.
GROUNDING_LEXICON: dict[str, frozenset[str]] = {
    tag: frozenset(classes) for tag, classes in _load_json("grounding_lexicon.json").items()
}

#: field -> value -> detector classes; values absent here are exempt.
OBJECT_LEXICON: dict[str, dict[str, frozenset[str]]] = {
    field: {value: frozenset(classes) for value, classes in values.items()}
    for field, values in _load_json("object_lexicon.json").items()
}

_CAUSALITY = _load_json("causality.json")
AVOIDANCE_ACTIONS: frozenset[str] = frozenset(_CAUSALITY["avoidance_actions"])
ACTION_COMPATIBLE_CAUSES: dict[str, dict[str, list[str]]] = _CAUSALITY["action_compatible_causes"]

GROUNDABLE_TAGS: tuple[str, ...] = tuple(sorted(GROUNDING_LEXICON))

# Object-implying fields checked by the hallucination indicator, in schema order.
_OBJECT_FIELDS = ("vru_status", "special_agent_class", "blocking_factor")


@dataclass(frozen=True)
class RewardWeights:
    alpha: float = DEFAULT_ALPHA
    beta: float = DEFAULT_BETA
    gamma: float = DEFAULT_GAMMA

    def __post_init__(self):
        if self.alpha < 0 or self.beta < 0 or self.gamma < 0:
            raise ValueError("weights must be non-negative")
        # The hallucination penalty must dominate the achievable upside.
        if self.gamma <= self.alpha + self.beta:
            raise ValueError("gamma must exceed alpha + beta")


@dataclass(frozen=True)
class IndicatorResult:
    value: int
    verdicts: tuple[str, ...]


@dataclass(frozen=True)
class CandidateScore:
    candidate_index: int
    g: int
    c: int
    h: int
    reward: float
    verdicts: tuple[str, ...]

    @property
    def hallucination_count(self) -> int:
        return sum(1 for v in self.verdicts if v.endswith(" Hallucinated"))

    def to_payload(self) -> dict:
        return {
            "candidate_index": self.candidate_index,
            "g": self.g,
            "c": self.c,
            "h": self.h,
            "reward": self.reward,
            "verdicts": list(self.verdicts),
        }


@dataclass(frozen=True)
class SelectionResult:
    winner: ScenarioDNA
    winner_index: int
    scores: tuple[CandidateScore, ...]


def grounding_indicator(dna: ScenarioDNA, inventory) -> IndicatorResult:
    """1 iff every groundable tag on the record has inventory evidence.

    Vacuously 1 when no groundable tag is present. Unmapped detector labels
    never count as evidence.
    """
    present = inventory.mapped_classes()
    verdicts = []
    grounded = 0
    total = 0
    for tag in GROUNDABLE_TAGS:
        if tag not in dna.wod_e2e_tags:
            continue
        total += 1
        if GROUNDING_LEXICON[tag] & present:
            grounded += 1
            verdicts.append(f"{tag} Grounded")
        else:
            verdicts.append(f"{tag} Ungrounded")
    if total == 0:
        return IndicatorResult(value=1, verdicts=("No groundable tags",))
    return IndicatorResult(value=1 if grounded == total else 0, verdicts=tuple(verdicts))


def causality_indicator(dna: ScenarioDNA) -> IndicatorResult:
    """1 iff the stated ego action is consistent with a stated cause."""
    action = dna.scenario_criticality.ego_required_action
    blocking = dna.scenario_criticality.blocking_factor
    challenge = dna.scenario_criticality.primary_challenge
    verdicts = []
    ok = True
    if action in AVOIDANCE_ACTIONS and blocking == "none" and challenge == "none":
        ok = False
        verdicts.append(f"Avoidance action {action} lacks a stated cause")
    for field, allowed in ACTION_COMPATIBLE_CAUSES.get(action, {}).items():
        value = dna.field_value(field)
        if value not in allowed:
            ok = False
            verdicts.append(f"Action {action} incompatible with {field}={value}")
    if ok:
        verdicts.append("Causality OK")
    return IndicatorResult(value=1 if ok else 0, verdicts=tuple(verdicts))


def object_implying_values(dna: ScenarioDNA) -> list[tuple[str, str, frozenset[str]]]:
    """(field, value, evidence classes) for every checkable object claim.

    Values with no lexicon entry are exempt by data (no detector class
    exists for them), not silently treated as hallucinations.
    """
    claims = []
    for field in _OBJECT_FIELDS:
        value = dna.field_value(field)
        if value == "none":
            continue
        classes = OBJECT_LEXICON.get(field, {}).get(value)
        if classes is None:
            continue
        claims.append((field, value, classes))
    return claims


def hallucination_indicator(
    dna: ScenarioDNA, inventory, scout_reports: Sequence = ()
) -> IndicatorResult:
    """1 iff any object-implying value has neither inventory nor scout support.

    Scout support means a report with valid DNA asserts the same value on the
    same field; parse failures contribute nothing.
    """
    present = inventory.mapped_classes()
    verdicts = []
    hallucinated = 0
    for field, value, classes in object_implying_values(dna):
        if classes & present:
            verdicts.append(f"{field}={value} Supported (inventory)")
            continue
        if any(
            getattr(r, "dna", None) is not None and r.dna.field_value(field) == value
            for r in scout_reports
        ):
            verdicts.append(f"{field}={value} Supported (scout report)")
            continue
        hallucinated += 1
        verdicts.append(f"{field}={value} Hallucinated")
    if not verdicts:
        verdicts.append("No object claims")
    return IndicatorResult(value=1 if hallucinated else 0, verdicts=tuple(verdicts))


def score_candidate(
    dna: ScenarioDNA,
    inventory,
    scout_reports: Sequence = (),
    weights: RewardWeights = RewardWeights(),
    candidate_index: int = 0,
    indicator_mode: str = "binary",
) -> CandidateScore:
    """Compose the three indicators into one reward.

    indicator_mode "count" scores g as the number of grounded tags and h as
    the number of unsupported claims; causality stays binary. Non-default.
    """
    gr = grounding_indicator(dna, inventory)
    ca = causality_indicator(dna)
    ha = hallucination_indicator(dna, inventory, scout_reports)
    if indicator_mode == "count":
        g = sum(1 for v in gr.verdicts if v.endswith(" Grounded"))
        h = sum(1 for v in ha.verdicts if v.endswith(" Hallucinated"))
    elif indicator_mode == "binary":
        g, h = gr.value, ha.value
    else:
        raise ValueError(f"unknown indicator_mode {indicator_mode!r}")
    c = ca.value
    reward = weights.alpha * g + weights.beta * c - weights.gamma * h
    return CandidateScore(
        candidate_index=candidate_index,
        g=g,
        c=c,
        h=h,
        reward=reward,
        verdicts=gr.verdicts + ca.verdicts + ha.verdicts,
    )


def select_best(
    candidates: Sequence[ScenarioDNA],
    inventory,
    scout_reports: Sequence = (),
    weights: RewardWeights = RewardWeights(),
    indicator_mode: str = "binary",
) -> SelectionResult:
    """Argmax by reward; ties prefer fewer hallucination verdicts, then the
    lowest index, so the deterministic candidate (always index 0) wins exact
    ties against sampled ones."""
    if not candidates:
        raise ValueError("no candidates to select from")
    scores = tuple(
        score_candidate(dna, inventory, scout_reports, weights, i, indicator_mode)
        for i, dna in enumerate(candidates)
    )
    best = min(scores, key=lambda s: (-s.reward, s.hallucination_count, s.candidate_index))
    return SelectionResult(
        winner=candidates[best.candidate_index],
        winner_index=best.candidate_index,
        scores=scores,
    )
