"""Scenario DNA schema: strict-enum record type, validation, tolerant parsing.

The DNA record is a four-layer structured description of one driving frame
(environment, road topology, interacting agents, criticality) plus a tag set
and a one-sentence description. Every categorical field is constrained to a
closed vocabulary shipped as plain-text data files (one file per field), so
the engine, the HTTP API, and any UI share a single source of truth.

Model output is messy, so :func:`parse_dna` applies a small, bounded repair
sequence (fences, line comments, brace span, trailing commas) before the
strict parse. Repairs never touch vocabulary values: an out-of-vocabulary
token is always reported as a violation, never coerced.
"""

from __future__ import annotations

import json
import logging
import re
from dataclasses import dataclass, field
from importlib import resources
from typing import Any, Iterable, Mapping

logger = logging.getLogger(__name__)

RISK_MIN = 0
RISK_MAX = 10

# Canonical key order, matching the output skeleton the models are prompted with.
GROUP_FIELDS: dict[str, tuple[str, ...]] = {
    "odd_attributes": (
        "weather",
        "time_of_day",
        "lighting_condition",
        "road_surface_friction",
        "sensor_integrity",
    ),
    "road_topology": (
        "scene_type",
        "lane_configuration",
        "drivable_area_status",
        "traffic_controls",
    ),
    "key_interacting_agents": (
        "vru_status",
        "lead_vehicle_behavior",
        "adjacent_vehicle_behavior",
        "special_agent_class",
    ),
    "scenario_criticality": (
        "primary_challenge",
        "ego_required_action",
        "blocking_factor",
        "risk_score",
    ),
}

#: field name -> group name, for addressing fields without the group prefix.
FIELD_GROUP: dict[str, str] = {
    f: g for g, fs in GROUP_FIELDS.items() for f in fs if f != "risk_score"
}

_ENUM_FIELDS = tuple(f for f in FIELD_GROUP if f != "traffic_controls")


def _load_vocab_file(name: str) -> tuple[str, ...]:
    text = resources.files("scenemine.data.vocab").joinpath(f"{name}.txt").read_text()
    return tuple(line.strip() for line in text.splitlines() if line.strip())


def load_vocabularies() -> dict[str, tuple[str, ...]]:
    """All enum vocabularies keyed by field name (plus wod_e2e_tags)."""
    names = list(FIELD_GROUP) + ["wod_e2e_tags"]
    return {name: _load_vocab_file(name) for name in names}


VOCAB: dict[str, tuple[str, ...]] = load_vocabularies()
VOCAB_VERSION: str = (
    resources.files("scenemine.data.vocab").joinpath("VERSION").read_text().strip()
)
WOD_E2E_TAGS: frozenset[str] = frozenset(VOCAB["wod_e2e_tags"])


class ParseError(Exception):
    """No well-formed DNA object could be recovered from model text.

    ``stage`` points at the repair step that gave up: 1 fence stripping,
    2 comment stripping, 3 balanced-brace extraction, 4 trailing-comma
    removal / final JSON parse.
    """

    def __init__(self, stage: int, message: str):
        super().__init__(f"stage {stage}: {message}")
        self.stage = stage


class ValidationError(Exception):
    """JSON parsed but the payload violates the schema; carries the report."""

    def __init__(self, report: "ValidationReport"):
        paths = ", ".join(v.path for v in report.violations)
        super().__init__(f"{len(report.violations)} violation(s): {paths}")
        self.report = report


@dataclass(frozen=True)
class Violation:
    path: str
    offending_value: str
    expected: str


@dataclass(frozen=True)
class ValidationReport:
    valid: bool
    violations: tuple[Violation, ...]

    def to_payload(self) -> dict[str, Any]:
        return {
            "valid": self.valid,
            "violations": [
                {"path": v.path, "offending_value": v.offending_value, "expected": v.expected}
                for v in self.violations
            ],
        }


def _report(violations: Iterable[Violation]) -> ValidationReport:
    ordered = tuple(sorted(violations, key=lambda v: v.path))
    return ValidationReport(valid=not ordered, violations=ordered)


@dataclass(frozen=True)
class OddAttributes:
    weather: str
    time_of_day: str
    lighting_condition: str
    road_surface_friction: str
    sensor_integrity: str


@dataclass(frozen=True)
class RoadTopology:
    scene_type: str
    lane_configuration: str
    drivable_area_status: str
    traffic_controls: tuple[str, ...]


@dataclass(frozen=True)
class KeyInteractingAgents:
    vru_status: str
    lead_vehicle_behavior: str
    adjacent_vehicle_behavior: str
    special_agent_class: str


@dataclass(frozen=True)
class ScenarioCriticality:
    primary_challenge: str
    ego_required_action: str
    blocking_factor: str
    risk_score: int


@dataclass(frozen=True)
class ScenarioDNA:
    odd_attributes: OddAttributes
    road_topology: RoadTopology
    key_interacting_agents: KeyInteractingAgents
    scenario_criticality: ScenarioCriticality
    wod_e2e_tags: frozenset[str] = field(default_factory=frozenset)
    description: str = ""

    def to_payload(self) -> dict[str, Any]:
        """Plain-dict form in canonical key order (tags sorted)."""
        return {
            "odd_attributes": {
                k: getattr(self.odd_attributes, k) for k in GROUP_FIELDS["odd_attributes"]
            },
            "road_topology": {
                "scene_type": self.road_topology.scene_type,
                "lane_configuration": self.road_topology.lane_configuration,
                "drivable_area_status": self.road_topology.drivable_area_status,
                "traffic_controls": list(self.road_topology.traffic_controls),
            },
            "key_interacting_agents": {
                k: getattr(self.key_interacting_agents, k)
                for k in GROUP_FIELDS["key_interacting_agents"]
            },
            "scenario_criticality": {
                k: getattr(self.scenario_criticality, k)
                for k in GROUP_FIELDS["scenario_criticality"]
            },
            "wod_e2e_tags": sorted(self.wod_e2e_tags),
            "description": self.description,
        }

    def field_value(self, name: str):
        """Value of a schema field addressed by its bare name."""
        if name == "risk_score":
            return self.scenario_criticality.risk_score
        group = FIELD_GROUP[name]
        return getattr(getattr(self, group), name)


def dna_from_payload(payload: Mapping[str, Any]) -> ScenarioDNA:
    """Construct a DNA record from an already-validated payload dict."""
    risk = payload["scenario_criticality"]["risk_score"]
    return ScenarioDNA(
        odd_attributes=OddAttributes(
            **{k: payload["odd_attributes"][k] for k in GROUP_FIELDS["odd_attributes"]}
        ),
        road_topology=RoadTopology(
            scene_type=payload["road_topology"]["scene_type"],
            lane_configuration=payload["road_topology"]["lane_configuration"],
            drivable_area_status=payload["road_topology"]["drivable_area_status"],
            traffic_controls=tuple(payload["road_topology"]["traffic_controls"]),
        ),
        key_interacting_agents=KeyInteractingAgents(
            **{
                k: payload["key_interacting_agents"][k]
                for k in GROUP_FIELDS["key_interacting_agents"]
            }
        ),
        scenario_criticality=ScenarioCriticality(
            primary_challenge=payload["scenario_criticality"]["primary_challenge"],
            ego_required_action=payload["scenario_criticality"]["ego_required_action"],
            blocking_factor=payload["scenario_criticality"]["blocking_factor"],
            risk_score=int(risk),
        ),
        wod_e2e_tags=frozenset(payload["wod_e2e_tags"]),
        description=str(payload["description"]),
    )


def _coerce_risk(value: Any) -> int | None:
    """Integral JSON numbers (7, 7.0) become ints; anything else is None."""
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        return None
    if isinstance(value, float):
        nearest = round(value)
        if abs(value - nearest) > 1e-9:
            return None
        value = int(nearest)
    return int(value)


def validate_payload(payload: Mapping[str, Any], *, fill_defaults: bool = False) -> ValidationReport:
    """Check a raw dict against the schema, reporting every violation.

    Violations are sorted by field path so reports are deterministic. When
    ``fill_defaults`` is set, a missing ``traffic_controls`` entry is treated
    as ``["none"]`` (the one field with a defined empty case); every other
    missing field is a violation.
    """
    violations: list[Violation] = []
    if not isinstance(payload, Mapping):
        return _report([Violation("$", repr(payload), "JSON object")])

    unknown = set(payload) - set(GROUP_FIELDS) - {"wod_e2e_tags", "description"}
    if unknown:
        logger.warning("ignoring unknown top-level keys: %s", sorted(unknown))

    for group, names in GROUP_FIELDS.items():
        sub = payload.get(group)
        if not isinstance(sub, Mapping):
            violations.append(
                Violation(group, "<missing>" if sub is None else repr(sub), f"{group} object")
            )
            continue
        unknown_sub = set(sub) - set(names)
        if unknown_sub:
            logger.warning("ignoring unknown keys under %s: %s", group, sorted(unknown_sub))
        for name in names:
            path = f"{group}.{name}"
            if name == "risk_score":
                risk = _coerce_risk(sub.get("risk_score"))
                if risk is None or not (RISK_MIN <= risk <= RISK_MAX):
                    violations.append(
                        Violation(
                            path,
                            "<missing>" if "risk_score" not in sub else repr(sub.get("risk_score")),
                            f"integer in [{RISK_MIN}, {RISK_MAX}]",
                        )
                    )
                continue
            if name == "traffic_controls":
                value = sub.get("traffic_controls")
                if value is None and fill_defaults:
                    value = ["none"]
                if not isinstance(value, list) or not value:
                    violations.append(
                        Violation(
                            path,
                            "<missing>" if value is None else repr(value),
                            "non-empty list from traffic_controls vocabulary",
                        )
                    )
                    continue
                for i, token in enumerate(value):
                    if token not in VOCAB["traffic_controls"]:
                        violations.append(
                            Violation(f"{path}[{i}]", repr(token), "traffic_controls vocabulary")
                        )
                continue
            token = sub.get(name)
            if token is None:
                violations.append(Violation(path, "<missing>", f"{name} vocabulary"))
            elif token not in VOCAB[name]:
                violations.append(Violation(path, repr(token), f"{name} vocabulary"))

    tags = payload.get("wod_e2e_tags")
    if not isinstance(tags, list):
        violations.append(
            Violation(
                "wod_e2e_tags",
                "<missing>" if tags is None else repr(tags),
                "list from wod_e2e_tags vocabulary",
            )
        )
    else:
        for i, tag in enumerate(tags):
            if tag not in WOD_E2E_TAGS:
                violations.append(
                    Violation(f"wod_e2e_tags[{i}]", repr(tag), "wod_e2e_tags vocabulary")
                )

    description = payload.get("description")
    if not isinstance(description, str) or not description.strip():
        violations.append(
            Violation(
                "description",
                "<missing>" if description is None else repr(description),
                "non-empty description",
            )
        )

    return _report(violations)


def validate_dna(dna: ScenarioDNA) -> ValidationReport:
    """Validate a structurally complete record; violations are data, not errors."""
    return validate_payload(dna.to_payload())


_FENCE_RE = re.compile(r"```[a-zA-Z0-9_-]*\n?(.*?)```", re.S)


def _strip_fences(text: str) -> str:
    m = _FENCE_RE.search(text)
    return m.group(1) if m else text


def _strip_line_comments(text: str) -> str:
    """Remove //-to-EOL comments outside of string literals."""
    out: list[str] = []
    in_string = False
    escape = False
    i = 0
    n = len(text)
    while i < n:
        ch = text[i]
        if in_string:
            out.append(ch)
            if escape:
                escape = False
            elif ch == "\\":
                escape = True
            elif ch == '"':
                in_string = False
            i += 1
            continue
        if ch == '"':
            in_string = True
            out.append(ch)
            i += 1
            continue
        if ch == "/" and i + 1 < n and text[i + 1] == "/":
            while i < n and text[i] != "\n":
                i += 1
            continue
        out.append(ch)
        i += 1
    return "".join(out)


def _balanced_object_span(text: str) -> str | None:
    """First balanced {...} span, honoring strings; None if unbalanced."""
    start = text.find("{")
    if start < 0:
        return None
    depth = 0
    in_string = False
    escape = False
    for i in range(start, len(text)):
        ch = text[i]
        if in_string:
            if escape:
                escape = False
            elif ch == "\\":
                escape = True
            elif ch == '"':
                in_string = False
            continue
        if ch == '"':
            in_string = True
        elif ch == "{":
            depth += 1
        elif ch == "}":
            depth -= 1
            if depth == 0:
                return text[start : i + 1]
    return None


_TRAILING_COMMA_RE = re.compile(r",(\s*[}\]])")


def _strip_trailing_commas(text: str) -> str:
    return _TRAILING_COMMA_RE.sub(r"\1", text)


def repair_json_text(raw_text: str) -> str:
    """Run the bounded repair sequence; raises ParseError when unrecoverable."""
    stage1 = _strip_fences(raw_text)
    stage2 = _strip_line_comments(stage1)
    span = _balanced_object_span(stage2)
    if span is None:
        raise ParseError(3, "no balanced JSON object found")
    return _strip_trailing_commas(span)


def parse_dna(raw_text: str) -> ScenarioDNA:
    """Parse model text into a validated DNA record.

    Raises ParseError when no JSON object is recoverable and ValidationError
    (carrying the full report) when the object parses but breaks the schema.
    """
    candidate = repair_json_text(raw_text)
    try:
        payload = json.loads(candidate)
    except json.JSONDecodeError as exc:
        raise ParseError(4, f"JSON decode failed after repair: {exc}") from exc
    if not isinstance(payload, dict):
        raise ParseError(4, f"top-level JSON value is {type(payload).__name__}, not an object")
    topology = payload.get("road_topology")
    if isinstance(topology, dict) and "traffic_controls" not in topology:
        topology["traffic_controls"] = ["none"]
    report = validate_payload(payload)
    if not report.valid:
        raise ValidationError(report)
    return dna_from_payload(payload)


def serialize_dna(dna: ScenarioDNA) -> str:
    """Canonical single-line JSON; rejects invalid records."""
    report = validate_dna(dna)
    if not report.valid:
        raise ValidationError(report)
    return json.dumps(dna.to_payload(), ensure_ascii=False, separators=(", ", ": "))


def all_fields() -> tuple[str, ...]:
    """Bare names of all vocabulary-constrained fields."""
    return tuple(FIELD_GROUP)


def enum_fields() -> tuple[str, ...]:
    """Single-valued enum fields (excludes traffic_controls and risk_score)."""
    return _ENUM_FIELDS
