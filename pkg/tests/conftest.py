"""Shared fixtures: the canonical worked example and small factory helpers."""

from __future__ import annotations

import json

import pytest

from scenemine.inventory import Box, Detection, build_inventory
from scenemine.schema import dna_from_payload

# The worked construction-zone example: one frame, three cameras, and the
# record the system is expected to produce for it.
EXAMPLE1_JSON = (
    '{"odd_attributes":{"weather":"overcast","time_of_day":"day",'
    '"lighting_condition":"nominal","road_surface_friction":"dry",'
    '"sensor_integrity":"nominal"},"road_topology":{"scene_type":"construction_zone",'
    '"lane_configuration":"merge_right","drivable_area_status":"restricted_by_static_obstacle",'
    '"traffic_controls":["none"]},"key_interacting_agents":{"vru_status":"roadside_static",'
    '"lead_vehicle_behavior":"nominal","adjacent_vehicle_behavior":"none",'
    '"special_agent_class":"construction_machinery"},"scenario_criticality":'
    '{"primary_challenge":"violation_of_map_topology","ego_required_action":'
    '"nudge_around_static_obstacle","blocking_factor":"construction_barrier",'
    '"risk_score":7},"wod_e2e_tags":["construction","lane_diversion"],'
    '"description":"Active construction zone with barrels closing the left lane, '
    'forcing a merge behavior."}'
)

EXAMPLE1_RENDER = (
    "[CAM_FRONT_LEFT]: 3 Orange Drums (Large/0.92, Large/0.88, Med/0.85); "
    "1 Traffic Cone (Med/0.88)\n"
    "[CAM_FRONT]: 1 Construction Worker (Med/0.75)\n"
    "[CAM_FRONT_RIGHT]: 1 Car (Small/0.85)"
)


def example1_payload() -> dict:
    return json.loads(EXAMPLE1_JSON)


@pytest.fixture
def example1_dna():
    return dna_from_payload(example1_payload())


def example1_detections() -> list[Detection]:
    """Detections that must render byte-exactly to EXAMPLE1_RENDER."""
    def det(camera, cls, conf, w, h):
        return Detection(
            frame_id="ex1",
            camera=camera,
            class_name=cls,
            confidence=conf,
            box=Box(10.0, 10.0, w, h),
            image_w=1280,
            image_h=720,
        )

    return [
        det("FRONT_LEFT", "orange drum", 0.92, 400, 300),   # s_rel 0.130 Large
        det("FRONT_LEFT", "orange drum", 0.88, 380, 290),   # s_rel 0.120 Large
        det("FRONT_LEFT", "orange drum", 0.85, 200, 150),   # s_rel 0.033 Med
        det("FRONT_LEFT", "traffic cone", 0.88, 120, 110),  # s_rel 0.014 Med
        det("FRONT_CENTER", "construction worker", 0.75, 120, 200),
        det("FRONT_RIGHT", "car", 0.85, 60, 40),            # s_rel 0.0026 Small
    ]


@pytest.fixture
def example1_inventory():
    return build_inventory("ex1", example1_detections())


def make_report(
    dna,
    scout_name="scout-x",
    frame_id="f",
    trace="looked at the frame",
    latency_s=10.0,
    completion_tokens=600,
):
    from scenemine.gateway import ScoutReport

    return ScoutReport(
        frame_id=frame_id,
        scout_name=scout_name,
        reasoning_trace=trace,
        dna=dna,
        parse_failure=None,
        latency_s=latency_s,
        completion_tokens=completion_tokens,
        tokens_per_s=completion_tokens / latency_s,
    )


def build_dna(tags=(), risk=1, description="Quiet street, nothing notable.", **fields):
    """Nominal record with selective field overrides; fields use bare names."""
    from scenemine.schema import FIELD_GROUP

    payload = {
        "odd_attributes": {
            "weather": "clear",
            "time_of_day": "day",
            "lighting_condition": "nominal",
            "road_surface_friction": "dry",
            "sensor_integrity": "nominal",
        },
        "road_topology": {
            "scene_type": "urban_street",
            "lane_configuration": "straight",
            "drivable_area_status": "nominal",
            "traffic_controls": ["none"],
        },
        "key_interacting_agents": {
            "vru_status": "none",
            "lead_vehicle_behavior": "nominal",
            "adjacent_vehicle_behavior": "none",
            "special_agent_class": "none",
        },
        "scenario_criticality": {
            "primary_challenge": "none",
            "ego_required_action": "lane_keep",
            "blocking_factor": "none",
            "risk_score": risk,
        },
        "wod_e2e_tags": list(tags),
        "description": description,
    }
    for name, value in fields.items():
        payload[FIELD_GROUP[name]][name] = value
    return dna_from_payload(payload)


def make_detection(
    frame_id="f",
    camera="FRONT_CENTER",
    class_name="car",
    confidence=0.5,
    w=100.0,
    h=100.0,
    image_w=1280,
    image_h=720,
) -> Detection:
    return Detection(
        frame_id=frame_id,
        camera=camera,
        class_name=class_name,
        confidence=confidence,
        box=Box(0.0, 0.0, w, h),
        image_w=image_w,
        image_h=image_h,
    )


# One visible PASS/FAIL/SKIP line per acceptance check, printed after the
# run so pytest's output capture cannot swallow it.
_ACCEPTANCE_OUTCOMES: dict[str, str] = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    if not item.nodeid.startswith("tests/test_acceptance.py"):
        return
    if report.when == "call" or (report.when == "setup" and report.outcome != "passed"):
        _ACCEPTANCE_OUTCOMES[item.name] = report.outcome


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not _ACCEPTANCE_OUTCOMES:
        return
    labels = {"passed": "PASS", "failed": "FAIL", "skipped": "SKIP"}
    terminalreporter.write_sep("-", "acceptance checks")
    for name in sorted(_ACCEPTANCE_OUTCOMES):
        outcome = _ACCEPTANCE_OUTCOMES[name]
        terminalreporter.write_line(f"{name}: {labels.get(outcome, outcome.upper())}")
