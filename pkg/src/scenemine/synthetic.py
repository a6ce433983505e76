"""Seeded synthetic frames and mock scouts for offline, reproducible runs.

Real VLM output is not reproducible, so desk-scale tests run against a
generated world: each frame gets a ground-truth record plus detections that
support every object the truth asserts. Mock scouts corrupt that truth with
configurable noise. Hallucinated values are drawn from per-scout disjoint
pools, modeling an ensemble whose members fail in different ways rather
than conspiring on the same phantom object.

Everything is deterministic given (seed, scout, frame); RNG streams are
seeded from strings, which Python hashes stably across runs and platforms.
"""

from __future__ import annotations

import base64
import json
import logging
import random
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

from .evaluate import GoldLabel
from .gateway import ScoutReport
from .inventory import CAMERAS, Box, Detection, ObjectInventory, detection_to_payload
from .schema import ScenarioDNA, dna_from_payload
from .verifier import OBJECT_LEXICON

logger = logging.getLogger(__name__)

IMAGE_W = 1280
IMAGE_H = 720

# Fields the mock scouts may corrupt with phantom objects.
_HALLUCINATION_FIELDS = ("blocking_factor", "special_agent_class")

# 1x1 black PNG; stands in for camera frames when a test needs real files.
_TINY_PNG = base64.b64decode(
    "iVBORw0KGgoAAAANSUhEUgAAAAEAAAABCAYAAAAfFcSJAAAADUlEQVR42mNk"
    "YPhfDwAChwGA60e6kgAAAABJRU5ErkJggg=="
)


@dataclass(frozen=True)
class NoiseProfile:
    hallucination_rate: float = 0.0
    omission_rate: float = 0.0
    risk_jitter_sd: float = 0.0

    def __post_init__(self):
        for name in ("hallucination_rate", "omission_rate"):
            value = getattr(self, name)
            if not (0.0 <= value <= 1.0):
                raise ValueError(f"{name} must be in [0, 1]")
        if self.risk_jitter_sd < 0:
            raise ValueError("risk_jitter_sd must be >= 0")


@dataclass(frozen=True)
class SyntheticFrame:
    frame_id: str
    scene_id: str
    truth: ScenarioDNA
    category: str
    detections: tuple[Detection, ...]


@dataclass(frozen=True)
class SyntheticWorld:
    seed: int
    frames: tuple[SyntheticFrame, ...]

    def truth_by_frame(self) -> dict[str, ScenarioDNA]:
        return {f.frame_id: f.truth for f in self.frames}

    def gold_labels(self) -> dict[str, GoldLabel]:
        return {
            f.frame_id: GoldLabel(
                frame_id=f.frame_id,
                dna=f.truth,
                category=f.category,
                annotator="synthetic",
                verified_at="1970-01-01T00:00:00Z",
            )
            for f in self.frames
        }


def _payload_skeleton() -> dict:
    return {
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
            "adjacent_vehicle_behavior": "nominal",
            "special_agent_class": "none",
        },
        "scenario_criticality": {
            "primary_challenge": "none",
            "ego_required_action": "lane_keep",
            "blocking_factor": "none",
            "risk_score": 1,
        },
        "wod_e2e_tags": [],
        "description": "",
    }


def _detection(frame_id: str, rng: random.Random, class_name: str,
               camera: str | None = None, lo: float = 0.55, hi: float = 0.95) -> Detection:
    camera = camera or rng.choice(CAMERAS)
    w = round(rng.uniform(40, 300), 1)
    h = round(rng.uniform(40, 200), 1)
    x = round(rng.uniform(0, IMAGE_W - w), 1)
    y = round(rng.uniform(0, IMAGE_H - h), 1)
    conf = round(rng.uniform(lo, hi), 2)
    return Detection(
        frame_id=frame_id,
        camera=camera,
        class_name=class_name,
        confidence=conf,
        box=Box(x, y, w, h),
        image_w=IMAGE_W,
        image_h=IMAGE_H,
    )


def _construction(frame_id: str, i: int, rng: random.Random, payload: dict) -> tuple[str, list[Detection]]:
    payload["odd_attributes"]["weather"] = rng.choice(["clear", "overcast"])
    payload["road_topology"].update(
        scene_type="construction_zone",
        lane_configuration=rng.choice(["merge_right", "merge_left"]),
        drivable_area_status="restricted_by_static_obstacle",
    )
    payload["scenario_criticality"].update(
        primary_challenge="violation_of_map_topology",
        ego_required_action="nudge_around_static_obstacle",
        blocking_factor="construction_barrier",
        risk_score=rng.randint(6, 8),
    )
    payload["wod_e2e_tags"] = ["construction", "lane_diversion"]
    payload["description"] = f"Construction taper closing a lane near marker {i}."
    dets = [_detection(frame_id, rng, "orange drum", "FRONT_LEFT")
            for _ in range(rng.randint(2, 4))]
    dets.append(_detection(frame_id, rng, "traffic cone", "FRONT_LEFT"))
    if rng.random() < 0.5:
        payload["key_interacting_agents"]["vru_status"] = "roadside_static"
        dets.append(_detection(frame_id, rng, "construction worker", "FRONT_CENTER"))
    if rng.random() < 0.3:
        payload["key_interacting_agents"]["special_agent_class"] = "construction_machinery"
        dets.append(_detection(frame_id, rng, "excavator"))
    return "construction", dets


def _vru(frame_id: str, i: int, rng: random.Random, payload: dict) -> tuple[str, list[Detection]]:
    cyclist = rng.random() < 0.3
    payload["road_topology"]["scene_type"] = rng.choice(["urban_street", "intersection"])
    if payload["road_topology"]["scene_type"] == "intersection":
        payload["road_topology"]["lane_configuration"] = "intersection_4way"
        payload["road_topology"]["traffic_controls"] = [rng.choice(["red_light", "green_light"])]
    if cyclist:
        payload["key_interacting_agents"]["vru_status"] = "cyclist_in_lane"
        payload["scenario_criticality"].update(
            primary_challenge="prediction_uncertainty",
            ego_required_action="slow_down",
            risk_score=rng.randint(5, 7),
        )
        payload["description"] = f"Cyclist holding the lane ahead of ego at site {i}."
        dets = [_detection(frame_id, rng, "bicyclist", "FRONT_CENTER")]
    else:
        status = rng.choice(["legal_crossing", "jaywalking_hesitant", "jaywalking_fast"])
        payload["key_interacting_agents"]["vru_status"] = status
        payload["scenario_criticality"].update(
            primary_challenge="occlusion_risk",
            ego_required_action=rng.choice(["stop", "yield"]),
            blocking_factor="pedestrian",
            risk_score=rng.randint(6, 9),
        )
        payload["description"] = f"Pedestrian crossing conflict in front of ego at site {i}."
        dets = [_detection(frame_id, rng, rng.choice(["person", "pedestrian"]), "FRONT_CENTER")
                for _ in range(rng.randint(1, 2))]
    payload["wod_e2e_tags"] = ["vru_hazard"]
    return "vru_hazard", dets


def _special_vehicle(frame_id: str, i: int, rng: random.Random, payload: dict) -> tuple[str, list[Detection]]:
    agent = rng.choice(["police_car", "ambulance", "fire_truck", "school_bus"])
    detector_class = {"police_car": "police car", "ambulance": "ambulance",
                      "fire_truck": "fire truck", "school_bus": "school bus"}[agent]
    payload["road_topology"]["scene_type"] = rng.choice(["urban_street", "highway"])
    payload["key_interacting_agents"]["special_agent_class"] = agent
    payload["scenario_criticality"].update(
        primary_challenge="rule_violation",
        ego_required_action=rng.choice(["yield", "slow_down"]),
        risk_score=rng.randint(4, 7),
    )
    payload["wod_e2e_tags"] = ["special_vehicle"]
    payload["description"] = f"Active {agent.replace('_', ' ')} near ego at site {i}."
    return "special_vehicle", [_detection(frame_id, rng, detector_class)]


def _debris(frame_id: str, i: int, rng: random.Random, payload: dict) -> tuple[str, list[Detection]]:
    payload["road_topology"]["scene_type"] = rng.choice(["highway", "rural_road"])
    payload["scenario_criticality"].update(
        ego_required_action=rng.choice(["nudge_around_static_obstacle", "lane_change"]),
        blocking_factor="debris",
        risk_score=rng.randint(3, 6),
    )
    payload["wod_e2e_tags"] = ["fod_debris"]
    payload["description"] = f"Road debris in the travel lane at site {i}."
    cls = rng.choice(["tire", "cardboard box", "tree branch"])
    return "fod_debris", [_detection(frame_id, rng, cls, "FRONT_CENTER")]


def _weather(frame_id: str, i: int, rng: random.Random, payload: dict) -> tuple[str, list[Detection]]:
    weather = rng.choice(["rain", "heavy_rain", "fog", "snow"])
    payload["odd_attributes"].update(
        weather=weather,
        road_surface_friction="snowy" if weather == "snow" else "wet",
    )
    if rng.random() < 0.4:
        payload["odd_attributes"]["sensor_integrity"] = "droplets_on_lens"
    payload["scenario_criticality"].update(
        primary_challenge="perception_degradation",
        ego_required_action="slow_down",
        risk_score=rng.randint(3, 5),
    )
    payload["wod_e2e_tags"] = ["weather_adverse"]
    payload["description"] = f"Degraded visibility driving through {weather.replace('_', ' ')} at site {i}."
    return "adverse_weather", [_detection(frame_id, rng, "car")
                               for _ in range(rng.randint(1, 2))]


def _nominal(frame_id: str, i: int, rng: random.Random, payload: dict) -> tuple[str, list[Detection]]:
    payload["scenario_criticality"]["risk_score"] = rng.randint(0, 2)
    payload["description"] = f"Nominal traffic flow at site {i}."
    return "nominal", [_detection(frame_id, rng, "car") for _ in range(rng.randint(1, 3))]


_ARCHETYPES = (
    (_construction, 20),
    (_vru, 20),
    (_special_vehicle, 15),
    (_debris, 15),
    (_weather, 15),
    (_nominal, 15),
)


def generate_world(n_frames: int, seed: int) -> SyntheticWorld:
    """n one-frame scenes; truth object fields always have detector support."""
    frames = []
    builders = [b for b, _ in _ARCHETYPES]
    weights = [w for _, w in _ARCHETYPES]
    for i in range(n_frames):
        rng = random.Random(f"{seed}:world:{i}")
        frame_id = f"frame_{i:04d}"
        payload = _payload_skeleton()
        builder = rng.choices(builders, weights=weights, k=1)[0]
        category, dets = builder(frame_id, i, rng, payload)
        # Below-threshold distractors exercise the recall filter.
        for _ in range(rng.randint(0, 2)):
            dets.append(_detection(frame_id, rng, "plastic bag", lo=0.05, hi=0.14))
        frames.append(
            SyntheticFrame(
                frame_id=frame_id,
                scene_id=f"scene_{i:04d}",
                truth=dna_from_payload(payload),
                category=category,
                detections=tuple(dets),
            )
        )
    return SyntheticWorld(seed=seed, frames=tuple(frames))


def write_world(world: SyntheticWorld, out_dir: str | Path, write_images: bool = False) -> dict[str, Path]:
    """Materialize manifest/detections/gold JSONL files (and stub images)."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    manifest_path = out / "manifest.jsonl"
    detections_path = out / "detections.jsonl"
    gold_path = out / "gold.jsonl"
    image_dir = out / "images"
    with open(manifest_path, "w", encoding="utf-8") as mh:
        for frame in world.frames:
            paths = {
                "front_left": str(image_dir / f"{frame.frame_id}_left.png"),
                "front_center": str(image_dir / f"{frame.frame_id}_center.png"),
                "front_right": str(image_dir / f"{frame.frame_id}_right.png"),
            }
            mh.write(json.dumps({
                "frame_id": frame.frame_id,
                "scene_id": frame.scene_id,
                "keyframe_slot": "start",
                "image_paths": paths,
            }) + "\n")
            if write_images:
                image_dir.mkdir(exist_ok=True)
                for p in paths.values():
                    Path(p).write_bytes(_TINY_PNG)
    with open(detections_path, "w", encoding="utf-8") as dh:
        for frame in world.frames:
            for det in frame.detections:
                dh.write(json.dumps(detection_to_payload(det)) + "\n")
    with open(gold_path, "w", encoding="utf-8") as gh:
        for frame in world.frames:
            gh.write(json.dumps(world.gold_labels()[frame.frame_id].to_payload()) + "\n")
    return {"manifest": manifest_path, "detections": detections_path, "gold": gold_path}


def _hallucination_pool(field: str, truth_value: str, inventory_classes: frozenset[str],
                        scout_index: int, n_scouts: int) -> list[str]:
    supported = {
        value
        for value, classes in OBJECT_LEXICON[field].items()
        if classes & inventory_classes
    }
    pool = sorted(set(OBJECT_LEXICON[field]) - {truth_value} - supported)
    return pool[scout_index::n_scouts]


def synth_scout(
    frame_truth: GoldLabel,
    inventory: ObjectInventory,
    noise: NoiseProfile,
    seed: int,
    scout_name: str = "synth-0",
    scout_index: int = 0,
    n_scouts: int = 1,
    tokens_per_s: float = 60.0,
) -> ScoutReport:
    """Deterministic mock report: truth corrupted per the noise profile.

    With probability hallucination_rate per object field, the truth value is
    replaced by a value neither the inventory nor the truth supports; with
    omission_rate one true tag is dropped; risk gets rounded Gaussian jitter
    clamped to [0, 10]. Timing is derived (latency = tokens / throughput) so
    the density reconstruction identity holds exactly.
    """
    rng = random.Random(f"{seed}:{scout_name}:{frame_truth.frame_id}")
    payload = frame_truth.dna.to_payload()
    inventory_classes = inventory.mapped_classes()

    hallucinated: list[str] = []
    for field in _HALLUCINATION_FIELDS:
        if rng.random() >= noise.hallucination_rate:
            continue
        group = "scenario_criticality" if field == "blocking_factor" else "key_interacting_agents"
        pool = _hallucination_pool(
            field, payload[group][field], inventory_classes, scout_index, n_scouts
        )
        if not pool:
            continue
        payload[group][field] = rng.choice(pool)
        hallucinated.append(field)

    if payload["wod_e2e_tags"] and rng.random() < noise.omission_rate:
        dropped = rng.choice(sorted(payload["wod_e2e_tags"]))
        payload["wod_e2e_tags"] = [t for t in payload["wod_e2e_tags"] if t != dropped]

    risk = payload["scenario_criticality"]["risk_score"]
    if noise.risk_jitter_sd > 0:
        risk = max(0, min(10, risk + round(rng.gauss(0, noise.risk_jitter_sd))))
        payload["scenario_criticality"]["risk_score"] = risk

    dna = dna_from_payload(payload)
    completion_tokens = 500 + 40 * risk + rng.randrange(40)
    latency_s = completion_tokens / tokens_per_s
    trace_bits = [f"Swept {len(inventory.entries)} detections across three cameras."]
    if hallucinated:
        trace_bits.append(f"Uncertain about {', '.join(hallucinated)}.")
    trace_bits.append(f"Assessed risk {risk}.")
    return ScoutReport(
        frame_id=frame_truth.frame_id,
        scout_name=scout_name,
        reasoning_trace=" ".join(trace_bits),
        dna=dna,
        parse_failure=None,
        latency_s=latency_s,
        completion_tokens=completion_tokens,
        tokens_per_s=tokens_per_s,
    )


@dataclass(frozen=True)
class MockScoutProfile:
    name: str
    tokens_per_s: float


DEFAULT_MOCK_SCOUTS = (
    MockScoutProfile("scout-a", 99.5),
    MockScoutProfile("scout-b", 36.3),
    MockScoutProfile("scout-c", 60.0),
)


def mock_scout_reports(
    frame_truth: GoldLabel,
    inventory: ObjectInventory,
    noise: NoiseProfile,
    seed: int,
    profiles: Sequence[MockScoutProfile] = DEFAULT_MOCK_SCOUTS,
) -> list[ScoutReport]:
    return [
        synth_scout(
            frame_truth,
            inventory,
            noise,
            seed,
            scout_name=profile.name,
            scout_index=i,
            n_scouts=len(profiles),
            tokens_per_s=profile.tokens_per_s,
        )
        for i, profile in enumerate(profiles)
    ]
