"""Pipeline configuration: one YAML file, every algorithm constant a key.

Experiments are config diffs. Each constant surfaces with its shipped
default (recall floor 0.15, reward weights 2/3/10, 3 candidates, 3 keyframes
per scene), so a config file only needs the keys it changes. Endpoint URLs
can be overridden by environment variables so secrets stay out of files.
"""

from __future__ import annotations

import logging
import os
from dataclasses import dataclass, replace
from pathlib import Path

import yaml

from .gateway import ScoutConfig
from .inventory import DEFAULT_TAU_RECALL
from .synthetic import DEFAULT_MOCK_SCOUTS, MockScoutProfile, NoiseProfile
from .verifier import RewardWeights

logger = logging.getLogger(__name__)

ENV_SCOUT_ENDPOINT = "SCENEMINE_SCOUT_ENDPOINT"
ENV_JUDGE_ENDPOINT = "SCENEMINE_JUDGE_ENDPOINT"

DEFAULT_KEYFRAMES_PER_SCENE = 3
DEFAULT_N_CANDIDATES = 3


class ConfigError(Exception):
    """Configuration file is unusable; aborts before any work."""


@dataclass(frozen=True)
class Paths:
    manifest: str = "manifest.jsonl"
    detections: str = "detections.jsonl"
    index: str = "index.jsonl"
    gold: str = "gold.jsonl"
    run_dir: str = "run"


@dataclass(frozen=True)
class MockSettings:
    seed: int = 0
    noise: NoiseProfile = NoiseProfile()
    scouts: tuple[MockScoutProfile, ...] = DEFAULT_MOCK_SCOUTS


@dataclass(frozen=True)
class PipelineConfig:
    tau_recall: float = DEFAULT_TAU_RECALL
    weights: RewardWeights = RewardWeights()
    n_candidates: int = DEFAULT_N_CANDIDATES
    keyframes_per_scene: int = DEFAULT_KEYFRAMES_PER_SCENE
    indicator_mode: str = "binary"
    frame_workers: int = 1
    scout_workers: int = 3
    deterministic_timestamps: bool = False
    mode: str = "mock"  # "mock" or "live"
    baseline: str | None = None  # "single_scout_no_verifier" bypasses the gate
    paths: Paths = Paths()
    scouts: tuple[ScoutConfig, ...] = ()
    judge: ScoutConfig | None = None  # None = deterministic consensus only
    mock: MockSettings = MockSettings()

    def __post_init__(self):
        if self.n_candidates < 1:
            raise ConfigError("n_candidates must be >= 1")
        if self.keyframes_per_scene < 1:
            raise ConfigError("keyframes_per_scene must be >= 1")
        if self.frame_workers < 1 or self.scout_workers < 1:
            raise ConfigError("worker counts must be >= 1")
        if self.mode not in ("mock", "live"):
            raise ConfigError(f"unknown mode {self.mode!r}")
        if self.baseline not in (None, "single_scout_no_verifier"):
            raise ConfigError(f"unknown baseline {self.baseline!r}")
        if self.indicator_mode not in ("binary", "count"):
            raise ConfigError(f"unknown indicator_mode {self.indicator_mode!r}")
        if self.mode == "live" and not self.scouts:
            raise ConfigError("live mode requires at least one scout")
        if self.mode == "mock" and not self.mock.scouts:
            raise ConfigError("mock mode requires at least one mock scout profile")


def _scout_from_dict(raw: dict, role: str) -> ScoutConfig:
    try:
        return ScoutConfig(
            name=raw["name"],
            endpoint_url=raw["endpoint_url"],
            model_id=raw["model_id"],
            temperature=float(raw.get("temperature", ScoutConfig.temperature)),
            max_tokens=int(raw.get("max_tokens", ScoutConfig.max_tokens)),
            timeout_s=float(raw.get("timeout_s", ScoutConfig.timeout_s)),
            role=role,
            retries=int(raw.get("retries", ScoutConfig.retries)),
            backoff_s=float(raw.get("backoff_s", ScoutConfig.backoff_s)),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"bad {role} entry {raw!r}: {exc}") from exc


def config_from_dict(raw: dict) -> PipelineConfig:
    try:
        weights_raw = raw.get("weights", {})
        weights = RewardWeights(
            alpha=float(weights_raw.get("alpha", RewardWeights.alpha)),
            beta=float(weights_raw.get("beta", RewardWeights.beta)),
            gamma=float(weights_raw.get("gamma", RewardWeights.gamma)),
        )
        paths_raw = raw.get("paths", {})
        paths = Paths(
            manifest=str(paths_raw.get("manifest", Paths.manifest)),
            detections=str(paths_raw.get("detections", Paths.detections)),
            index=str(paths_raw.get("index", Paths.index)),
            gold=str(paths_raw.get("gold", Paths.gold)),
            run_dir=str(paths_raw.get("run_dir", Paths.run_dir)),
        )
        mock_raw = raw.get("mock", {})
        noise_raw = mock_raw.get("noise", {})
        mock = MockSettings(
            seed=int(mock_raw.get("seed", 0)),
            noise=NoiseProfile(
                hallucination_rate=float(noise_raw.get("hallucination_rate", 0.0)),
                omission_rate=float(noise_raw.get("omission_rate", 0.0)),
                risk_jitter_sd=float(noise_raw.get("risk_jitter_sd", 0.0)),
            ),
            scouts=tuple(
                MockScoutProfile(name=str(s["name"]), tokens_per_s=float(s["tokens_per_s"]))
                for s in mock_raw.get("scouts", [])
            )
            or DEFAULT_MOCK_SCOUTS,
        )
        judge_raw = raw.get("judge")
        judge = None
        if isinstance(judge_raw, dict):
            judge = _scout_from_dict(judge_raw, "judge")
        elif judge_raw not in (None, "deterministic"):
            raise ConfigError(f"judge must be a mapping or 'deterministic', got {judge_raw!r}")
        return PipelineConfig(
            tau_recall=float(raw.get("tau_recall", DEFAULT_TAU_RECALL)),
            weights=weights,
            n_candidates=int(raw.get("n_candidates", DEFAULT_N_CANDIDATES)),
            keyframes_per_scene=int(raw.get("keyframes_per_scene", DEFAULT_KEYFRAMES_PER_SCENE)),
            indicator_mode=str(raw.get("indicator_mode", "binary")),
            frame_workers=int(raw.get("frame_workers", 1)),
            scout_workers=int(raw.get("scout_workers", 3)),
            deterministic_timestamps=bool(raw.get("deterministic_timestamps", False)),
            mode=str(raw.get("mode", "mock")),
            baseline=raw.get("baseline"),
            paths=paths,
            scouts=tuple(_scout_from_dict(s, "scout") for s in raw.get("scouts", [])),
            judge=judge,
            mock=mock,
        )
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc


def apply_env_overrides(config: PipelineConfig) -> PipelineConfig:
    scout_url = os.environ.get(ENV_SCOUT_ENDPOINT)
    judge_url = os.environ.get(ENV_JUDGE_ENDPOINT)
    scouts = config.scouts
    judge = config.judge
    if scout_url:
        scouts = tuple(replace(s, endpoint_url=scout_url) for s in scouts)
        logger.info("scout endpoints overridden from %s", ENV_SCOUT_ENDPOINT)
    if judge_url and judge is not None:
        judge = replace(judge, endpoint_url=judge_url)
        logger.info("judge endpoint overridden from %s", ENV_JUDGE_ENDPOINT)
    if scouts is config.scouts and judge is config.judge:
        return config
    return replace(config, scouts=scouts, judge=judge)


def load_config(path: str | Path) -> PipelineConfig:
    """Parse, validate, and env-override a YAML config file."""
    p = Path(path)
    if not p.exists():
        raise ConfigError(f"config file not found: {p}")
    try:
        raw = yaml.safe_load(p.read_text()) or {}
    except yaml.YAMLError as exc:
        raise ConfigError(f"config file is not valid YAML: {exc}") from exc
    if not isinstance(raw, dict):
        raise ConfigError("config root must be a mapping")
    config = config_from_dict(raw)
    # Relative paths resolve against the config file's directory.
    base = p.parent
    paths = Paths(
        manifest=_resolve(base, config.paths.manifest),
        detections=_resolve(base, config.paths.detections),
        index=_resolve(base, config.paths.index),
        gold=_resolve(base, config.paths.gold),
        run_dir=_resolve(base, config.paths.run_dir),
    )
    return apply_env_overrides(replace(config, paths=paths))


def _resolve(base: Path, value: str) -> str:
    return value if Path(value).is_absolute() else str(base / value)
