"""Local-first scenario mining: detections and model reports in, validated
queryable scenario records out.

The public surface re-exports the pieces a library consumer needs: the
record schema and its validators, inventory construction, the reward
verifier, consensus, the index store, the evaluation harness, and the
pipeline runners.
"""

from .config import PipelineConfig, load_config
from .consensus import CandidateSet, ConsensusResult, deterministic_consensus
from .evaluate import (
    EvalReport,
    GoldLabel,
    estimate_cost,
    micro_prf,
    per_class_prf,
    reasoning_density,
    risk_mae,
)
from .gateway import ScoutConfig, ScoutReport, build_scout_prompt, parse_scout_response
from .index import IndexRecord, Query, SemanticIndex
from .inventory import (
    Detection,
    ObjectInventory,
    build_inventory,
    bucket_size,
    compute_relative_size,
    filter_detections,
    render_inventory,
)
from .pipeline import RunSummary, run_eval, run_mine
from .schema import (
    ParseError,
    ScenarioDNA,
    ValidationError,
    ValidationReport,
    parse_dna,
    serialize_dna,
    validate_dna,
)
from .synthetic import NoiseProfile, SyntheticWorld, generate_world, synth_scout
from .verifier import (
    CandidateScore,
    RewardWeights,
    score_candidate,
    select_best,
)

__version__ = "0.1.0"

__all__ = [
    "CandidateScore",
    "CandidateSet",
    "ConsensusResult",
    "Detection",
    "EvalReport",
    "GoldLabel",
    "IndexRecord",
    "NoiseProfile",
    "ObjectInventory",
    "ParseError",
    "PipelineConfig",
    "Query",
    "RewardWeights",
    "RunSummary",
    "ScenarioDNA",
    "ScoutConfig",
    "ScoutReport",
    "SemanticIndex",
    "SyntheticWorld",
    "ValidationError",
    "ValidationReport",
    "build_inventory",
    "build_scout_prompt",
    "bucket_size",
    "compute_relative_size",
    "deterministic_consensus",
    "estimate_cost",
    "filter_detections",
    "generate_world",
    "load_config",
    "micro_prf",
    "parse_dna",
    "parse_scout_response",
    "per_class_prf",
    "reasoning_density",
    "render_inventory",
    "risk_mae",
    "run_eval",
    "run_mine",
    "score_candidate",
    "select_best",
    "serialize_dna",
    "synth_scout",
    "validate_dna",
]
