"""HTTP API backing the curation frontend.

Read side serves a snapshot of the mined index joined with the per-frame
audit logs (inventory text, candidate scores, scout traces). Write side is
one endpoint: committing a human-verified gold label, validated by the same
schema gate the pipeline uses; a rejected label answers 422 with the full
violation report so the client can render errors field by field.
"""

from __future__ import annotations

import base64
import json
import logging
import mimetypes
from dataclasses import replace
from datetime import datetime, timezone
from pathlib import Path

from fastapi import Body, FastAPI, HTTPException, Query as QueryParam
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import FileResponse

from .config import PipelineConfig
from .evaluate import GoldLabel, append_gold, derive_category, gold_from_payload, load_gold
from .index import SemanticIndex
from .pipeline import EPOCH_TIMESTAMP
from .schema import (
    GROUP_FIELDS,
    VOCAB,
    VOCAB_VERSION,
    ValidationError,
    validate_payload,
)

logger = logging.getLogger(__name__)

_CAMERA_KEYS = ("front_left", "front_center", "front_right")


def _load_audit(run_dir: str | Path) -> tuple[dict[str, dict], dict[str, list[dict]]]:
    """candidates.jsonl and reports.jsonl keyed by frame_id; last line wins."""
    candidates: dict[str, dict] = {}
    reports: dict[str, list[dict]] = {}
    run = Path(run_dir)
    cpath = run / "candidates.jsonl"
    if cpath.exists():
        with open(cpath, encoding="utf-8") as handle:
            for line in handle:
                if not line.strip():
                    continue
                try:
                    row = json.loads(line)
                    candidates[row["frame_id"]] = row
                except (json.JSONDecodeError, KeyError):
                    continue
    rpath = run / "reports.jsonl"
    if rpath.exists():
        with open(rpath, encoding="utf-8") as handle:
            for line in handle:
                if not line.strip():
                    continue
                try:
                    row = json.loads(line)
                    reports.setdefault(row["frame_id"], []).append(row)
                except (json.JSONDecodeError, KeyError):
                    continue
    return candidates, reports


def create_app(config: PipelineConfig) -> FastAPI:
    app = FastAPI(title="scenemine curation API")
    # The curator UI is a static page on another port; this is a local tool.
    app.add_middleware(
        CORSMiddleware, allow_origins=["*"], allow_methods=["*"], allow_headers=["*"]
    )
    index = SemanticIndex(config.paths.index)
    gold: dict[str, GoldLabel] = (
        load_gold(config.paths.gold) if Path(config.paths.gold).exists() else {}
    )
    audit_candidates, audit_reports = _load_audit(config.paths.run_dir)

    def _frame_summary(frame_id: str) -> dict:
        record = index.get(frame_id)
        return {
            "frame_id": record.frame_id,
            "scene_id": record.scene_id,
            "risk_score": record.dna.scenario_criticality.risk_score,
            "tags": sorted(record.dna.wod_e2e_tags),
            "description": record.dna.description,
            "verified": frame_id in gold,
            "flagged": bool(record.flagged_for_review),
        }

    @app.get("/health")
    def health() -> dict:
        return {"ok": True, "frames": len(index)}

    @app.get("/vocab")
    def vocab() -> dict:
        return {
            "version": VOCAB_VERSION,
            "groups": {group: list(names) for group, names in GROUP_FIELDS.items()},
            "fields": {name: list(values) for name, values in VOCAB.items()},
            "risk_range": [0, 10],
        }

    @app.get("/stats")
    def stats() -> dict:
        return index.stats()

    @app.get("/frames")
    def frames(
        page: int = QueryParam(1, ge=1),
        page_size: int = QueryParam(50, ge=1, le=500),
        verified: bool | None = None,
    ) -> dict:
        ids = index.frame_ids()
        if verified is not None:
            ids = [fid for fid in ids if (fid in gold) == verified]
        total = len(ids)
        start = (page - 1) * page_size
        subset = ids[start : start + page_size]
        return {
            "page": page,
            "page_size": page_size,
            "total": total,
            "frames": [_frame_summary(fid) for fid in subset],
        }

    def _record_or_404(frame_id: str):
        record = index.get(frame_id)
        if record is None:
            raise HTTPException(status_code=404, detail=f"unknown frame {frame_id}")
        return record

    @app.get("/frames/{frame_id}")
    def frame_detail(frame_id: str) -> dict:
        record = _record_or_404(frame_id)
        audit = audit_candidates.get(frame_id, {})
        image_paths = audit.get("image_paths", {})
        traces = [
            {
                "scout_name": r.get("scout_name", ""),
                "reasoning_trace": r.get("reasoning_trace", ""),
                "risk_score": (r.get("dna") or {}).get("scenario_criticality", {}).get("risk_score"),
                "parse_failed": r.get("dna") is None,
            }
            for r in audit_reports.get(frame_id, [])
        ]
        return {
            "frame_id": record.frame_id,
            "scene_id": record.scene_id,
            "dna": record.dna.to_payload(),
            "winner_score": record.winner_score.to_payload(),
            "flagged_for_review": list(record.flagged_for_review),
            "created_at": record.created_at,
            "inventory_text": audit.get("inventory_text", ""),
            "candidates": audit.get("candidates", []),
            "candidate_scores": audit.get("scores", []),
            "winner_index": audit.get("winner_index", 0),
            "candidate_source": audit.get("source", "deterministic"),
            "scout_traces": traces,
            "images": {
                cam: f"/frames/{frame_id}/image/{cam}"
                for cam in _CAMERA_KEYS
                if image_paths.get(cam)
            },
            "verified": frame_id in gold,
            "gold": gold[frame_id].to_payload() if frame_id in gold else None,
        }

    @app.get("/frames/{frame_id}/image/{camera}")
    def frame_image(frame_id: str, camera: str):
        _record_or_404(frame_id)
        if camera not in _CAMERA_KEYS:
            raise HTTPException(status_code=404, detail=f"unknown camera {camera}")
        audit = audit_candidates.get(frame_id, {})
        path = audit.get("image_paths", {}).get(camera)
        if not path or not Path(path).exists():
            raise HTTPException(status_code=404, detail="image file not available")
        media_type = mimetypes.guess_type(path)[0] or "application/octet-stream"
        return FileResponse(path, media_type=media_type)

    @app.post("/frames/{frame_id}/gold")
    def submit_gold(frame_id: str, payload: dict = Body(...)) -> dict:
        _record_or_404(frame_id)
        dna_payload = payload.get("dna")
        if not isinstance(dna_payload, dict):
            raise HTTPException(status_code=422, detail={
                "valid": False,
                "violations": [{
                    "path": "dna",
                    "offending_value": "<missing>",
                    "expected": "dna object",
                }],
            })
        report = validate_payload(dna_payload)
        if not report.valid:
            raise HTTPException(status_code=422, detail=report.to_payload())
        verified_at = (
            EPOCH_TIMESTAMP
            if config.deterministic_timestamps
            else datetime.now(timezone.utc).isoformat().replace("+00:00", "Z")
        )
        try:
            label = gold_from_payload({
                "frame_id": frame_id,
                "dna": dna_payload,
                "category": payload.get("category", ""),
                "annotator": payload.get("annotator", "anonymous"),
                "verified_at": verified_at,
            })
        except ValidationError as exc:
            raise HTTPException(status_code=422, detail=exc.report.to_payload())
        if not label.category:
            label = replace(label, category=derive_category(label.dna))
        append_gold(config.paths.gold, label)
        gold[frame_id] = label
        logger.info("gold committed for %s by %s", frame_id, label.annotator)
        return {"ok": True, "frame_id": frame_id, "verified": True}

    return app


def serve_api(config: PipelineConfig, host: str = "127.0.0.1", port: int = 8787) -> None:
    import uvicorn

    uvicorn.run(create_app(config), host=host, port=port, log_level="info")


def image_data_url(path: str | Path) -> str:
    """Small helper for clients that want inline images instead of URLs."""
    p = Path(path)
    media_type = mimetypes.guess_type(str(p))[0] or "image/png"
    return f"data:{media_type};base64," + base64.b64encode(p.read_bytes()).decode("ascii")
