"""Evaluation harness: category P/R/F1, risk error, latency economics.

Category presence is decided by a shipped predicate map over the DNA record
(data, not code), so the tracked category set is explicit and the report can
print it. A frame missing from predictions counts as a miss for every gold
positive category; silent exclusion would inflate recall.
"""

from __future__ import annotations

import csv
import json
import logging
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Any, Mapping, Sequence

from .schema import ScenarioDNA, ValidationError, dna_from_payload, validate_payload

logger = logging.getLogger(__name__)

DEFAULT_POWER_W = 350.0
DEFAULT_PRICE_PER_KWH = 0.15


def _load_categories() -> dict[str, dict]:
    return json.loads(resources.files("scenemine.data").joinpath("categories.json").read_text())


#: category -> {"any": [[field, op, value], ...]}; a record is a positive for
#: the category when any clause holds.
CATEGORY_PREDICATES: dict[str, dict] = _load_categories()
CATEGORIES: tuple[str, ...] = tuple(sorted(CATEGORY_PREDICATES))


@dataclass(frozen=True)
class GoldLabel:
    frame_id: str
    dna: ScenarioDNA
    category: str
    annotator: str
    verified_at: str

    def to_payload(self) -> dict:
        return {
            "frame_id": self.frame_id,
            "dna": self.dna.to_payload(),
            "category": self.category,
            "annotator": self.annotator,
            "verified_at": self.verified_at,
        }


def gold_from_payload(payload: Mapping[str, Any]) -> GoldLabel:
    report = validate_payload(payload["dna"])
    if not report.valid:
        raise ValidationError(report)
    return GoldLabel(
        frame_id=str(payload["frame_id"]),
        dna=dna_from_payload(payload["dna"]),
        category=str(payload.get("category", "nominal")),
        annotator=str(payload.get("annotator", "")),
        verified_at=str(payload.get("verified_at", "")),
    )


def load_gold(path: str | Path) -> dict[str, GoldLabel]:
    labels: dict[str, GoldLabel] = {}
    with open(path, encoding="utf-8") as handle:
        for lineno, line in enumerate(handle, start=1):
            if not line.strip():
                continue
            try:
                label = gold_from_payload(json.loads(line))
            except (json.JSONDecodeError, KeyError, TypeError, ValueError, ValidationError) as exc:
                logger.warning("%s:%d skipped bad gold line: %s", path, lineno, exc)
                continue
            labels[label.frame_id] = label  # later lines win: re-verification
    return labels


def append_gold(path: str | Path, label: GoldLabel) -> None:
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    with open(path, "a", encoding="utf-8") as handle:
        handle.write(json.dumps(label.to_payload(), ensure_ascii=False) + "\n")
        handle.flush()


def _clause_holds(dna: ScenarioDNA, clause: Sequence) -> bool:
    name, op, value = clause
    if name == "tags":
        if op != "contains":
            raise ValueError(f"unsupported tags op {op!r}")
        return value in dna.wod_e2e_tags
    actual = dna.field_value(name)
    if op == "eq":
        return actual == value
    if op == "ne":
        return actual != value
    if op == "in":
        return actual in value
    raise ValueError(f"unsupported op {op!r}")


def category_present(dna: ScenarioDNA, category: str) -> bool:
    predicate = CATEGORY_PREDICATES[category]
    return any(_clause_holds(dna, clause) for clause in predicate["any"])


def derive_category(dna: ScenarioDNA) -> str:
    """First tracked category the record satisfies; "nominal" when none."""
    for category in CATEGORIES:
        if category_present(dna, category):
            return category
    return "nominal"


@dataclass(frozen=True)
class PrfCounts:
    tp: int = 0
    fp: int = 0
    fn: int = 0

    def rates(self) -> dict[str, float]:
        precision = self.tp / (self.tp + self.fp) if self.tp + self.fp else 0.0
        recall = self.tp / (self.tp + self.fn) if self.tp + self.fn else 0.0
        return {
            "precision": precision,
            "recall": recall,
            "f1": f1_score(precision, recall),
            "tp": self.tp,
            "fp": self.fp,
            "fn": self.fn,
        }


def f1_score(precision: float, recall: float) -> float:
    if precision + recall == 0:
        return 0.0
    return 2 * precision * recall / (precision + recall)


def _count_prf(
    predictions: Mapping[str, ScenarioDNA], gold: Mapping[str, GoldLabel]
) -> tuple[dict[str, PrfCounts], list[str]]:
    """Frame-by-category counts over the gold set.

    Frames only present in predictions contribute nothing; frames only in
    gold contribute an FN per gold-positive category.
    """
    tallies = {category: [0, 0, 0] for category in CATEGORIES}
    missing = sorted(fid for fid in gold if fid not in predictions)
    for frame_id, label in gold.items():
        pred = predictions.get(frame_id)
        for category in CATEGORIES:
            in_gold = category_present(label.dna, category)
            in_pred = pred is not None and category_present(pred, category)
            tally = tallies[category]
            if in_gold and in_pred:
                tally[0] += 1
            elif in_pred:
                tally[1] += 1
            elif in_gold:
                tally[2] += 1
    per_class = {c: PrfCounts(*t) for c, t in tallies.items()}
    return per_class, missing


def micro_prf(
    predictions: Mapping[str, ScenarioDNA], gold: Mapping[str, GoldLabel]
) -> dict[str, float]:
    """Pool frame-by-category counts over all tracked categories."""
    per_class, _ = _count_prf(predictions, gold)
    total = PrfCounts(
        tp=sum(c.tp for c in per_class.values()),
        fp=sum(c.fp for c in per_class.values()),
        fn=sum(c.fn for c in per_class.values()),
    )
    return total.rates()


def per_class_prf(
    predictions: Mapping[str, ScenarioDNA], gold: Mapping[str, GoldLabel]
) -> dict[str, dict]:
    """Same counting per category; zero-gold categories omit recall/f1."""
    per_class, _ = _count_prf(predictions, gold)
    out: dict[str, dict] = {}
    for category in CATEGORIES:
        counts = per_class[category]
        rates = counts.rates()
        if counts.tp + counts.fn == 0:
            rates.pop("recall")
            rates.pop("f1")
            rates["note"] = "no gold positives; recall undefined"
        out[category] = rates
    return out


def risk_mae(pred_risks: Mapping[str, int], gold_risks: Mapping[str, int]) -> float:
    """Mean |pred - gold| over frames present on both sides."""
    shared = sorted(set(pred_risks) & set(gold_risks))
    if not shared:
        raise ValueError("no overlapping frame_ids between predictions and gold")
    return sum(abs(pred_risks[f] - gold_risks[f]) for f in shared) / len(shared)


def reasoning_density(latency_s: float, tokens_per_s: float) -> int:
    """Implied completion tokens: latency times throughput, nearest integer."""
    if latency_s < 0 or tokens_per_s < 0:
        raise ValueError("latency and throughput must be non-negative")
    return int(round(latency_s * tokens_per_s))


def estimate_cost(
    latency_s: float, power_w: float, price_per_kwh: float, n_frames: int
) -> float:
    """GPU energy cost of a batch: seconds -> kWh at the given wattage."""
    if latency_s < 0 or power_w < 0 or price_per_kwh < 0 or n_frames < 0:
        raise ValueError("inputs must be non-negative")
    return latency_s / 3600.0 * power_w / 1000.0 * price_per_kwh * n_frames


@dataclass(frozen=True)
class EvalReport:
    micro: dict
    per_class: dict
    risk_mae: float
    n_frames: int
    missing_frames: tuple[str, ...]
    categories: dict
    latency_stats: dict = field(default_factory=dict)
    density_stats: dict = field(default_factory=dict)
    cost_stats: dict = field(default_factory=dict)

    def to_payload(self) -> dict:
        return {
            "micro": self.micro,
            "per_class": self.per_class,
            "risk_mae": self.risk_mae,
            "n_frames": self.n_frames,
            "missing_frames": list(self.missing_frames),
            "categories": self.categories,
            "latency_stats": self.latency_stats,
            "density_stats": self.density_stats,
            "cost_stats": self.cost_stats,
        }


def evaluate_predictions(
    predictions: Mapping[str, ScenarioDNA],
    gold: Mapping[str, GoldLabel],
    scout_summaries: Mapping[str, Sequence] | None = None,
    power_w: float = DEFAULT_POWER_W,
    price_per_kwh: float = DEFAULT_PRICE_PER_KWH,
) -> EvalReport:
    """Full report against a gold set; scout_summaries feed the economics."""
    if not gold:
        raise ValueError("gold set is empty")
    micro = micro_prf(predictions, gold)
    per_class = per_class_prf(predictions, gold)
    _, missing = _count_prf(predictions, gold)
    if missing:
        logger.warning("%d gold frames missing from predictions: %s",
                       len(missing), ", ".join(missing[:10]))
    shared = set(predictions) & set(gold)
    mae = (
        risk_mae(
            {f: predictions[f].scenario_criticality.risk_score for f in shared},
            {f: gold[f].dna.scenario_criticality.risk_score for f in shared},
        )
        if shared
        else 0.0
    )

    latency_stats: dict = {}
    density_stats: dict = {}
    cost_stats: dict = {}
    if scout_summaries:
        by_scout: dict[str, list] = {}
        for summaries in scout_summaries.values():
            for s in summaries:
                by_scout.setdefault(s.scout_name, []).append(s)
        for scout_name in sorted(by_scout):
            rows = by_scout[scout_name]
            mean_latency = sum(r.latency_s for r in rows) / len(rows)
            mean_tokens = sum(r.completion_tokens for r in rows) / len(rows)
            tps = mean_tokens / mean_latency if mean_latency > 0 else 0.0
            latency_stats[scout_name] = {"mean_latency_s": mean_latency, "n": len(rows)}
            density_stats[scout_name] = {
                "mean_completion_tokens": mean_tokens,
                "implied_tokens": reasoning_density(mean_latency, tps),
            }
            cost_stats[scout_name] = {
                "per_1000_frames": estimate_cost(mean_latency, power_w, price_per_kwh, 1000),
                "power_w": power_w,
                "price_per_kwh": price_per_kwh,
            }

    return EvalReport(
        micro=micro,
        per_class=per_class,
        risk_mae=mae,
        n_frames=len(gold),
        missing_frames=tuple(missing),
        categories=CATEGORY_PREDICATES,
        latency_stats=latency_stats,
        density_stats=density_stats,
        cost_stats=cost_stats,
    )


def emit_report(report: EvalReport, out_dir: str | Path) -> list[Path]:
    """Human summary plus machine CSVs; returns the written paths."""
    if report.n_frames == 0:
        raise ValueError("refusing to emit a report over an empty gold set")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written: list[Path] = []

    summary = out / "summary.txt"
    lines = [
        f"frames {report.n_frames}",
        f"precision {report.micro['precision']:.3f}",
        f"recall {report.micro['recall']:.3f}",
        f"F1 {report.micro['f1']:.3f}",
        f"risk MAE {report.risk_mae:.3f}",
        f"tracked categories: {', '.join(sorted(report.categories))}",
    ]
    if report.missing_frames:
        lines.append(f"missing predictions for {len(report.missing_frames)} gold frames")
    summary.write_text("\n".join(lines) + "\n", encoding="utf-8")
    written.append(summary)

    per_class_csv = out / "per_class.csv"
    with open(per_class_csv, "w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle)
        writer.writerow(["category", "precision", "recall", "f1", "tp", "fp", "fn", "note"])
        for category in sorted(report.per_class):
            row = report.per_class[category]
            writer.writerow([
                category,
                f"{row['precision']:.6f}",
                f"{row['recall']:.6f}" if "recall" in row else "",
                f"{row['f1']:.6f}" if "f1" in row else "",
                row["tp"], row["fp"], row["fn"],
                row.get("note", ""),
            ])
    written.append(per_class_csv)

    density_csv = out / "density.csv"
    with open(density_csv, "w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle)
        writer.writerow(["scout", "mean_latency_s", "mean_completion_tokens",
                         "implied_tokens", "cost_per_1000_frames"])
        for scout_name in sorted(report.density_stats):
            writer.writerow([
                scout_name,
                f"{report.latency_stats[scout_name]['mean_latency_s']:.3f}",
                f"{report.density_stats[scout_name]['mean_completion_tokens']:.1f}",
                report.density_stats[scout_name]["implied_tokens"],
                f"{report.cost_stats[scout_name]['per_1000_frames']:.4f}",
            ])
    written.append(density_csv)

    report_json = out / "report.json"
    report_json.write_text(
        json.dumps(report.to_payload(), ensure_ascii=False, indent=2) + "\n", encoding="utf-8"
    )
    written.append(report_json)
    return written
