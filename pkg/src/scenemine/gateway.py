"""Scout gateway: prompt assembly, endpoint transport, response parsing.

Scouts and the judge speak the same open chat-completions wire protocol:
one POST per completion, system text plus a user turn that mixes text and
inline base64 images. Transport failures retry with exponential backoff;
HTTP 4xx is fatal (the request itself is wrong, retrying cannot help).
"""

from __future__ import annotations

import base64
import logging
import re
import time
from dataclasses import dataclass, replace
from importlib import resources
from pathlib import Path
from typing import Callable, Sequence

import requests

from .schema import ParseError, ScenarioDNA, ValidationError, parse_dna

logger = logging.getLogger(__name__)

DEFAULT_TEMPERATURE = 0.6
DEFAULT_MAX_TOKENS = 8192

_THINK_OPEN = "<think>"
_THINK_CLOSE = "</think>"
_THINK_RE = re.compile(r"<think>(.*?)</think>", re.S)

_AUDIT_TAIL_CHARS = 400


def scout_system_prompt() -> str:
    return resources.files("scenemine.data.prompts").joinpath("scout_system_prompt.txt").read_text()


class GatewayError(Exception):
    """Base class for transport and endpoint failures."""


class TransportError(GatewayError):
    """Network-level failure; retryable."""


class Timeout(TransportError):
    """Request exceeded timeout_s; retryable."""


class EndpointError(GatewayError):
    """Endpoint answered with an error status; 4xx is fatal."""

    def __init__(self, status: int, body_excerpt: str):
        super().__init__(f"endpoint returned {status}: {body_excerpt}")
        self.status = status
        self.body_excerpt = body_excerpt

    @property
    def retryable(self) -> bool:
        return self.status >= 500


@dataclass(frozen=True)
class ScoutConfig:
    name: str
    endpoint_url: str
    model_id: str
    temperature: float = DEFAULT_TEMPERATURE
    max_tokens: int = DEFAULT_MAX_TOKENS
    timeout_s: float = 120.0
    role: str = "scout"
    retries: int = 2
    backoff_s: float = 0.5

    def __post_init__(self):
        if self.temperature < 0:
            raise ValueError("temperature must be >= 0")
        if self.timeout_s <= 0:
            raise ValueError("timeout_s must be > 0")
        if self.role not in ("scout", "judge"):
            raise ValueError(f"unknown role {self.role!r}")


@dataclass(frozen=True)
class PromptBundle:
    system: str
    user_text: str
    images: tuple[str, ...]  # base64 data URLs; empty for judge prompts


@dataclass(frozen=True)
class RawCompletion:
    text: str
    latency_s: float
    completion_tokens: int | None


@dataclass(frozen=True)
class ParseFailure:
    error: str
    stage: int | None
    raw_tail: str


@dataclass(frozen=True)
class ScoutReport:
    frame_id: str
    scout_name: str
    reasoning_trace: str
    dna: ScenarioDNA | None
    parse_failure: ParseFailure | None
    latency_s: float
    completion_tokens: int
    tokens_per_s: float

    def to_payload(self) -> dict:
        return {
            "frame_id": self.frame_id,
            "scout_name": self.scout_name,
            "reasoning_trace": self.reasoning_trace,
            "dna": self.dna.to_payload() if self.dna else None,
            "parse_failure": (
                {
                    "error": self.parse_failure.error,
                    "stage": self.parse_failure.stage,
                    "raw_tail": self.parse_failure.raw_tail,
                }
                if self.parse_failure
                else None
            ),
            "latency_s": self.latency_s,
            "completion_tokens": self.completion_tokens,
            "tokens_per_s": self.tokens_per_s,
        }


def encode_image(path: str | Path) -> str:
    """File -> base64 data URL; extension picks the MIME subtype."""
    p = Path(path)
    suffix = p.suffix.lower().lstrip(".") or "jpeg"
    subtype = {"jpg": "jpeg"}.get(suffix, suffix)
    payload = base64.b64encode(p.read_bytes()).decode("ascii")
    return f"data:image/{subtype};base64,{payload}"


def build_scout_prompt(inventory_text: str, image_refs: Sequence[str]) -> PromptBundle:
    """System prompt from the shipped resource; user turn = inventory + 3 images.

    image_refs must be exactly three data URLs in left, center, right order.
    """
    if len(image_refs) != 3:
        raise ValueError(f"expected 3 images (left, center, right), got {len(image_refs)}")
    return PromptBundle(
        system=scout_system_prompt(),
        user_text=f"[YOLO Inventory]:\n{inventory_text}",
        images=tuple(image_refs),
    )


def _request_body(config: ScoutConfig, prompt: PromptBundle) -> dict:
    user_content: list[dict] = [{"type": "text", "text": prompt.user_text}]
    for url in prompt.images:
        user_content.append({"type": "image_url", "image_url": {"url": url}})
    return {
        "model": config.model_id,
        "temperature": config.temperature,
        "max_tokens": config.max_tokens,
        "messages": [
            {"role": "system", "content": prompt.system},
            {"role": "user", "content": user_content},
        ],
    }


def query_scout(
    config: ScoutConfig,
    prompt: PromptBundle,
    *,
    sleep: Callable[[float], None] = time.sleep,
) -> RawCompletion:
    """One completion with retry-on-transport-failure semantics.

    Up to ``config.retries`` retries with exponential backoff; 4xx responses
    raise immediately. ``sleep`` is injectable so tests skip real waiting.
    """
    body = _request_body(config, prompt)
    last_error: GatewayError | None = None
    for attempt in range(config.retries + 1):
        if attempt:
            sleep(config.backoff_s * (2 ** (attempt - 1)))
        started = time.monotonic()
        try:
            response = requests.post(config.endpoint_url, json=body, timeout=config.timeout_s)
        except requests.Timeout as exc:
            last_error = Timeout(f"{config.endpoint_url} timed out after {config.timeout_s}s")
            logger.warning("attempt %d/%d: %s", attempt + 1, config.retries + 1, exc)
            continue
        except requests.RequestException as exc:
            last_error = TransportError(str(exc))
            logger.warning("attempt %d/%d: %s", attempt + 1, config.retries + 1, exc)
            continue
        latency = time.monotonic() - started
        if response.status_code >= 400:
            error = EndpointError(response.status_code, response.text[:200])
            if not error.retryable:
                raise error
            last_error = error
            logger.warning("attempt %d/%d: %s", attempt + 1, config.retries + 1, error)
            continue
        payload = response.json()
        text = payload["choices"][0]["message"]["content"]
        usage = payload.get("usage") or {}
        completion_tokens = usage.get("completion_tokens")
        return RawCompletion(
            text=text,
            latency_s=latency,
            completion_tokens=int(completion_tokens) if completion_tokens is not None else None,
        )
    assert last_error is not None
    raise last_error


def split_reasoning(raw: str) -> tuple[str, str]:
    """(trace, remainder): first think span extracted, empty trace if absent.

    An unclosed tag swallows the rest of the text into the trace, leaving
    nothing to parse; the DNA error that follows is intentional.
    """
    m = _THINK_RE.search(raw)
    if m:
        return m.group(1), raw[: m.start()] + raw[m.end() :]
    open_at = raw.find(_THINK_OPEN)
    if open_at >= 0:
        return raw[open_at + len(_THINK_OPEN) :], raw[:open_at]
    return "", raw


def parse_scout_response(raw: str) -> tuple[str, ScenarioDNA | ParseFailure]:
    trace, remainder = split_reasoning(raw)
    try:
        return trace, parse_dna(remainder)
    except ParseError as exc:
        return trace, ParseFailure(
            error=str(exc), stage=exc.stage, raw_tail=remainder[-_AUDIT_TAIL_CHARS:]
        )
    except ValidationError as exc:
        return trace, ParseFailure(
            error=str(exc), stage=None, raw_tail=remainder[-_AUDIT_TAIL_CHARS:]
        )


def report_from_completion(
    frame_id: str, scout_name: str, completion: RawCompletion
) -> ScoutReport:
    """Wrap a raw completion into a report; trace words stand in for missing usage."""
    trace, outcome = parse_scout_response(completion.text)
    tokens = completion.completion_tokens
    if tokens is None:
        tokens = len(completion.text.split())
    tps = tokens / completion.latency_s if completion.latency_s > 0 else 0.0
    dna = outcome if isinstance(outcome, ScenarioDNA) else None
    failure = outcome if isinstance(outcome, ParseFailure) else None
    return ScoutReport(
        frame_id=frame_id,
        scout_name=scout_name,
        reasoning_trace=trace,
        dna=dna,
        parse_failure=failure,
        latency_s=completion.latency_s,
        completion_tokens=tokens,
        tokens_per_s=tps,
    )


def run_scout(
    config: ScoutConfig,
    frame_id: str,
    inventory_text: str,
    image_refs: Sequence[str],
    *,
    sleep: Callable[[float], None] = time.sleep,
) -> ScoutReport:
    prompt = build_scout_prompt(inventory_text, image_refs)
    completion = query_scout(config, prompt, sleep=sleep)
    return report_from_completion(frame_id, config.name, completion)


def with_endpoint(config: ScoutConfig, endpoint_url: str) -> ScoutConfig:
    return replace(config, endpoint_url=endpoint_url)
