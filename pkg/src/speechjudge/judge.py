"""LLM-judge backends: prompt rendering, dispatch, and score extraction.

Two backend kinds:

* ``chat_http`` -- the de facto chat-completion protocol: POST of
  ``{model, messages, temperature}``, reply's first choice message content is
  the raw reply. Credentials come only from the environment variable named in
  the backend spec; they are never logged or written to reports.
* ``mock`` -- deterministic test double. With a reference text it scores the
  transcript by edit distance; a ``fixed_reply`` or per-utterance ``replies``
  parameter overrides that.

Score extraction is a fixed three-rule precedence (fraction, labeled number,
last in-range number); values outside the template scale raise ParseFailure
rather than being clamped.
"""

from __future__ import annotations

import base64
import hashlib
import logging
import re
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping

from speechjudge.asr import Transcript, audio_digest, normalize_text
from speechjudge.errors import (
    BackendTimeout,
    BackendUnavailable,
    CapabilityError,
    ConfigError,
    JudgeUnparseable,
    ParseFailure,
    TemplateError,
)
from speechjudge.metrics import edit_distance

log = logging.getLogger(__name__)

JUDGE_KINDS = ("chat_http", "mock")
TEMPLATE_TARGETS = ("text_naturalness", "audio_direct")

CLARIFIER = "Reply with only a number between {scale_min} and {scale_max}."

AUDIO_ATTACHMENT_MARKER = "[audio attachment]"


def _format_scale(value: float) -> str:
    return f"{value:g}"


@dataclass(frozen=True)
class PromptTemplate:
    """A judge prompt with named placeholders and a numeric reply scale."""

    template_id: str
    target: str
    body: str
    scale_min: float = 0.0
    scale_max: float = 5.0
    instruction_language: str = "en"

    def __post_init__(self):
        if self.target not in TEMPLATE_TARGETS:
            raise ConfigError(f"unknown template target '{self.target}'")
        if not self.scale_max > self.scale_min:
            raise ConfigError("template scale_max must exceed scale_min")
        if self.target == "text_naturalness" and "{transcript}" not in self.body:
            raise ConfigError(
                "text_naturalness template body must contain {transcript}")
        if self.target == "audio_direct" and "{audio_attachment}" not in self.body:
            raise ConfigError(
                "audio_direct template body must contain {audio_attachment}")

    @property
    def scale(self) -> tuple[float, float]:
        return (self.scale_min, self.scale_max)


DEFAULT_NATURALNESS_TEMPLATE = PromptTemplate(
    template_id="default_naturalness",
    target="text_naturalness",
    body=(
        "You are given a transcript produced by a speech recognizer. "
        "Rate how natural this text is as human speech, considering fluency, "
        "coherence, and context. Reply with a single number from {scale_min} "
        "to {scale_max}. Transcript: {transcript}"
    ),
)

DEFAULT_AUDIO_TEMPLATE = PromptTemplate(
    template_id="default_audio",
    target="audio_direct",
    body=(
        "Listen to the attached speech recording: {audio_attachment} "
        "Rate its overall quality, considering clarity, background noise, "
        "and distortion. Reply with a single number from {scale_min} to "
        "{scale_max}."
    ),
)

BUILTIN_TEMPLATES = {
    t.template_id: t for t in (DEFAULT_NATURALNESS_TEMPLATE, DEFAULT_AUDIO_TEMPLATE)
}


@dataclass(frozen=True)
class JudgeBackendSpec:
    """Configuration of one judge backend."""

    backend_id: str
    kind: str
    endpoint: str | None = None
    model_name: str = "mock"
    temperature: float = 0.0
    max_attempts: int = 3
    timeout: float = 60.0
    audio_capable: bool = False
    api_key_env: str | None = None
    params: Mapping[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        if not self.backend_id:
            raise ConfigError("judge backend_id must be nonempty")
        if self.kind not in JUDGE_KINDS:
            raise ConfigError(f"unknown judge backend kind '{self.kind}'")
        if self.max_attempts < 1:
            raise ConfigError("judge max_attempts must be >= 1")
        if self.temperature < 0:
            raise ConfigError("judge temperature must be >= 0")
        if self.kind == "chat_http" and not self.endpoint:
            raise ConfigError("chat_http judge backend requires an endpoint")

    @property
    def accepts_audio(self) -> bool:
        # Mocks are always reentrant and accept anything.
        return self.kind == "mock" or self.audio_capable


@dataclass(frozen=True)
class JudgeResult:
    """Raw LLM reply plus the parsed, scale-normalized score."""

    utterance_id: str
    template_id: str
    backend_id: str
    raw_reply: str
    parsed_value: float | None
    parsed_scale: tuple[float, float]
    normalized_score: float | None
    attempts_used: int = 1
    from_cache: bool = False

    def to_record(self) -> dict:
        return {
            "kind": "judge_result",
            "utterance_id": self.utterance_id,
            "template_id": self.template_id,
            "backend_id": self.backend_id,
            "raw_reply": self.raw_reply,
            "parsed_value": self.parsed_value,
            "parsed_scale": list(self.parsed_scale),
            "normalized_score": self.normalized_score,
            "attempts_used": self.attempts_used,
        }

    @classmethod
    def from_record(cls, rec: dict, from_cache: bool = True) -> "JudgeResult":
        return cls(
            utterance_id=rec["utterance_id"],
            template_id=rec["template_id"],
            backend_id=rec["backend_id"],
            raw_reply=rec["raw_reply"],
            parsed_value=rec["parsed_value"],
            parsed_scale=tuple(rec["parsed_scale"]),
            normalized_score=rec["normalized_score"],
            attempts_used=int(rec.get("attempts_used", 1)),
            from_cache=from_cache,
        )


def render_prompt(template: PromptTemplate, transcript: str | None) -> str:
    """Substitute placeholders; the transcript appears verbatim.

    ``transcript`` must be present (empty string is legal: silence) exactly
    when the template targets text, and absent for direct audio judging.
    """
    if template.target == "text_naturalness":
        if transcript is None:
            raise TemplateError(
                f"template '{template.template_id}' needs a transcript")
        body = template.body.replace("{transcript}", transcript)
    else:
        if transcript is not None:
            raise TemplateError(
                f"audio_direct template '{template.template_id}' takes no transcript")
        body = template.body.replace("{audio_attachment}", AUDIO_ATTACHMENT_MARKER)
    body = body.replace("{scale_min}", _format_scale(template.scale_min))
    body = body.replace("{scale_max}", _format_scale(template.scale_max))
    return body


# --- score extraction ------------------------------------------------------

_FRACTION_RE = re.compile(r"(-?\d+(?:\.\d+)?)\s*/\s*(\d+(?:\.\d+)?)")
_LABELED_RE = re.compile(r"(?i)\b(?:score|rating)\b[^0-9\-]{0,16}(-?\d+(?:\.\d+)?)")
_NUMBER_RE = re.compile(r"(?<![\w./\-])(-?\d+(?:\.\d+)?)(?!\.?\d)(?!\w)(?!\s*/)")


def parse_score(reply: str, scale: tuple[float, float]) -> float:
    """Extract a numeric score from a free-form judge reply.

    Precedence (the first rule that matches decides; no fall-through):
      1. a fraction ``X/Y`` with Y in {scale_max, 5, 10, 100}, rescaled from
         (0, Y) onto the requested scale;
      2. a number labeled by "score" or "rating" (case-insensitive);
      3. the last standalone decimal number already within the scale.

    Values outside the scale after rescaling raise ParseFailure; clamping
    happens only at normalization of legal values.
    """
    lo, hi = scale
    allowed_denominators = (hi, 5.0, 10.0, 100.0)

    for m in _FRACTION_RE.finditer(reply):
        denom = float(m.group(2))
        if not any(abs(denom - a) < 1e-9 for a in allowed_denominators):
            continue
        numer = float(m.group(1))
        value = lo + (numer / denom) * (hi - lo)
        if value < lo - 1e-12 or value > hi + 1e-12:
            raise ParseFailure(
                f"fraction {m.group(0)!r} rescales to {value:g}, outside "
                f"[{lo:g}, {hi:g}]")
        return value

    m = _LABELED_RE.search(reply)
    if m:
        value = float(m.group(1))
        if value < lo or value > hi:
            raise ParseFailure(
                f"labeled value {value:g} outside [{lo:g}, {hi:g}]")
        return value

    in_range = [float(m.group(1)) for m in _NUMBER_RE.finditer(reply)
                if lo <= float(m.group(1)) <= hi]
    if in_range:
        return in_range[-1]
    raise ParseFailure(f"no score pattern matched in reply: {reply[:80]!r}")


def normalize_score(value: float, scale: tuple[float, float]) -> float:
    """Affine map of a legal parsed value onto [0, 1], clamped."""
    lo, hi = scale
    return min(1.0, max(0.0, (value - lo) / (hi - lo)))


# --- dispatch --------------------------------------------------------------

def _mock_reply(spec: JudgeBackendSpec, template: PromptTemplate, prompt: str,
                utterance_id: str, transcript_norm: str | None,
                reference: str | None) -> str:
    """Deterministic mock reply: a pure function of its arguments.

    Reply precedence: a per-utterance scripted reply, a reply reserved for
    the clarifier re-ask, a fixed reply, then the reference-distance score
    scale_max * (1 - min(1, dist/max(1, |reference|))).
    """
    params = spec.params
    replies = params.get("replies")
    if isinstance(replies, Mapping) and utterance_id in replies:
        return str(replies[utterance_id])
    if "clarified_reply" in params and "Reply with only a number" in prompt:
        return str(params["clarified_reply"])
    if "fixed_reply" in params:
        return str(params["fixed_reply"])
    if transcript_norm is None or reference is None:
        raise ConfigError(
            "mock judge needs a fixed_reply/replies parameter when no "
            "transcript and reference are available")
    ref_norm = normalize_text(reference)
    distance = edit_distance(transcript_norm, ref_norm)
    closeness = 1.0 - min(1.0, distance / max(1, len(ref_norm)))
    return f"{template.scale_max * closeness:.6f}"


def _chat_http_reply(spec: JudgeBackendSpec, prompt: str,
                     audio_bytes: bytes | None) -> str:
    import os

    import requests

    headers = {"Content-Type": "application/json"}
    if spec.api_key_env:
        key = os.environ.get(spec.api_key_env)
        if key:
            headers["Authorization"] = f"Bearer {key}"
    if audio_bytes is None:
        content: Any = prompt
    else:
        content = [
            {"type": "text", "text": prompt},
            {"type": "input_audio",
             "input_audio": {
                 "data": base64.b64encode(audio_bytes).decode("ascii"),
                 "format": "wav",
             }},
        ]
    payload = {
        "model": spec.model_name,
        "messages": [{"role": "user", "content": content}],
        "temperature": spec.temperature,
    }
    try:
        resp = requests.post(spec.endpoint, json=payload, headers=headers,
                             timeout=spec.timeout)
    except requests.exceptions.Timeout as e:
        raise BackendTimeout(
            f"judge endpoint exceeded {spec.timeout:g}s: {spec.endpoint}") from e
    except requests.exceptions.RequestException as e:
        raise BackendUnavailable(f"judge endpoint unreachable: {e}") from e
    if resp.status_code >= 400:
        raise BackendUnavailable(
            f"judge endpoint returned {resp.status_code}: {resp.text[:200]}")
    try:
        body = resp.json()
        return str(body["choices"][0]["message"]["content"])
    except (ValueError, KeyError, IndexError, TypeError) as e:
        raise BackendUnavailable(f"malformed judge reply body: {e}") from e


def _judge_cache_key_parts(spec: JudgeBackendSpec, template: PromptTemplate,
                           prompt: str, extra: list) -> list:
    prompt_digest = hashlib.sha256(prompt.encode("utf-8")).hexdigest()
    return ["judge", spec.backend_id, spec.model_name, template.template_id,
            prompt_digest, spec.temperature, *extra]


def _attempt_loop(spec: JudgeBackendSpec, template: PromptTemplate,
                  base_prompt: str, utterance_id: str, cache, key,
                  dispatch) -> JudgeResult:
    """Shared retry loop: transport failures and unparseable replies both
    consume attempts; parse failures re-ask with an appended clarifier."""
    clarifier = (CLARIFIER
                 .replace("{scale_min}", _format_scale(template.scale_min))
                 .replace("{scale_max}", _format_scale(template.scale_max)))
    prompt = base_prompt
    replies: list[str] = []
    last_error: Exception | None = None
    for attempt in range(1, spec.max_attempts + 1):
        try:
            reply = dispatch(prompt)
        except BackendUnavailable as e:
            last_error = e
            log.debug("judge attempt %d/%d transport failure for %s: %s",
                      attempt, spec.max_attempts, utterance_id, e)
            continue
        replies.append(reply)
        try:
            value = parse_score(reply, template.scale)
        except ParseFailure as e:
            last_error = e
            prompt = base_prompt + "\n" + clarifier
            log.debug("judge attempt %d/%d unparseable for %s: %s",
                      attempt, spec.max_attempts, utterance_id, e)
            continue
        result = JudgeResult(
            utterance_id=utterance_id,
            template_id=template.template_id,
            backend_id=spec.backend_id,
            raw_reply=reply,
            parsed_value=value,
            parsed_scale=template.scale,
            normalized_score=normalize_score(value, template.scale),
            attempts_used=attempt,
            from_cache=False,
        )
        if cache is not None:
            cache.put(key, result.to_record())
        return result

    if isinstance(last_error, ParseFailure):
        raise JudgeUnparseable(
            f"no parseable score for {utterance_id} after "
            f"{spec.max_attempts} attempts", replies=replies)
    raise BackendUnavailable(
        f"judge backend failed for {utterance_id} after "
        f"{spec.max_attempts} attempts: {last_error}")


def judge_text(spec: JudgeBackendSpec, template: PromptTemplate,
               transcript: Transcript, reference: str | None = None,
               cache=None) -> JudgeResult:
    """Judge a transcript's naturalness; retries per the backend spec.

    ``reference`` feeds only the distance-based mock; live backends never
    see it.
    """
    if template.target != "text_naturalness":
        raise TemplateError(
            f"judge_text requires a text_naturalness template, got "
            f"'{template.target}'")
    prompt = render_prompt(template, transcript.raw_text)

    extra: list = []
    if spec.kind == "mock" and reference is not None:
        extra.append(hashlib.sha256(reference.encode("utf-8")).hexdigest())
    key = None
    if cache is not None:
        key = cache.key(*_judge_cache_key_parts(spec, template, prompt, extra))
        hit = cache.get(key)
        if hit is not None:
            return JudgeResult.from_record(hit, from_cache=True)

    if spec.kind == "mock":
        def dispatch(p):
            return _mock_reply(spec, template, p, transcript.utterance_id,
                               transcript.normalized_text, reference)
    else:
        def dispatch(p):
            return _chat_http_reply(spec, p, audio_bytes=None)

    return _attempt_loop(spec, template, prompt, transcript.utterance_id,
                         cache, key, dispatch)


def judge_audio(spec: JudgeBackendSpec, template: PromptTemplate,
                utterance, cache=None) -> JudgeResult:
    """Judge the audio directly; the recording rides along as an attachment."""
    if template.target != "audio_direct":
        raise TemplateError(
            f"judge_audio requires an audio_direct template, got "
            f"'{template.target}'")
    if not spec.accepts_audio:
        raise CapabilityError(
            f"judge backend '{spec.backend_id}' cannot accept audio")
    audio_path = Path(utterance.audio_path)
    if not audio_path.is_file():
        raise BackendUnavailable(f"audio file missing: {audio_path}")
    prompt = render_prompt(template, None)
    digest = audio_digest(audio_path)

    key = None
    if cache is not None:
        key = cache.key(*_judge_cache_key_parts(spec, template, prompt,
                                                [digest]))
        hit = cache.get(key)
        if hit is not None:
            return JudgeResult.from_record(hit, from_cache=True)

    if spec.kind == "mock":
        def dispatch(p):
            return _mock_reply(spec, template, p, utterance.id, None, None)
    else:
        audio_bytes = audio_path.read_bytes()

        def dispatch(p):
            return _chat_http_reply(spec, p, audio_bytes=audio_bytes)

    return _attempt_loop(spec, template, prompt, utterance.id,
                         cache, key, dispatch)
