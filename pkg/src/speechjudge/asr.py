"""Uniform interface over audio-to-text backends, plus transcript normalization.

Three backend kinds share one calling convention:

* ``external_command`` -- a command template with an ``{audio}`` placeholder;
  the transcript is read from stdout, nonzero exit raises BackendUnavailable.
* ``http_service`` -- POST of the audio bytes to an endpoint; the reply is a
  text body or a JSON object with a ``text`` field.
* ``mock`` -- a deterministic test double that corrupts the reference text
  with a seeded per-character process (rate may be tied to the SNR tag).

Backends never modify the audio file; transcribe reads it once to digest it
for cache keys.
"""

from __future__ import annotations

import hashlib
import logging
import random
import shlex
import subprocess
import time
import unicodedata
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping

from speechjudge.errors import BackendTimeout, BackendUnavailable, ConfigError

log = logging.getLogger(__name__)

ASR_KINDS = ("external_command", "http_service", "mock")

# Logged into every report so replications can compare normalization choices.
NORMALIZATION_NOTE = (
    "NFKC compatibility composition; all whitespace removed; all Unicode "
    "punctuation (including CJK full-width forms) removed; Latin letters "
    "lower-cased; CJK characters preserved verbatim"
)

# Substitution pool for the corruption mock: Latin letters, digits, and a
# handful of frequent hanzi so Mandarin references stay in-domain.
CORRUPTION_ALPHABET = "abcdefghijklmnopqrstuvwxyz0123456789的一是不了人我在有他这中大来上国"


@dataclass(frozen=True)
class AsrBackendSpec:
    """Configuration of one audio-to-text backend."""

    backend_id: str
    kind: str
    endpoint_or_template: str = ""
    language_hint: str | None = None
    timeout: float = 60.0
    params: Mapping[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        if not self.backend_id:
            raise ConfigError("asr backend_id must be nonempty")
        if self.kind not in ASR_KINDS:
            raise ConfigError(f"unknown asr backend kind '{self.kind}'")
        if self.timeout <= 0:
            raise ConfigError("asr timeout must be > 0")
        if self.kind == "external_command":
            n = self.endpoint_or_template.count("{audio}")
            if n != 1:
                raise ConfigError(
                    f"external_command template must contain exactly one "
                    f"{{audio}} placeholder, found {n}")
        if self.kind == "http_service" and not self.endpoint_or_template:
            raise ConfigError("http_service backend requires an endpoint URL")


@dataclass(frozen=True)
class Transcript:
    """Normalized ASR output with backend provenance."""

    utterance_id: str
    backend_id: str
    raw_text: str
    normalized_text: str
    latency: float = 0.0
    from_cache: bool = False

    def to_record(self) -> dict:
        return {
            "kind": "transcript",
            "utterance_id": self.utterance_id,
            "backend_id": self.backend_id,
            "raw_text": self.raw_text,
            "normalized_text": self.normalized_text,
            "latency": self.latency,
        }

    @classmethod
    def from_record(cls, rec: dict, from_cache: bool = True) -> "Transcript":
        return cls(
            utterance_id=rec["utterance_id"],
            backend_id=rec["backend_id"],
            raw_text=rec["raw_text"],
            normalized_text=rec["normalized_text"],
            latency=float(rec.get("latency", 0.0)),
            from_cache=from_cache,
        )


def _normalize_once(text: str) -> str:
    out = []
    for ch in unicodedata.normalize("NFKC", text):
        if ch.isspace():
            continue
        if unicodedata.category(ch).startswith("P"):
            continue
        out.append(ch)
    return "".join(out).lower()


def normalize_text(raw: str) -> str:
    """Canonical text form for character-level scoring.

    NFKC, strip whitespace and punctuation, lower-case. Iterates to a fixed
    point (a handful of exotic codepoints change again after lower-casing),
    so normalize(normalize(x)) == normalize(x) holds by construction.
    """
    text = raw
    for _ in range(4):
        nxt = _normalize_once(text)
        if nxt == text:
            return text
        text = nxt
    return text


def mock_asr(reference: str, corruption_rate: float, seed: int) -> str:
    """Deterministically corrupt each character with the given probability.

    Each corrupted position is substituted (from a fixed alphabet, never the
    original character), deleted, or duplicated, chosen by the same seeded
    generator. Pure function of its arguments.
    """
    rng = random.Random(seed)
    out: list[str] = []
    for ch in reference:
        if rng.random() >= corruption_rate:
            out.append(ch)
            continue
        action = rng.choice(("substitute", "delete", "duplicate"))
        if action == "substitute":
            pool = CORRUPTION_ALPHABET.replace(ch, "") or "x"
            out.append(pool[rng.randrange(len(pool))])
        elif action == "duplicate":
            out.append(ch)
            out.append(ch)
        # delete: emit nothing
    return "".join(out)


def derive_seed(base_seed: int, utterance_id: str) -> int:
    """Stable per-utterance seed, independent of processing order."""
    digest = hashlib.sha256(f"{base_seed}:{utterance_id}".encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "big")


def mock_corruption_rate(spec: AsrBackendSpec, snr_db: float | None) -> float:
    """Corruption rate for a mock backend, optionally driven by SNR.

    rate = clamp(corruption_rate - snr_gain * snr_db, 0, 1); with a positive
    ``snr_gain`` the rate decreases as SNR improves.
    """
    base = float(spec.params.get("corruption_rate", 0.0))
    gain = float(spec.params.get("snr_gain", 0.0))
    rate = base
    if gain != 0.0 and snr_db is not None:
        rate = base - gain * snr_db
    return min(1.0, max(0.0, rate))


def audio_digest(audio_path: str | Path) -> str:
    return hashlib.sha256(Path(audio_path).read_bytes()).hexdigest()


def transcribe_cache_key_parts(spec: AsrBackendSpec, digest: str,
                               utterance_id: str) -> list:
    """Cache key components: backend identity + parameters + audio digest.

    Mock output additionally depends on the manifest row (reference text,
    SNR tag), so mock keys include the utterance id.
    """
    parts = [
        "asr", spec.backend_id, spec.kind, spec.endpoint_or_template,
        spec.language_hint, dict(spec.params), digest,
    ]
    if spec.kind == "mock":
        parts.append(utterance_id)
    return parts


def _run_external_command(spec: AsrBackendSpec, audio_path: Path) -> str:
    tokens = [t.replace("{audio}", str(audio_path))
              for t in shlex.split(spec.endpoint_or_template)]
    try:
        proc = subprocess.run(tokens, capture_output=True, timeout=spec.timeout)
    except subprocess.TimeoutExpired as e:
        raise BackendTimeout(
            f"asr command exceeded {spec.timeout:g}s: {tokens[0]}") from e
    except OSError as e:
        raise BackendUnavailable(f"asr command failed to spawn: {e}") from e
    if proc.returncode != 0:
        stderr = proc.stderr.decode("utf-8", "replace").strip()
        raise BackendUnavailable(
            f"asr command exited {proc.returncode}: {stderr[:200]}")
    return proc.stdout.decode("utf-8", "replace").strip()


def _run_http_service(spec: AsrBackendSpec, audio_path: Path) -> str:
    import requests

    query = {"language": spec.language_hint} if spec.language_hint else None
    try:
        resp = requests.post(
            spec.endpoint_or_template,
            data=audio_path.read_bytes(),
            params=query,
            headers={"Content-Type": "application/octet-stream"},
            timeout=spec.timeout,
        )
    except requests.exceptions.Timeout as e:
        raise BackendTimeout(
            f"asr endpoint exceeded {spec.timeout:g}s: {spec.endpoint_or_template}") from e
    except requests.exceptions.RequestException as e:
        raise BackendUnavailable(f"asr endpoint unreachable: {e}") from e
    if resp.status_code >= 400:
        raise BackendUnavailable(
            f"asr endpoint returned {resp.status_code}: {resp.text[:200]}")
    try:
        body = resp.json()
    except ValueError:
        return resp.text.strip()
    if isinstance(body, dict) and "text" in body:
        return str(body["text"]).strip()
    return resp.text.strip()


def _run_mock(spec: AsrBackendSpec, utterance) -> str:
    reference = utterance.reference_text or ""
    rate = mock_corruption_rate(spec, utterance.condition.snr_db)
    seed = derive_seed(int(spec.params.get("seed", 0)), utterance.id)
    return mock_asr(reference, rate, seed)


def transcribe(spec: AsrBackendSpec, utterance, cache=None) -> Transcript:
    """Run one utterance through a backend, going through the cache if given.

    An empty transcript is a legitimate output (silence), recorded as the
    empty string, never an error.
    """
    audio_path = Path(utterance.audio_path)
    if not audio_path.is_file():
        raise BackendUnavailable(f"audio file missing: {audio_path}")
    digest = audio_digest(audio_path)
    key = None
    if cache is not None:
        key = cache.key(*transcribe_cache_key_parts(spec, digest, utterance.id))
        hit = cache.get(key)
        if hit is not None:
            return Transcript.from_record(hit, from_cache=True)

    started = time.monotonic()
    if spec.kind == "mock":
        raw = _run_mock(spec, utterance)
    elif spec.kind == "external_command":
        raw = _run_external_command(spec, audio_path)
    else:
        raw = _run_http_service(spec, audio_path)
    latency = time.monotonic() - started

    transcript = Transcript(
        utterance_id=utterance.id,
        backend_id=spec.backend_id,
        raw_text=raw,
        normalized_text=normalize_text(raw),
        latency=latency,
        from_cache=False,
    )
    if cache is not None:
        cache.put(key, transcript.to_record())
    log.debug("transcribed %s via %s (%.3fs, %d chars)",
              utterance.id, spec.backend_id, latency, len(raw))
    return transcript
