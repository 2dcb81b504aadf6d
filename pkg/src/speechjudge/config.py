"""Run configuration: YAML/JSON config file, --set overrides, digesting.

The config file is a single structured document mirroring RunConfig. Paths
inside it (manifest) resolve relative to the config file's directory;
cache_dir and output_dir resolve relative to the working directory.

Secrets never appear in a config value: judge backends name an environment
variable (``api_key_env``) and the credential is read from the environment
at dispatch time only.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

import yaml

from speechjudge.asr import AsrBackendSpec
from speechjudge.errors import ConfigError
from speechjudge.judge import BUILTIN_TEMPLATES, JudgeBackendSpec, PromptTemplate

MODES = ("transcribe_then_judge", "audio_direct")

JUDGE_COLUMN = "judge_score"

# --set keys that would smuggle a credential into the config are rejected.
SECRET_KEY_NAMES = {"api_key", "apikey", "token", "secret", "password",
                    "credential"}


@dataclass
class RunConfig:
    manifest_path: str
    judge_backend: JudgeBackendSpec
    template: PromptTemplate
    mode: str = "transcribe_then_judge"
    manifest_format: str | None = None
    asr_backend: AsrBackendSpec | None = None
    targets: tuple[str, ...] = ()
    extra_predictors: tuple[str, ...] = ()
    parallelism: int = 4
    cache_dir: str = ".speechjudge_cache"
    seed: int = 0
    output_dir: str = "runs"
    column_ranges: dict = field(default_factory=dict)
    cer_column: str | None = None

    def __post_init__(self):
        if self.mode not in MODES:
            raise ConfigError(f"unknown mode '{self.mode}'")
        if self.mode == "transcribe_then_judge" and self.asr_backend is None:
            raise ConfigError("mode transcribe_then_judge requires asr_backend")
        if not self.targets:
            raise ConfigError("targets must be nonempty")
        if self.parallelism < 1:
            raise ConfigError("parallelism must be >= 1")
        expected_target = ("audio_direct" if self.mode == "audio_direct"
                           else "text_naturalness")
        if self.template.target != expected_target:
            raise ConfigError(
                f"template target '{self.template.target}' does not match "
                f"mode '{self.mode}'")
        if (self.mode == "audio_direct"
                and not self.judge_backend.accepts_audio):
            raise ConfigError(
                "mode audio_direct requires an audio-capable judge backend")


def load_config_doc(path: str | Path) -> dict:
    with open(path, encoding="utf-8") as fh:
        try:
            doc = yaml.safe_load(fh)
        except yaml.YAMLError as e:
            raise ConfigError(f"config file does not parse: {e}")
    if not isinstance(doc, dict):
        raise ConfigError("config file must contain a mapping")
    return doc


def apply_overrides(doc: dict, overrides: list[str]) -> dict:
    """Apply repeatable ``--set dotted.key=value`` flags to the document.

    Keys must already exist in the document; values parse as YAML scalars.
    """
    doc = json.loads(json.dumps(doc))  # deep copy
    for item in overrides:
        if "=" not in item:
            raise ConfigError(f"override must look like key=value: '{item}'")
        dotted, raw_value = item.split("=", 1)
        parts = dotted.split(".")
        if parts[-1].lower() in SECRET_KEY_NAMES:
            raise ConfigError(
                f"refusing secret-looking override '{dotted}': secrets are "
                f"read only from the environment variable named by "
                f"judge_backend.api_key_env")
        node = doc
        for p in parts[:-1]:
            if not isinstance(node, dict) or p not in node:
                raise ConfigError(f"override references unknown config key "
                                  f"'{dotted}'")
            node = node[p]
        if not isinstance(node, dict) or parts[-1] not in node:
            raise ConfigError(f"override references unknown config key "
                              f"'{dotted}'")
        try:
            node[parts[-1]] = yaml.safe_load(raw_value)
        except yaml.YAMLError:
            node[parts[-1]] = raw_value
    return doc


def _build_asr(obj: dict | None) -> AsrBackendSpec | None:
    if obj is None:
        return None
    if not isinstance(obj, dict):
        raise ConfigError("asr_backend must be a mapping")
    known = {"backend_id", "kind", "endpoint_or_template", "language_hint",
             "timeout", "params"}
    unknown = set(obj) - known
    if unknown:
        raise ConfigError(f"unknown asr_backend key(s): {', '.join(sorted(unknown))}")
    try:
        return AsrBackendSpec(
            backend_id=obj.get("backend_id", ""),
            kind=obj.get("kind", ""),
            endpoint_or_template=obj.get("endpoint_or_template", ""),
            language_hint=obj.get("language_hint"),
            timeout=float(obj.get("timeout", 60.0)),
            params=dict(obj.get("params") or {}),
        )
    except (TypeError, ValueError) as e:
        raise ConfigError(f"bad asr_backend: {e}")


def _build_judge(obj: dict) -> JudgeBackendSpec:
    if not isinstance(obj, dict):
        raise ConfigError("judge_backend must be a mapping")
    known = {"backend_id", "kind", "endpoint", "model_name", "temperature",
             "max_attempts", "timeout", "audio_capable", "api_key_env",
             "params"}
    unknown = set(obj) - known
    if unknown:
        raise ConfigError(f"unknown judge_backend key(s): {', '.join(sorted(unknown))}")
    try:
        return JudgeBackendSpec(
            backend_id=obj.get("backend_id", ""),
            kind=obj.get("kind", ""),
            endpoint=obj.get("endpoint"),
            model_name=obj.get("model_name", "mock"),
            temperature=float(obj.get("temperature", 0.0)),
            max_attempts=int(obj.get("max_attempts", 3)),
            timeout=float(obj.get("timeout", 60.0)),
            audio_capable=bool(obj.get("audio_capable", False)),
            api_key_env=obj.get("api_key_env"),
            params=dict(obj.get("params") or {}),
        )
    except (TypeError, ValueError) as e:
        raise ConfigError(f"bad judge_backend: {e}")


def _build_template(obj, mode: str) -> PromptTemplate:
    if obj is None:
        return (BUILTIN_TEMPLATES["default_audio"] if mode == "audio_direct"
                else BUILTIN_TEMPLATES["default_naturalness"])
    if isinstance(obj, str):
        if obj not in BUILTIN_TEMPLATES:
            raise ConfigError(f"unknown template id '{obj}'; built-ins: "
                              f"{', '.join(sorted(BUILTIN_TEMPLATES))}")
        return BUILTIN_TEMPLATES[obj]
    if not isinstance(obj, dict):
        raise ConfigError("template must be a mapping or a template id")
    if set(obj) == {"template_id"}:
        return _build_template(obj["template_id"], mode)
    known = {"template_id", "target", "body", "scale_min", "scale_max",
             "instruction_language"}
    unknown = set(obj) - known
    if unknown:
        raise ConfigError(f"unknown template key(s): {', '.join(sorted(unknown))}")
    base = _build_template(None, mode)
    try:
        return PromptTemplate(
            template_id=obj.get("template_id", base.template_id),
            target=obj.get("target", base.target),
            body=obj.get("body", base.body),
            scale_min=float(obj.get("scale_min", base.scale_min)),
            scale_max=float(obj.get("scale_max", base.scale_max)),
            instruction_language=obj.get("instruction_language",
                                         base.instruction_language),
        )
    except (TypeError, ValueError) as e:
        raise ConfigError(f"bad template: {e}")


_TOP_LEVEL_KEYS = {"manifest", "manifest_format", "mode", "asr_backend",
                   "judge_backend", "template", "targets", "extra_predictors",
                   "parallelism", "cache_dir", "seed", "output_dir",
                   "column_ranges", "cer_column"}


def build_run_config(doc: dict, config_dir: str | Path = ".",
                     seed: int | None = None,
                     parallelism: int | None = None) -> RunConfig:
    unknown = set(doc) - _TOP_LEVEL_KEYS
    if unknown:
        raise ConfigError(f"unknown config key(s): {', '.join(sorted(unknown))}")
    if "manifest" not in doc:
        raise ConfigError("config needs a 'manifest' path")
    if "judge_backend" not in doc:
        raise ConfigError("config needs a 'judge_backend' section")
    mode = doc.get("mode", "transcribe_then_judge")

    manifest_path = Path(doc["manifest"])
    if not manifest_path.is_absolute():
        manifest_path = Path(config_dir) / manifest_path

    asr = _build_asr(doc.get("asr_backend"))
    run_seed = int(doc.get("seed", 0)) if seed is None else int(seed)
    if asr is not None and asr.kind == "mock" and "seed" not in asr.params:
        # bake the run seed into the mock so cache keys and digests see it
        asr = AsrBackendSpec(
            backend_id=asr.backend_id, kind=asr.kind,
            endpoint_or_template=asr.endpoint_or_template,
            language_hint=asr.language_hint, timeout=asr.timeout,
            params={**asr.params, "seed": run_seed},
        )

    targets = doc.get("targets") or ()
    if isinstance(targets, str):
        targets = (targets,)
    extra = doc.get("extra_predictors") or ()
    if isinstance(extra, str):
        extra = (extra,)

    ranges = {}
    for name, pair in (doc.get("column_ranges") or {}).items():
        try:
            lo, hi = float(pair[0]), float(pair[1])
        except (TypeError, ValueError, IndexError):
            raise ConfigError(f"column_ranges['{name}'] must be [lo, hi]")
        if not hi > lo:
            raise ConfigError(f"column_ranges['{name}']: hi must exceed lo")
        ranges[str(name)] = (lo, hi)

    try:
        run_parallelism = (int(doc.get("parallelism", 4))
                           if parallelism is None else int(parallelism))
    except (TypeError, ValueError):
        raise ConfigError("parallelism must be an integer")

    return RunConfig(
        manifest_path=str(manifest_path),
        manifest_format=doc.get("manifest_format"),
        judge_backend=_build_judge(doc["judge_backend"]),
        template=_build_template(doc.get("template"), mode),
        mode=mode,
        asr_backend=asr,
        targets=tuple(str(t) for t in targets),
        extra_predictors=tuple(str(p) for p in extra),
        parallelism=run_parallelism,
        cache_dir=str(doc.get("cache_dir", ".speechjudge_cache")),
        seed=run_seed,
        output_dir=str(doc.get("output_dir", "runs")),
        column_ranges=ranges,
        cer_column=doc.get("cer_column"),
    )


def config_digest(cfg: RunConfig) -> str:
    """Short stable digest of everything that shapes a run's outputs."""
    payload = {
        "manifest_path": cfg.manifest_path,
        "manifest_format": cfg.manifest_format,
        "mode": cfg.mode,
        "seed": cfg.seed,
        "targets": list(cfg.targets),
        "extra_predictors": list(cfg.extra_predictors),
        "column_ranges": {k: list(v) for k, v in sorted(cfg.column_ranges.items())},
        "asr_backend": None if cfg.asr_backend is None else {
            "backend_id": cfg.asr_backend.backend_id,
            "kind": cfg.asr_backend.kind,
            "endpoint_or_template": cfg.asr_backend.endpoint_or_template,
            "language_hint": cfg.asr_backend.language_hint,
            "params": dict(cfg.asr_backend.params),
        },
        "judge_backend": {
            "backend_id": cfg.judge_backend.backend_id,
            "kind": cfg.judge_backend.kind,
            "endpoint": cfg.judge_backend.endpoint,
            "model_name": cfg.judge_backend.model_name,
            "temperature": cfg.judge_backend.temperature,
            "max_attempts": cfg.judge_backend.max_attempts,
            "audio_capable": cfg.judge_backend.audio_capable,
            "params": dict(cfg.judge_backend.params),
        },
        "template": {
            "template_id": cfg.template.template_id,
            "target": cfg.template.target,
            "body": cfg.template.body,
            "scale": [cfg.template.scale_min, cfg.template.scale_max],
        },
    }
    blob = json.dumps(payload, sort_keys=True, ensure_ascii=False)
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()[:12]
