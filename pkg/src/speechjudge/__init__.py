"""speechjudge: zero-shot non-intrusive speech assessment pipeline.

Transcribe audio with a pluggable ASR backend, score the transcript's
naturalness with a pluggable LLM judge (or judge the audio directly), and
evaluate predictions against quality, intelligibility, and character error
rate targets using Pearson (LCC) and Spearman (SRCC) correlations.
"""

__version__ = "0.1.0"

from speechjudge.errors import (
    BackendTimeout,
    BackendUnavailable,
    BadEdges,
    CapabilityError,
    ConfigError,
    DegenerateSeries,
    EmptyReference,
    JudgeUnparseable,
    ManifestFormatError,
    ManifestValidationError,
    ParseFailure,
    SpeechJudgeError,
    TemplateError,
)

__all__ = [
    "__version__",
    "SpeechJudgeError",
    "ConfigError",
    "ManifestFormatError",
    "ManifestValidationError",
    "BackendUnavailable",
    "BackendTimeout",
    "CapabilityError",
    "TemplateError",
    "JudgeUnparseable",
    "ParseFailure",
    "EmptyReference",
    "DegenerateSeries",
    "BadEdges",
]
