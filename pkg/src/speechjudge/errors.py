"""Exception hierarchy shared across the package.

Every error the CLI maps to an exit code lives here, so the mapping in one
place stays total.
"""

from __future__ import annotations


class SpeechJudgeError(Exception):
    """Base class for all package errors."""


class ConfigError(SpeechJudgeError):
    """Invalid run configuration (bad config file, override, or argument)."""


class ManifestFormatError(SpeechJudgeError):
    """A manifest row could not be parsed in the declared format."""

    def __init__(self, message: str, line_no: int | None = None):
        self.line_no = line_no
        if line_no is not None:
            message = f"line {line_no}: {message}"
        super().__init__(message)


class ManifestValidationError(SpeechJudgeError):
    """One or more records violate the manifest invariants.

    Carries every offending record id, not just the first.
    """

    def __init__(self, problems: list[str], ids: list[str]):
        self.problems = list(problems)
        self.ids = list(ids)
        super().__init__("; ".join(problems))


class BackendUnavailable(SpeechJudgeError):
    """A backend could not be spawned or reached, or replied with an error."""


class BackendTimeout(BackendUnavailable):
    """A backend did not answer within its configured wall-clock budget."""


class CapabilityError(SpeechJudgeError):
    """The backend cannot accept the requested payload (e.g. audio)."""


class TemplateError(SpeechJudgeError):
    """Prompt template and arguments do not fit together."""


class ParseFailure(SpeechJudgeError):
    """No score could be extracted from a judge reply."""


class JudgeUnparseable(SpeechJudgeError):
    """All judge attempts produced replies with no extractable score.

    The raw replies are preserved for audit.
    """

    def __init__(self, message: str, replies: list[str] | None = None):
        self.replies = list(replies or [])
        super().__init__(message)


class EmptyReference(SpeechJudgeError):
    """CER is undefined for an empty (post-normalization) reference."""


class DegenerateSeries(SpeechJudgeError):
    """Correlation is undefined: fewer than two pairs or zero variance."""


class BadEdges(SpeechJudgeError):
    """Histogram edges must be strictly increasing with at least two entries."""
