"""
Custom exceptions for diffpaint.
"""

from typing import Any


class DiffPaintError(Exception):
    """Base exception for all diffpaint errors."""

    pass


class ScheduleError(DiffPaintError):
    """Raised when a noise schedule is built with bad bounds or indexed out of
    range."""

    def __init__(self, message: str, t: int | None = None, T: int | None = None):
        super().__init__(message)
        self.t = t
        self.T = T


class FieldError(DiffPaintError):
    """Raised on shape or dimension violations of fields and masks."""

    def __init__(
        self,
        message: str,
        expected: tuple[int, ...] | None = None,
        actual: tuple[int, ...] | None = None,
    ):
        if expected is not None and actual is not None:
            message += f" (expected {expected}, got {actual})"
        super().__init__(message)
        self.expected = expected
        self.actual = actual


class MaskError(DiffPaintError):
    """Raised when a mask cannot be generated for the requested kind/size."""

    def __init__(self, message: str, kind: str | None = None):
        super().__init__(message)
        self.kind = kind


class ConfigError(DiffPaintError):
    """Raised when a sampler or run configuration violates its invariants."""

    def __init__(self, message: str, problems: list[str] | None = None):
        self.problems = problems or []
        if self.problems:
            message += ": " + "; ".join(self.problems)
        super().__init__(message)


class SamplerError(DiffPaintError):
    """Raised when the reverse process is driven outside its valid range."""

    def __init__(self, message: str, t: int | None = None):
        super().__init__(message)
        self.t = t


class ModelFormatError(DiffPaintError):
    """Raised when a model file cannot be read or written."""

    def __init__(
        self,
        message: str,
        file_path: str | None = None,
        original_error: Exception | None = None,
    ):
        super().__init__(message)
        self.file_path = file_path
        self.original_error = original_error


class TrainingError(DiffPaintError):
    """Raised when training cannot start or produces a non-finite loss."""

    def __init__(
        self,
        message: str,
        step: int | None = None,
        diagnostics: dict[str, Any] | None = None,
    ):
        self.step = step
        self.diagnostics = diagnostics or {}
        if step is not None:
            message = f"{message} at step {step}"
        if self.diagnostics:
            details = ", ".join(f"{k}={v}" for k, v in self.diagnostics.items())
            message += f" ({details})"
        super().__init__(message)


class ImageReadError(DiffPaintError):
    """Raised when an image, mask or latent file cannot be read or parsed."""

    def __init__(
        self,
        message: str,
        file_path: str | None = None,
        original_error: Exception | None = None,
    ):
        super().__init__(message)
        self.file_path = file_path
        self.original_error = original_error


class ReportError(DiffPaintError):
    """Raised when a report cannot be exported or parsed."""

    def __init__(self, message: str, report_type: str | None = None):
        super().__init__(message)
        self.report_type = report_type
