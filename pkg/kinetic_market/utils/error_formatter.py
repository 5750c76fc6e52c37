"""Error formatting utilities for command-line messages."""

from typing import List

from ..models.errors import ErrorDetail, ErrorSeverity


def format_error_message(
    message: str,
    field: str = None,
    error_type: str = None,
    hint: str = None
) -> str:
    """
    Format a user-facing error message with its location.

    Args:
        message: Human-readable error description
        field: Scenario field the error refers to
        error_type: Type of error (e.g., "CFL_VIOLATION", "MISSING_FIELD")
        hint: Optional suggestion appended after the message

    Returns:
        Formatted error message string
    """
    parts = []
    if field:
        parts.append(field)
    if error_type:
        parts.append(error_type)

    location = ", ".join(parts) if parts else "scenario"
    result = f"Error at {location}: {message}"

    if hint:
        result += f"\n\nHint: {hint}"

    return result


def format_parse_error(error: Exception, content: str = None) -> ErrorDetail:
    """
    Turn a JSON decoding failure into a violation record.

    Args:
        error: The exception raised while parsing
        content: Optional document text, used to quote the offending line

    Returns:
        ErrorDetail describing the failure
    """
    message = str(error)
    field = None
    if hasattr(error, "lineno"):
        field = f"line {error.lineno}, column {getattr(error, 'colno', '?')}"
        message = f"Invalid JSON format: {getattr(error, 'msg', error)}"
        if content:
            lines = content.split("\n")
            if 0 <= error.lineno - 1 < len(lines):
                message += f" near: {lines[error.lineno - 1].strip()}"
    return ErrorDetail(
        severity=ErrorSeverity.ERROR,
        message=message,
        error_type="INVALID_JSON",
        field=field,
    )


def format_violations(violations: List[ErrorDetail]) -> str:
    """One line per violation, errors before warnings."""
    ordered = sorted(violations, key=lambda v: v.severity.value != "ERROR")
    return "\n".join(v.format_message() for v in ordered)
