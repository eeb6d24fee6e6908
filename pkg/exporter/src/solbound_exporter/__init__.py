"""Trace torch programs on the meta device and export einsum graph files."""

__version__ = "0.1.0"

from .emit import trace_and_export  # noqa: F401
from .mappings import (  # noqa: F401
    MappingValidationError,
    UnsupportedOperatorError,
    convert,
    emulate,
    validate_mapping,
)
from .tracing import trace_program  # noqa: F401
