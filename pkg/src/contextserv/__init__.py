"""Context-aware service modelling and execution.

Contexts are retrieved from quality-ranked provider communities, composed
through statecharts, and used by rules woven into business processes as
aspects that can be replaced while processes run.
"""

from __future__ import annotations

from .bundle import parse_bundle, parse_bundle_text
from .errors import ContextServError, ParseError
from .model import ModelBundle
from .process import Engine, Mode, transform
from .runtime import build_runtime, prepare_run, run_bundle
from .validation import ValidationReport, validate_bundle

__version__ = "0.1.0"

__all__ = [
    "ContextServError",
    "Engine",
    "Mode",
    "ModelBundle",
    "ParseError",
    "ValidationReport",
    "build_runtime",
    "parse_bundle",
    "parse_bundle_text",
    "prepare_run",
    "run_bundle",
    "transform",
    "validate_bundle",
]
