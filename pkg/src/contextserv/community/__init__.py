"""Context service communities: monitoring, quality evaluation, scoring and selection."""

from .broker import (
    BoundKind,
    CommunityBroker,
    CommunityConfig,
    ProviderEndpoint,
    ProviderRecord,
    SelectionConstraint,
    rank_qualities,
)
from .monitor import InvokeEvent, MonitorLog, RateEvent, StateEvent, parse_event
from .quality import ATTRIBUTES, NEGATIVE_BY_DEFAULT, QualityVector, canonical_attribute, evaluate_quality
from .scoring import (
    AttributeSpec,
    Polarity,
    ScoreMatrix,
    SelectionResult,
    ValueMatrix,
    build_score_matrix,
    rank,
    select_from_matrix,
    utility,
)

__all__ = [
    "ATTRIBUTES",
    "AttributeSpec",
    "BoundKind",
    "CommunityBroker",
    "CommunityConfig",
    "InvokeEvent",
    "MonitorLog",
    "NEGATIVE_BY_DEFAULT",
    "Polarity",
    "ProviderEndpoint",
    "ProviderRecord",
    "QualityVector",
    "RateEvent",
    "ScoreMatrix",
    "SelectionConstraint",
    "SelectionResult",
    "StateEvent",
    "ValueMatrix",
    "build_score_matrix",
    "canonical_attribute",
    "evaluate_quality",
    "parse_event",
    "rank",
    "rank_qualities",
    "select_from_matrix",
    "utility",
]
