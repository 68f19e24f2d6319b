"""Toolkit for aligning, comparing, and evaluating movie audio description.

Pipeline stages, in dependency order: transcript ingestion, AD/dialogue
line classification, cross-track time alignment and AD mapping, similarity
analysis, scene segmentation, question generation, rationale-grounded
answering with CA/AC/CC metrics, and a submission/leaderboard service.
"""

from .alignment import (
    AnchorPair,
    SweepPoint,
    classify_lines,
    find_anchors,
    fit_transform,
    map_ads,
    overlap_score,
    project_interval,
    project_interval_inverse,
    project_time,
    sweep_thresholds,
)
from .config import AppConfig, load_config
from .errors import (
    AdEvalError,
    DegenerateBaseline,
    DegenerateInterval,
    EmptyPlot,
    EmptyText,
    InsufficientAnchors,
    MalformedCue,
    MalformedLine,
    MalformedSubmission,
    MissingADSource,
    MissingVariable,
    NonMonotonicTimestamps,
    QidMismatch,
    SchemaError,
    SchemaViolation,
    TooFewPairs,
    TransportError,
    UnknownSegment,
)
from .gateway import Gateway, HttpProvider, MockProvider, ProviderConfig
from .model import (
    ADMapping,
    AnswerRecord,
    FromContext,
    KindBreakdown,
    LineKind,
    MappingPair,
    MCQA,
    MetricsReport,
    QuestionKind,
    SubmissionSegment,
    Submission,
    SubmittedAd,
    TimeTransform,
    Track,
    TranscriptLine,
    TransformPiece,
    VideoSegment,
    validate,
)
from .prompts import TEMPLATES, PromptTemplate
from .qa_answer import (
    ContextType,
    EvaluationResult,
    accuracy_ratio,
    answer_questions,
    assemble_context,
    evaluate_submission,
    score,
)
from .qa_gen import generate_nu, generate_va, validate_question_set
from .segmentation import SceneSpan, build_segments, segment_movie
from .similarity import (
    CiderCorpus,
    PairScore,
    QuadrantReport,
    cider,
    pair_scores,
    quadrant_report,
    track_pair_summary,
)
from .store import QuestionStore, Toplines

__all__ = [
    "ADMapping",
    "AdEvalError",
    "AnchorPair",
    "AnswerRecord",
    "AppConfig",
    "CiderCorpus",
    "ContextType",
    "DegenerateBaseline",
    "DegenerateInterval",
    "EmptyPlot",
    "EmptyText",
    "EvaluationResult",
    "FromContext",
    "Gateway",
    "HttpProvider",
    "InsufficientAnchors",
    "KindBreakdown",
    "LineKind",
    "MCQA",
    "MalformedCue",
    "MalformedLine",
    "MalformedSubmission",
    "MappingPair",
    "MetricsReport",
    "MissingADSource",
    "MissingVariable",
    "MockProvider",
    "NonMonotonicTimestamps",
    "PairScore",
    "PromptTemplate",
    "ProviderConfig",
    "QidMismatch",
    "QuadrantReport",
    "QuestionKind",
    "QuestionStore",
    "SceneSpan",
    "SchemaError",
    "SchemaViolation",
    "Submission",
    "SubmissionSegment",
    "SubmittedAd",
    "SweepPoint",
    "TEMPLATES",
    "TimeTransform",
    "TooFewPairs",
    "Toplines",
    "Track",
    "TranscriptLine",
    "TransformPiece",
    "TransportError",
    "UnknownSegment",
    "VideoSegment",
    "accuracy_ratio",
    "answer_questions",
    "assemble_context",
    "build_segments",
    "cider",
    "classify_lines",
    "evaluate_submission",
    "find_anchors",
    "fit_transform",
    "generate_nu",
    "generate_va",
    "load_config",
    "map_ads",
    "overlap_score",
    "pair_scores",
    "project_interval",
    "project_interval_inverse",
    "project_time",
    "quadrant_report",
    "score",
    "segment_movie",
    "sweep_thresholds",
    "track_pair_summary",
    "validate",
    "validate_question_set",
]
