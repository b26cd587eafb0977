"""Detector-aware multi-object tracking evaluation toolkit."""

from .mot_io import (Box, EvaluationBundle, Observation, SequenceMeta, SourceKind,
                     filter_ground_truth, load_bundle)
from .assignment import Assignment, CostMatrix, build_iou_cost, hungarian_solve, iou
from .effort import TemScores, evaluate_sequence, tem_score
from .baselines import BaselineScores, evaluate_baselines
from .analysis import CorrelationMatrix, RunKey, ScoreTable, correlation_matrix, pearson

__version__ = "0.1.0"

__all__ = [
    "Box", "Observation", "SequenceMeta", "SourceKind", "EvaluationBundle",
    "load_bundle", "filter_ground_truth",
    "Assignment", "CostMatrix", "build_iou_cost", "hungarian_solve", "iou",
    "TemScores", "evaluate_sequence", "tem_score",
    "BaselineScores", "evaluate_baselines",
    "RunKey", "ScoreTable", "CorrelationMatrix", "correlation_matrix", "pearson",
    "__version__",
]
