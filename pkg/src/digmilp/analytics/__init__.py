from .correlation import CorrelationReport, effort_profile, pearson, solver_configs, tuning_correlation
from .predictor import ObjectivePredictor, optimal_values, rel_mse
from .similarity import SimilarityReport, js_distance, js_similarity, shared_histograms
from .stats import METRICS, StatProfile, corpus_stats, instance_stats, summarize

__all__ = [
    "METRICS", "CorrelationReport", "ObjectivePredictor", "SimilarityReport", "StatProfile",
    "corpus_stats", "effort_profile", "instance_stats", "js_distance", "js_similarity",
    "optimal_values", "pearson", "rel_mse", "shared_histograms", "solver_configs", "summarize",
    "tuning_correlation",
]
