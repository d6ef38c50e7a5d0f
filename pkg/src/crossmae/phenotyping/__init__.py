"""Vegetation indices, per-plot features and the downstream evaluation harness."""

from .indices import INDICES, IndexDefinition, compute_index
from .features import MODALITY_SETS, extract_features, feature_columns, feature_table
from .cv import CvSplit, build_cv, reshape_mgf
from .evaluate import SEARCH_SPACES, EvalResult, evaluate, pearson_r2

__all__ = [
    "INDICES",
    "IndexDefinition",
    "compute_index",
    "MODALITY_SETS",
    "extract_features",
    "feature_columns",
    "feature_table",
    "CvSplit",
    "build_cv",
    "reshape_mgf",
    "SEARCH_SPACES",
    "EvalResult",
    "evaluate",
    "pearson_r2",
]
