from .features import ExtractorNotReady, FeatureSet, extract_features, parse_extractor
from .report import GateResult, MetricReport, ModeError, evaluate, quality_gate, real_fake_curve, write_curve_csv
from .scores import fid, inception_score, kid, mmd2_unbiased, polynomial_kernel, precision_recall

__all__ = [
    "ExtractorNotReady",
    "FeatureSet",
    "GateResult",
    "MetricReport",
    "ModeError",
    "evaluate",
    "extract_features",
    "fid",
    "inception_score",
    "kid",
    "mmd2_unbiased",
    "parse_extractor",
    "polynomial_kernel",
    "precision_recall",
    "quality_gate",
    "real_fake_curve",
    "write_curve_csv",
]
