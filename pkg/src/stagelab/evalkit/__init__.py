"""AUC metrics, threshold crossing, robustness-dip statistics and reports."""
from .metrics import (
    AucCurve,
    BoxStats,
    DipReport,
    auc_binary,
    auc_multiclass,
    auc_score,
    box_stats,
    dip_report,
    threshold_epoch,
)
from .report import CSV_HEADER, curves_to_csv, curves_to_svg, emit, emit_per_curve

__all__ = [
    "AucCurve", "BoxStats", "CSV_HEADER", "DipReport", "auc_binary", "auc_multiclass",
    "auc_score", "box_stats", "curves_to_csv", "curves_to_svg", "dip_report", "emit",
    "emit_per_curve", "threshold_epoch",
]
