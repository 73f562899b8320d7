"""Figure rendering for grasp-sampler report CSVs."""

from .figures import CurveData, FigureResult, plot_coverage, plot_precision
from .frame import EmptyData, ReportFrame, SchemaMismatch, load_reports

__version__ = "0.1.0"

__all__ = [
    "CurveData",
    "EmptyData",
    "FigureResult",
    "ReportFrame",
    "SchemaMismatch",
    "load_reports",
    "plot_coverage",
    "plot_precision",
]
