"""Figures from LNS solver trace and aggregate CSV files."""

from .figures import (
    accuracy_bands,
    constraint_satisfaction_at,
    cumulative_solved,
    plot_accuracy_curve,
    plot_solved_curve,
    plot_violin_cumulative,
)
from .frames import (
    TraceFormatError,
    load_aggregate,
    load_trace,
    load_traces,
    validate_trace,
)

__version__ = "0.1.0"
