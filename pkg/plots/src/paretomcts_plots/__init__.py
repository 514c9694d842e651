"""Figures from benchmark summary CSVs: satisfaction rates and payoff bars."""

from .frames import SummaryRow, load_summary, load_summary_files
from .figures import plot_payoff_comparison, plot_sat_vs_budget

__all__ = [
    "SummaryRow",
    "load_summary",
    "load_summary_files",
    "plot_payoff_comparison",
    "plot_sat_vs_budget",
]
