"""Figure construction from loaded summary frames.

Both plot functions aggregate the CSV rows and nothing more, so every
plotted value can be recomputed exactly from the input files.  They return
the plotted data alongside writing one image file per figure, which keeps
them testable without parsing images back.

The summary schema carries no explicit budget column; the recorded mean
samples per step serves as the budget axis, with each input CSV
contributing one budget point per algorithm.
"""

from __future__ import annotations

from pathlib import Path
from typing import Sequence

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

from .frames import SummaryRow, load_summary_files

REFERENCE_ALGORITHM = "tuct"


def sat_fractions(rows: Sequence[SummaryRow]) -> dict[str, tuple[float, float, float]]:
    """Per algorithm: (mean samples per step, SAT_M fraction, SAT_W fraction)."""
    out: dict[str, tuple[float, float, float]] = {}
    for algorithm in sorted({r.algorithm for r in rows}):
        group = [r for r in rows if r.algorithm == algorithm]
        n = len(group)
        out[algorithm] = (
            sum(r.mean_samples for r in group) / n,
            sum(r.sat_m for r in group) / n,
            sum(r.sat_w for r in group) / n,
        )
    return out


def joint_payoff_means(
    rows: Sequence[SummaryRow], reference: str = REFERENCE_ALGORITHM
) -> dict[str, tuple[int, float, float]]:
    """Per baseline: joint weakly-satisfied config count and both mean payoffs."""
    reference_rows = {r.config_id: r for r in rows if r.algorithm == reference and r.sat_w}
    out: dict[str, tuple[int, float, float]] = {}
    for algorithm in sorted({r.algorithm for r in rows} - {reference}):
        joint = [
            (reference_rows[r.config_id], r)
            for r in rows
            if r.algorithm == algorithm and r.sat_w and r.config_id in reference_rows
        ]
        if joint:
            n = len(joint)
            out[algorithm] = (
                n,
                sum(ref.r_hat for ref, _b in joint) / n,
                sum(b.r_hat for _ref, b in joint) / n,
            )
        else:
            out[algorithm] = (0, float("nan"), float("nan"))
    return out


def plot_sat_vs_budget(summary_paths: Sequence, out_dir) -> tuple[Path, dict]:
    """Satisfaction fractions against search budget, one point per input CSV.

    Plain lines show the SAT_M fraction, dotted lines the SAT_W fraction.
    Returns the image path and the plotted series per algorithm.
    """
    frames = load_summary_files(summary_paths)
    series: dict[str, dict[str, list[tuple[float, float]]]] = {}
    for _stem, rows in frames.items():
        for algorithm, (budget, f_m, f_w) in sat_fractions(rows).items():
            entry = series.setdefault(algorithm, {"sat_m": [], "sat_w": []})
            entry["sat_m"].append((budget, f_m))
            entry["sat_w"].append((budget, f_w))

    fig, ax = plt.subplots(figsize=(6, 4))
    for algorithm, entry in sorted(series.items()):
        for kind, style in (("sat_m", "-"), ("sat_w", ":")):
            points = sorted(entry[kind])
            ax.plot(
                [b for b, _f in points],
                [f for _b, f in points],
                style,
                marker="o",
                label=f"{algorithm} ({kind})",
            )
    ax.set_xlabel("mean samples per step")
    ax.set_ylabel("fraction of satisfied configurations")
    ax.set_ylim(-0.05, 1.05)
    ax.set_title(", ".join(frames))
    ax.legend(fontsize=8)
    out_path = _save(fig, out_dir, "sat", frames)
    return out_path, series


def plot_payoff_comparison(summary_paths: Sequence, out_dir) -> tuple[Path, dict]:
    """Mean payoff bars over jointly weakly-satisfied configurations.

    One bar pair per baseline algorithm against the reference planner;
    baselines with an empty joint set are annotated instead of plotted.
    Returns the image path and the per-baseline means.
    """
    frames = load_summary_files(summary_paths)
    rows = [row for frame in frames.values() for row in frame]
    means = joint_payoff_means(rows)

    fig, ax = plt.subplots(figsize=(6, 4))
    positions, labels = [], []
    for i, (algorithm, (count, mean_ref, mean_base)) in enumerate(sorted(means.items())):
        if count == 0:
            ax.text(2 * i + 0.5, 0.0, f"{algorithm}:\nempty joint set", ha="center", fontsize=8)
        else:
            ax.bar([2 * i, 2 * i + 1], [mean_ref, mean_base], color=["C0", "C1"])
        positions += [2 * i, 2 * i + 1]
        labels += [REFERENCE_ALGORITHM, algorithm]
    ax.set_xticks(positions, labels, fontsize=8)
    ax.set_ylabel("mean payoff over jointly satisfied configs")
    ax.set_title(", ".join(frames))
    out_path = _save(fig, out_dir, "payoff", frames)
    return out_path, means


def _save(fig, out_dir, kind: str, frames: dict) -> Path:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    out_path = out_dir / f"{kind}_{'_'.join(frames)}.png"
    fig.savefig(out_path, dpi=150, bbox_inches="tight")
    plt.close(fig)
    return out_path
