"""Tests for summary-CSV loading and figure generation."""

import math

import pytest

from paretomcts_plots.figures import (
    joint_payoff_means,
    plot_payoff_comparison,
    plot_sat_vs_budget,
    sat_fractions,
)
from paretomcts_plots.frames import SchemaError, load_summary, load_summary_files

HEADER = "config_id,algorithm,r_hat,c_hat,cost_std,sat_m,sat_w,mean_samples\n"


def summary_text(rows):
    lines = [HEADER.strip()]
    for config_id, algorithm, r_hat, c_hat, sat_m, sat_w in rows:
        lines.append(f"{config_id},{algorithm},{r_hat},{c_hat},0.1,{sat_m},{sat_w},100.0")
    return "\n".join(lines) + "\n"


SMALL = summary_text(
    [
        ("a", "tuct", 3.0, 0.1, 1, 1),
        ("b", "tuct", 1.0, 0.3, 0, 1),
        ("a", "ramcp", 2.0, 0.1, 1, 1),
        ("b", "ramcp", 2.0, 0.4, 0, 0),
        ("a", "ccpomcp", 1.0, 0.2, 0, 0),
        ("b", "ccpomcp", 1.0, 0.5, 0, 0),
    ]
)


class TestLoadSummary:
    def test_parses_types(self):
        rows = load_summary(SMALL)
        assert rows[0].config_id == "a"
        assert rows[0].r_hat == 3.0
        assert rows[0].sat_m is True
        assert rows[3].sat_w is False

    def test_missing_columns_are_listed(self):
        with pytest.raises(SchemaError, match=r"\['sat_m', 'sat_w'\]"):
            load_summary("config_id,algorithm,r_hat,c_hat,cost_std,mean_samples\n")

    def test_empty_csv_is_an_error(self):
        with pytest.raises(SchemaError, match="no rows"):
            load_summary(HEADER)

    def test_files_keyed_by_stem(self, tmp_path):
        path = tmp_path / "campaign.csv"
        path.write_text(SMALL)
        frames = load_summary_files([path])
        assert list(frames) == ["campaign"]
        assert len(frames["campaign"]) == 6


class TestSatFractions:
    def test_fraction_aggregation(self):
        fractions = sat_fractions(load_summary(SMALL))
        assert fractions["tuct"] == (100.0, 0.5, 1.0)
        assert fractions["ramcp"] == (100.0, 0.5, 0.5)
        assert fractions["ccpomcp"] == (100.0, 0.0, 0.0)

    def test_fractions_lie_in_unit_interval(self):
        for _b, f_m, f_w in sat_fractions(load_summary(SMALL)).values():
            assert 0.0 <= f_m <= 1.0 and 0.0 <= f_w <= 1.0


class TestJointPayoffMeans:
    def test_singleton_joint_set(self):
        means = joint_payoff_means(load_summary(SMALL))
        assert means["ramcp"] == (1, 3.0, 2.0)

    def test_empty_joint_set(self):
        count, mean_ref, mean_base = joint_payoff_means(load_summary(SMALL))["ccpomcp"]
        assert count == 0 and math.isnan(mean_ref) and math.isnan(mean_base)

    def test_identical_rows_give_equal_means(self):
        text = summary_text(
            [
                ("a", "tuct", 2.0, 0.1, 1, 1),
                ("b", "tuct", 4.0, 0.1, 1, 1),
                ("a", "ramcp", 2.0, 0.1, 1, 1),
                ("b", "ramcp", 4.0, 0.1, 1, 1),
            ]
        )
        assert joint_payoff_means(load_summary(text))["ramcp"] == (2, 3.0, 3.0)


class TestFigures:
    def write(self, tmp_path, name="campaign", text=SMALL):
        path = tmp_path / f"{name}.csv"
        path.write_text(text)
        return path

    def test_sat_figure_and_series(self, tmp_path):
        path = self.write(tmp_path)
        out, series = plot_sat_vs_budget([path], tmp_path / "figs")
        assert out.exists()
        assert series["tuct"]["sat_m"] == [(100.0, 0.5)]
        assert series["tuct"]["sat_w"] == [(100.0, 1.0)]

    def test_single_config_flat_series(self, tmp_path):
        path = self.write(tmp_path, text=summary_text([("only", "tuct", 1.0, 0.0, 1, 1)]))
        _out, series = plot_sat_vs_budget([path], tmp_path / "figs")
        assert series == {"tuct": {"sat_m": [(100.0, 1.0)], "sat_w": [(100.0, 1.0)]}}

    def test_payoff_figure_and_means(self, tmp_path):
        path = self.write(tmp_path)
        out, means = plot_payoff_comparison([path], tmp_path / "figs")
        assert out.exists()
        assert means["ramcp"] == (1, 3.0, 2.0)
        assert means["ccpomcp"][0] == 0  # annotated empty panel, no bars

    def test_output_filenames_are_deterministic(self, tmp_path):
        path = self.write(tmp_path)
        out1, _ = plot_sat_vs_budget([path], tmp_path / "figs")
        out2, _ = plot_sat_vs_budget([path], tmp_path / "figs")
        assert out1 == out2 == tmp_path / "figs" / "sat_campaign.png"

    def test_multiple_files_form_budget_series(self, tmp_path):
        low = self.write(tmp_path, "low", summary_text([("a", "tuct", 1.0, 0.3, 0, 0)]))
        high_text = summary_text([("a", "tuct", 2.0, 0.1, 1, 1)]).replace("100.0", "1000.0")
        high = self.write(tmp_path, "high", high_text)
        _out, series = plot_sat_vs_budget([low, high], tmp_path / "figs")
        assert series["tuct"]["sat_m"] == [(100.0, 0.0), (1000.0, 1.0)]


class TestCli:
    def test_generates_both_figures(self, tmp_path, capsys):
        from paretomcts_plots.cli import main

        path = tmp_path / "campaign.csv"
        path.write_text(SMALL)
        out_dir = tmp_path / "figs"
        assert main(["--summary", str(path), "--out", str(out_dir)]) == 0
        assert (out_dir / "sat_campaign.png").exists()
        assert (out_dir / "payoff_campaign.png").exists()
        assert capsys.readouterr().out.count("wrote") == 2
