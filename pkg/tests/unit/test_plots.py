"""
Unit tests for SVG plots and console charts.
"""

import pytest

from geoformer.cli.plots import bar_rows, save_histogram_svg, save_line_svg, sparkline


@pytest.mark.unit
class TestSvgPlots:
    def test_line_plot_is_reproducible(self, tmp_path):
        values = [0.1, 0.5, 0.3, 0.9]

        a = save_line_svg(values, tmp_path / "a" / "line.svg", "t", "x", "y", marker_at=2)
        b = save_line_svg(values, tmp_path / "b" / "line.svg", "t", "x", "y", marker_at=2)

        assert a.read_text().lstrip().startswith(("<?xml", "<svg"))
        assert a.read_bytes() == b.read_bytes()

    def test_histogram(self, tmp_path):
        path = save_histogram_svg([1, 0, 3], [0.0, 0.5, 0.75, 1.0], tmp_path / "h.svg", "t", "rate")
        assert "</svg>" in path.read_text()


@pytest.mark.unit
class TestTextCharts:
    def test_sparkline_scales_to_maximum(self):
        assert sparkline([0, 4, 8]) == " ▄█"
        assert sparkline([0, 0]) == "  "
        assert sparkline([]) == ""

    def test_bar_rows(self):
        rows = bar_rows(["a", "bbb"], [1.0, 2.0], width=4)
        assert rows == ["  a | ## 1", "bbb | #### 2"]
