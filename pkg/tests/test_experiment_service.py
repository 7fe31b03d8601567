"""Tests for the experiment service."""

import csv
from pathlib import Path

import numpy as np
import pytest

from stochapprox.config import AGGREGATE_HEADER, TRAJECTORY_HEADER
from stochapprox.core.experiment_service import ExperimentService, run_experiment
from stochapprox.core.presets import PRESETS, get_preset
from stochapprox.errors import StochApproxError
from stochapprox.ports.config_parser import parse_config

LINEAR_TEXT = """\
[problem]
kind = linear
d = 3
sigma = 0.5

[algorithm]
T = 30
gamma = 0.1
seeds = 3

[output]
bound = fast_recursion
"""


def _read_csv(path: Path) -> list:
    with path.open(encoding="utf-8", newline="") as handle:
        return list(csv.reader(handle))


class TestSetup:
    """Tests for problem construction."""

    def test_sgd(self, sgd_config_text: str) -> None:
        """Test the SGD instance and its derived constants."""
        setup = ExperimentService(parse_config(sgd_config_text)).setup()

        np.testing.assert_array_equal(setup.w0, np.zeros(2))
        assert setup.rc.L_V == pytest.approx(2.0)
        assert setup.dc is not None
        assert setup.dc.gamma_max == pytest.approx(1.0)
        assert setup.inputs["W0"] > 0.0

    def test_setup_is_cached(self, sgd_config_text: str) -> None:
        """Test that the instance is built once."""
        service = ExperimentService(parse_config(sgd_config_text))

        assert service.setup() is service.setup()

    def test_linear(self) -> None:
        """Test that the linear field starts at the all-ones vector."""
        setup = ExperimentService(parse_config(LINEAR_TEXT)).setup()

        np.testing.assert_array_equal(setup.w0, np.ones(3))
        assert setup.inputs["W0"] == pytest.approx(3.0)


class TestRun:
    """Tests for ExperimentService.run."""

    def test_reports(self, sgd_config_text: str, tmp_path: Path) -> None:
        """Test the three report files and their headers."""
        summary = ExperimentService(parse_config(sgd_config_text)).run(tmp_path)

        trajectory = _read_csv(tmp_path / "trajectory.csv")
        agg = _read_csv(tmp_path / "aggregate.csv")
        assert trajectory[0] == TRAJECTORY_HEADER
        assert len(trajectory) == 1 + 4 * 50
        assert agg[0] == AGGREGATE_HEADER
        assert len(agg) == 1 + 50
        assert (tmp_path / "summary.txt").read_text(encoding="utf-8").splitlines() == summary.lines()
        assert summary.passed

    def test_summary_lines(self, sgd_config_text: str, tmp_path: Path) -> None:
        """Test the summary keys and values."""
        summary = ExperimentService(parse_config(sgd_config_text)).run(tmp_path)

        keys = [line.split(":", 1)[0] for line in summary.lines()]
        assert keys[:4] == ["problem", "T", "replicates", "bound"]
        assert "check_passed" in keys
        assert "oracle_calls" not in keys
        assert summary.T == 50
        assert summary.statistic == "average"

    def test_reproducible_bytes(self, sgd_config_text: str, tmp_path: Path) -> None:
        """Test that two runs with one master seed write identical files."""
        config = parse_config(sgd_config_text)
        ExperimentService(config).run(tmp_path / "a")
        ExperimentService(config).run(tmp_path / "b")

        for name in ("trajectory.csv", "aggregate.csv", "summary.txt"):
            assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()

    def test_master_seed_override(self, tmp_path: Path) -> None:
        """Test that another master seed changes the trajectories."""
        config = parse_config(LINEAR_TEXT)
        ExperimentService(config).run(tmp_path / "a")
        ExperimentService(config).run(tmp_path / "b", master_seed=1)

        assert (tmp_path / "a" / "trajectory.csv").read_bytes() != (tmp_path / "b" / "trajectory.csv").read_bytes()

    def test_seeds_override(self, tmp_path: Path) -> None:
        """Test that explicit seeds replace the configured ones."""
        summary = ExperimentService(parse_config(LINEAR_TEXT)).run(tmp_path, seeds=[5])

        assert summary.replicates == 1
        assert summary.final_se == 0.0
        assert {row[0] for row in _read_csv(tmp_path / "trajectory.csv")[1:]} == {"5"}

    def test_trajectories_optional(self, tmp_path: Path) -> None:
        """Test that trajectory.csv can be switched off."""
        config = parse_config(LINEAR_TEXT + "trajectories = false\n")

        ExperimentService(config).run(tmp_path)

        assert not (tmp_path / "trajectory.csv").exists()
        assert (tmp_path / "aggregate.csv").exists()

    def test_fast_recursion_first_horizon(self, tmp_path: Path) -> None:
        """Test that the recursion bound starts at W(w0)."""
        summary = run_experiment(parse_config(LINEAR_TEXT), tmp_path)
        first = _read_csv(tmp_path / "aggregate.csv")[1]

        assert float(first[1]) == pytest.approx(3.0)
        assert float(first[3]) == pytest.approx(3.0)
        assert summary.passed

    @pytest.mark.parametrize(
        "text",
        [
            LINEAR_TEXT,
            "[problem]\nkind = td\nstates = 5\nd = 2\n"
            "[algorithm]\nT = 20\ngamma = 0.05\nseeds = 2\n[output]\nbound = none\n",
            "[problem]\nkind = em\nn = 40\nmeans = -2.0, 2.0\nalgo = minibatch\nsize = 5\n"
            "[algorithm]\nT = 20\ngamma = 0.05\nseeds = 2\n[output]\nbound = none\n",
        ],
    )
    def test_report_cells_are_numeric(self, text: str, tmp_path: Path) -> None:
        """Test that every CSV cell is a plain number and every summary value prints as one."""
        summary = ExperimentService(parse_config(text)).run(tmp_path)

        for name in ("aggregate.csv", "trajectory.csv"):
            for row in _read_csv(tmp_path / name)[1:]:
                for cell in row:
                    float(cell)
        for line in summary.lines():
            assert "np." not in line

    def test_unavailable_bound(self, tmp_path: Path) -> None:
        """Test that a bound without instance quantities is rejected."""
        config = parse_config(LINEAR_TEXT.replace("fast_recursion", "gauss_southwell"))

        with pytest.raises(StochApproxError, match="not available for problem 'linear'"):
            ExperimentService(config).run(tmp_path)

    def test_td_fast_needs_vw(self, tmp_path: Path) -> None:
        """Test that the TD last-iterate bound needs the vw pair."""
        text = "[problem]\nkind = td\nstates = 5\nd = 2\n[algorithm]\nT = 20\nschedule = fast\nseeds = 2\n[output]\nbound = td_fast\n"

        with pytest.raises(StochApproxError, match="variant = vw"):
            ExperimentService(parse_config(text)).run(tmp_path)

    def test_td_averaged_iterate(self, tmp_path: Path) -> None:
        """Test that the robust TD bound is compared with the averaged iterate."""
        text = (
            "[problem]\nkind = td\nstates = 5\nd = 2\n"
            "[algorithm]\nT = 40\nschedule = horizon\nstopping = average\nseeds = 2\n"
            "[output]\nbound = td_robust\n"
        )

        summary = ExperimentService(parse_config(text)).run(tmp_path)

        assert summary.statistic == "averaged_iterate"
        assert summary.T == 40

    def test_spider(self, tmp_path: Path) -> None:
        """Test the SA-SPIDER loop sizes and oracle count."""
        text = (
            "[problem]\nkind = spider\nn = 16\nd = 3\nmu = 1.0\nL = 4.0\n"
            "[algorithm]\nT = 32\nseeds = 2\n[output]\nbound = spider\n"
        )

        summary = ExperimentService(parse_config(text)).run(tmp_path)

        assert summary.T == 32
        assert summary.oracle_calls == 16 * 8 + 2 * 8 * 4 * 4
        assert "oracle_calls: 384" in summary.lines()

    def test_rate_sweep(self, tmp_path: Path) -> None:
        """Test that a horizon sweep adds the fitted slope."""
        text = LINEAR_TEXT.replace("seeds = 3", "seeds = 2\nhorizons = 10, 30, 100, 1000")

        summary = ExperimentService(parse_config(text)).run(tmp_path)

        assert summary.rate is not None
        assert any(line.startswith("slope: ") for line in summary.lines())


@pytest.mark.slow
class TestPresets:
    """Tests for the shipped presets."""

    @pytest.mark.parametrize("name", ["sgd_horizon", "sgd_fast", "td_robust", "td_fast", "spider_quadratic", "compressed_top1"])
    def test_bound_holds(self, name: str, tmp_path: Path) -> None:
        """Test that the preset experiment stays below its bound."""
        summary = ExperimentService(parse_config(get_preset(name))).run(tmp_path)

        assert summary.passed

    def test_sgd_horizon_rate(self, tmp_path: Path) -> None:
        """Test the 1/sqrt(T) decay of the horizon-tuned SGD sweep."""
        summary = ExperimentService(parse_config(get_preset("sgd_horizon"))).run(tmp_path)

        assert summary.rate is not None
        assert -0.65 <= summary.rate.slope <= -0.35

    def test_td_robust_rate(self, tmp_path: Path) -> None:
        """Test the 1/sqrt(T) decay of the averaged TD iterate under the robust step."""
        summary = ExperimentService(parse_config(get_preset("td_robust"))).run(tmp_path)

        assert summary.rate is not None
        assert -0.65 <= summary.rate.slope <= -0.35

    def test_spider_rate(self, tmp_path: Path) -> None:
        """Test the 1/T decay of the averaged W under the tuned SA-SPIDER step."""
        summary = ExperimentService(parse_config(get_preset("spider_quadratic"))).run(tmp_path)

        assert summary.rate is not None
        assert summary.rate.slope <= -0.8

    def test_em_minibatch_runs(self, tmp_path: Path) -> None:
        """Test that the stochastic EM preset writes its reports."""
        summary = ExperimentService(parse_config(get_preset("em_minibatch"))).run(tmp_path)

        assert summary.statistic == "average"
        assert (tmp_path / "aggregate.csv").exists()

    def test_every_preset_parses(self) -> None:
        """Test that every preset is a valid experiment file."""
        for name in PRESETS:
            assert parse_config(get_preset(name)).problem.kind
