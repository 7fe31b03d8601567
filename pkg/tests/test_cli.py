"""Tests for the command-line interface."""

from pathlib import Path
from unittest.mock import patch

from typer.testing import CliRunner

from stochapprox.core.experiment_service import ExperimentService, ExperimentSummary
from stochapprox.ports.cli import app

runner = CliRunner()

LINEAR_TEXT = """\
[problem]
kind = linear
d = 3
sigma = 0.5

[algorithm]
T = 30
gamma = {gamma}
seeds = 2

[output]
bound = none
"""


def _write(tmp_path: Path, text: str) -> Path:
    path = tmp_path / "experiment.cfg"
    path.write_text(text, encoding="utf-8")
    return path


class TestRunCommand:
    """Tests for the run command."""

    def test_run(self, tmp_path: Path, sgd_config_text: str) -> None:
        """Test a passing run and its reports."""
        config = _write(tmp_path, sgd_config_text)
        out = tmp_path / "out"

        result = runner.invoke(app, ["run", "-c", str(config), "-o", str(out)])

        assert result.exit_code == 0
        assert "Experiment complete!" in result.output
        assert "problem: sgd" in result.output
        assert (out / "aggregate.csv").exists()

    def test_seeds_option(self, tmp_path: Path) -> None:
        """Test that --seeds replaces the configured replicates."""
        config = _write(tmp_path, LINEAR_TEXT.format(gamma=0.1))

        result = runner.invoke(app, ["run", "-c", str(config), "-o", str(tmp_path / "out"), "--seeds", "5"])

        assert result.exit_code == 0
        assert "replicates: 5" in result.output

    def test_divergence_exit_code(self, tmp_path: Path) -> None:
        """Test that a diverging run exits with 2."""
        config = _write(tmp_path, LINEAR_TEXT.format(gamma=5.0))

        result = runner.invoke(app, ["run", "-c", str(config), "-o", str(tmp_path / "out")])

        assert result.exit_code == 2
        assert "diverged" in result.output

    def test_failed_check_exit_code(self, tmp_path: Path) -> None:
        """Test that a violated bound exits with 3."""
        config = _write(tmp_path, LINEAR_TEXT.format(gamma=0.1))
        failed = ExperimentSummary(
            problem="linear", T=30, replicates=2, bound="constant_step", statistic="average",
            final_mean=1.0, final_se=0.0, final_bound=0.5, check_passed=False, violations=4,
            stopping="last", output_W=1.0,
        )

        with patch.object(ExperimentService, "run", return_value=failed):
            result = runner.invoke(app, ["run", "-c", str(config)])

        assert result.exit_code == 3
        assert "Bound check failed at 4 horizons." in result.output

    def test_parse_error_exit_code(self, tmp_path: Path) -> None:
        """Test that a malformed file exits with 1 and names the line."""
        config = _write(tmp_path, "[problem]\nkind = quantum\n")

        result = runner.invoke(app, ["run", "-c", str(config)])

        assert result.exit_code == 1
        assert "line 2" in result.output

    def test_missing_file(self, tmp_path: Path) -> None:
        """Test that a missing file exits with 1."""
        result = runner.invoke(app, ["run", "-c", str(tmp_path / "absent.cfg")])

        assert result.exit_code == 1

    def test_config_and_preset_exclusive(self, tmp_path: Path, sgd_config_text: str) -> None:
        """Test that exactly one of --config and --preset is required."""
        config = _write(tmp_path, sgd_config_text)

        neither = runner.invoke(app, ["run"])
        both = runner.invoke(app, ["run", "-c", str(config), "-p", "sgd_fast"])

        assert neither.exit_code == 1
        assert both.exit_code == 1
        assert "exactly one" in both.output


class TestCheckCommand:
    """Tests for the check command."""

    def test_check(self, tmp_path: Path) -> None:
        """Test that a valid file reports its constants."""
        config = _write(tmp_path, LINEAR_TEXT.format(gamma=0.1))

        result = runner.invoke(app, ["check", "-c", str(config)])

        assert result.exit_code == 0
        assert "Problem: linear (dimension 3)" in result.output
        assert "gamma_max" in result.output
        assert "Configuration valid." in result.output

    def test_check_preset(self) -> None:
        """Test that a preset can be checked without a file."""
        result = runner.invoke(app, ["check", "-p", "sgd_fast"])

        assert result.exit_code == 0
        assert "Problem: sgd" in result.output


class TestPresetsCommand:
    """Tests for the presets commands."""

    def test_list(self) -> None:
        """Test that every preset is listed."""
        result = runner.invoke(app, ["presets", "list"])

        assert result.exit_code == 0
        assert "sgd_horizon:" in result.output
        assert "spider_quadratic:" in result.output

    def test_show(self) -> None:
        """Test that a preset prints as an experiment file."""
        result = runner.invoke(app, ["presets", "show", "td_fast"])

        assert result.exit_code == 0
        assert "variant = vw" in result.output

    def test_show_unknown(self) -> None:
        """Test the unsupported preset message."""
        result = runner.invoke(app, ["presets", "show", "nope"])

        assert result.exit_code == 1
        assert "Unsupported preset: nope" in result.output
