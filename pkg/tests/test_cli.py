"""Tests for the command line interface."""

import tempfile
from pathlib import Path

from click.testing import CliRunner

from femto_handover import __version__
from femto_handover.cli import cli, run_command
from femto_handover.storage import load_topology, read_csv

SMALL = ["--set", "topology.n_faps=50", "--quiet"]


def _lines(text: str):
    return [line for line in text.splitlines() if line.strip()]


class TestValidate:
    """Test the validate command."""

    def test_valid_file(self):
        runner = CliRunner()
        with tempfile.TemporaryDirectory() as tmpdir:
            path = Path(tmpdir) / "ok.toml"
            path.write_text("[topology]\nn_faps = 10\n", encoding="utf-8")
            result = runner.invoke(cli, ["validate", str(path)])
        assert result.exit_code == 0
        assert "N_ch = 100" in result.output

    def test_invalid_file(self):
        """Every violation is listed and the exit status is 1."""
        runner = CliRunner()
        with tempfile.TemporaryDirectory() as tmpdir:
            path = Path(tmpdir) / "bad.toml"
            path.write_text("[neighbor]\ns_t1_dbm = -95\n\n[traffic]\nalpha = 2.0\n", encoding="utf-8")
            result = runner.invoke(cli, ["validate", str(path)])
        assert result.exit_code == 1
        assert "s_t1_dbm" in result.output
        assert "alpha" in result.output

    def test_missing_file(self):
        result = CliRunner().invoke(cli, ["validate", "/nonexistent/scenario.toml"])
        assert result.exit_code == 1


class TestAnalytic:
    """Test the analytic command."""

    def test_prints_solution(self):
        result = CliRunner().invoke(cli, ["analytic", "--n", "100", "--quiet"])
        assert result.exit_code == 0
        assert "p_b_m = " in result.output
        assert "converged = True" in result.output

    def test_csv_output(self):
        runner = CliRunner()
        with tempfile.TemporaryDirectory() as tmpdir:
            path = Path(tmpdir) / "solution.csv"
            result = runner.invoke(cli, ["analytic", "--quiet", "-o", str(path)])
            rows = read_csv(path)
        assert result.exit_code == 0
        assert len(rows) == 1
        assert rows[0]["converged"] == "1"

    def test_bad_override(self):
        result = CliRunner().invoke(cli, ["analytic", "--set", "topology.n_faps=20000"])
        assert result.exit_code == 1

    def test_override_without_equals(self):
        result = CliRunner().invoke(cli, ["analytic", "--set", "traffic.alpha"])
        assert result.exit_code == 1


class TestSimulate:
    """Test simulate and topology replay."""

    def test_simulate(self):
        result = CliRunner().invoke(cli, ["simulate", *SMALL, "--horizon", "300", "--seed", "2"])
        assert result.exit_code == 0
        assert "seed = 2" in result.output
        assert "conserved = True" in result.output

    def test_topology_replay(self):
        runner = CliRunner()
        with tempfile.TemporaryDirectory() as tmpdir:
            topo_path = Path(tmpdir) / "topo.json"
            result = runner.invoke(cli, ["topology", *SMALL, "--seed", "3", "-o", str(topo_path)])
            assert result.exit_code == 0
            assert "faps = 50" in result.output
            assert len(load_topology(topo_path).faps) == 50
            replay = runner.invoke(cli, ["simulate", "--quiet", "--horizon", "200", "--topology", str(topo_path)])
        assert replay.exit_code == 0

    def test_missing_topology(self):
        result = CliRunner().invoke(cli, ["simulate", "--quiet", "--topology", "/nonexistent/topo.json"])
        assert result.exit_code == 1


class TestSweep:
    """Test the sweep command."""

    def test_analytic_sweep_to_stdout(self):
        """Eleven points give a header and eleven rows."""
        result = CliRunner().invoke(cli, ["sweep", "--param", "n", "--from", "0", "--to", "1000", "--quiet"])
        assert result.exit_code == 0
        lines = _lines(result.output)
        assert len(lines) == 12
        assert lines[0].startswith("param,value,")
        assert lines[-1].startswith("n,1000,")

    def test_sweep_to_file(self):
        runner = CliRunner()
        with tempfile.TemporaryDirectory() as tmpdir:
            path = Path(tmpdir) / "sweep.csv"
            result = runner.invoke(
                cli,
                ["sweep", "--param", "alpha", "--from", "0", "--to", "1", "--points", "3", "--quiet", "-o", str(path)],
            )
            rows = read_csv(path)
        assert result.exit_code == 0
        assert [row["value"] for row in rows] == ["0.0", "0.5", "1.0"]

    def test_unknown_parameter(self):
        result = CliRunner().invoke(cli, ["sweep", "--param", "nosuch", "--from", "0", "--to", "1"])
        assert result.exit_code == 1

    def test_bad_jobs(self):
        result = CliRunner().invoke(cli, ["sweep", "--param", "n", "--from", "0", "--to", "1", "--jobs", "0"])
        assert result.exit_code == 2


class TestNclBench:
    """Test the ncl-bench command."""

    def test_summary_csv(self):
        result = CliRunner().invoke(
            cli, ["ncl-bench", "--densities", "100,200", "--seeds", "2", "--trials", "3", "--quiet"]
        )
        assert result.exit_code == 0
        lines = _lines(result.output)
        assert len(lines) == 3
        assert lines[0].startswith("n,trials,")

    def test_trials_output(self):
        runner = CliRunner()
        with tempfile.TemporaryDirectory() as tmpdir:
            path = Path(tmpdir) / "trials.csv"
            result = runner.invoke(
                cli,
                ["ncl-bench", "--densities", "100", "--seeds", "1", "--trials", "4", "--quiet", "--trials-output", str(path)],
            )
            rows = read_csv(path)
        assert result.exit_code == 0
        assert len(rows) == 4

    def test_bad_densities(self):
        result = CliRunner().invoke(cli, ["ncl-bench", "--densities", "a,b"])
        assert result.exit_code == 2

    def test_preset_none(self):
        result = CliRunner().invoke(
            cli, ["ncl-bench", "--densities", "100", "--seeds", "1", "--trials", "3", "--preset", "none", "--quiet"]
        )
        assert result.exit_code == 0
        assert len(_lines(result.output)) == 2

    def test_unknown_preset(self):
        result = CliRunner().invoke(cli, ["ncl-bench", "--densities", "100", "--preset", "sparse"])
        assert result.exit_code == 2

    def test_preset_conflicting_with_scenario(self):
        """--set applies on top of the preset; too many FAPs for its smaller macrocell is rejected."""
        result = CliRunner().invoke(
            cli, ["ncl-bench", "--densities", "100", "--seeds", "1", "--set", "topology.n_faps=1300", "--quiet"]
        )
        assert result.exit_code == 1


class TestSignalingTrace:
    """Test the signaling-trace command."""

    def test_f2f_lines(self):
        result = CliRunner().invoke(cli, ["signaling-trace", "--flow", "f2f", "--quiet"])
        assert result.exit_code == 0
        assert len(_lines(result.output)) == 29

    def test_all_flows(self):
        result = CliRunner().invoke(cli, ["signaling-trace", "--quiet"])
        assert len(_lines(result.output)) == 33 + 34 + 29

    def test_failing_gate(self):
        result = CliRunner().invoke(cli, ["signaling-trace", "--flow", "f2f", "--fail", "cac_reject", "--quiet"])
        lines = _lines(result.output)
        assert len(lines) == 12
        assert lines[-1].endswith("cac_rrc")

    def test_csv(self):
        result = CliRunner().invoke(cli, ["signaling-trace", "--flow", "m2f", "--format", "csv", "--quiet"])
        lines = _lines(result.output)
        assert lines[0] == "index,from,to,label"
        assert len(lines) == 35

    def test_unknown_flow(self):
        result = CliRunner().invoke(cli, ["signaling-trace", "--flow", "m2m"])
        assert result.exit_code == 2


class TestGroup:
    """Test the command group itself."""

    def test_version(self):
        result = CliRunner().invoke(cli, ["--version"])
        assert result.exit_code == 0
        assert __version__ in result.output

    def test_unknown_command(self):
        assert CliRunner().invoke(cli, ["nosuch"]).exit_code == 2


class TestRunCommand:
    """Test run_command exit statuses."""

    def test_success(self, capsys):
        assert run_command(["signaling-trace", "--flow", "f2f", "--quiet"]) == 0
        assert len(_lines(capsys.readouterr().out)) == 29

    def test_domain_error(self):
        assert run_command(["validate", "/nonexistent/scenario.toml"]) == 1

    def test_usage_error(self):
        assert run_command(["nosuch"]) == 2
        assert run_command(["signaling-trace", "--flow", "m2m"]) == 2

    def test_version(self):
        assert run_command(["--version"]) == 0
