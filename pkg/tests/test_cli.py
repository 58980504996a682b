"""Tests for the ftrsec command line."""
import csv
import io
import os
import sys

import pytest

sys.path.insert(0, os.path.join(os.path.dirname(__file__), '..'))

from src.cli.main import main
from src.cli.sweep import SweepOrchestrator, SweepPoint, SweepRange
from src.cli.validate import CheckResult, format_report
from src.utils.config import Config
from src.utils.errors import ConfigError
from src.utils.scenario_config import ScenarioConfig
from tests.scenarios import EXAMPLE_SCENARIO, REFERENCE_TRUNCATION

EXAMPLE_SCENARIO_PATH = os.path.join(os.path.dirname(os.path.abspath(__file__)), "..", "docs", "scenario.example.cfg")

IDENTICAL_CHANNELS = """\
main.m = 5.5
main.k = 8
main.delta = 0.4
main.avg_snr_db = 5
eaves.m = 5.5
eaves.k = 8
eaves.delta = 0.4
eaves.avg_snr_db = 5
"""


def run(capsys, *argv) -> tuple[int, str]:
    code = main(list(argv))
    return code, capsys.readouterr().out


def csv_rows(text: str) -> list[dict]:
    return list(csv.DictReader(io.StringIO(text)))


def report(text: str) -> dict:
    return dict(line.split(": ", 1) for line in text.strip().splitlines())


class TestTruncationCommand:
    """Test ``ftrsec truncation``."""

    def test_reference_sets(self, isolated_env, capsys):
        """Test the reference sets reproduce the published orders."""
        code, out = run(capsys, "truncation", "--reference-sets")
        assert code == 0
        rows = csv_rows(out)
        assert [row["channel"] for row in rows] == ["reference"] * 3
        for row, ((m, k, delta), (n, eps)) in zip(rows, REFERENCE_TRUNCATION.items()):
            assert (float(row["m"]), float(row["k"]), float(row["delta"])) == (m, k, delta)
            assert int(row["n_trunc"]) == n
            assert float(row["eps"]) == pytest.approx(eps, rel=0.02)
            assert row["verified"] == "true"

    def test_scenario_channels(self, isolated_env, scenario_file, capsys):
        """Test one row per channel of the scenario."""
        code, out = run(capsys, "truncation", "--config", str(scenario_file))
        assert code == 0
        rows = csv_rows(out)
        assert [row["channel"] for row in rows] == ["main", "eaves"]
        assert all(float(row["eps"]) <= 1e-5 for row in rows)

    def test_target_one_gives_order_zero(self, isolated_env, scenario_file, capsys):
        """Test target_eps = 1 is met by N = 0."""
        with open(scenario_file, "a", encoding="utf-8") as f:
            f.write("numerics.target_eps = 1\n")
        code, out = run(capsys, "truncation", "--config", str(scenario_file))
        assert code == 0
        assert {row["n_trunc"] for row in csv_rows(out)} == {"0"}

    def test_unmet_target(self, isolated_env, scenario_file, capsys):
        """Test an order limit below N exits with the numerics code."""
        with open(scenario_file, "a", encoding="utf-8") as f:
            f.write("numerics.n_max = 3\n")
        code, out = run(capsys, "truncation", "--config", str(scenario_file))
        assert code == 3
        assert "false" in out

    def test_config_required(self, isolated_env, capsys):
        """Test a missing --config exits 2."""
        assert run(capsys, "truncation")[0] == 2


class TestMetricCommand:
    """Test ``ftrsec metric``."""

    def test_identical_channels(self, isolated_env, tmp_path, capsys):
        """Test SPSC = 1/2 for identical channels."""
        path = tmp_path / "same.cfg"
        path.write_text(IDENTICAL_CHANNELS, encoding="utf-8")
        code, out = run(capsys, "metric", "--config", str(path), "--metric", "spsc")
        assert code == 0
        values = report(out)
        assert values["metric"] == "spsc"
        assert values["unit"] == "probability"
        assert float(values["value"]) == pytest.approx(0.5, abs=1e-4)

    def test_oracle(self, isolated_env, scenario_file, capsys):
        """Test --oracle reports an agreeing quadrature value."""
        code, out = run(capsys, "metric", "--config", str(scenario_file), "--metric", "asc", "--oracle")
        assert code == 0
        values = report(out)
        assert abs(float(values["oracle_delta"])) <= max(1e-4 * float(values["value"]), 1e-8)

    def test_several_metrics_with_mc(self, isolated_env, scenario_file, capsys):
        """Test one section per metric, each with Monte Carlo columns."""
        code, out = run(capsys, "metric", "--config", str(scenario_file), "--metric", "sop,sopl", "--mc")
        assert code == 0
        sections = [report(section) for section in out.strip().split("\n\n")]
        assert [section["metric"] for section in sections] == ["sop", "sopl"]
        assert all("mc_stderr" in section for section in sections)

    def test_output_file(self, isolated_env, scenario_file, tmp_path, capsys):
        """Test --out writes the report to a file."""
        out_path = tmp_path / "asc.txt"
        code, out = run(capsys, "metric", "--config", str(scenario_file), "--out", str(out_path))
        assert code == 0
        assert out == ""
        assert report(out_path.read_text())["metric"] == "asc"

    @pytest.mark.parametrize("argv", [
        ("metric", "--metric", "asc"),
        ("metric", "--config", "absent.cfg"),
        ("metric", "--config", "{scenario}", "--metric", "capacity"),
    ])
    def test_configuration_errors(self, isolated_env, scenario_file, capsys, argv):
        """Test configuration problems exit 2."""
        argv = [arg.format(scenario=scenario_file) for arg in argv]
        assert run(capsys, *argv)[0] == 2

    def test_invalid_scenario(self, isolated_env, tmp_path, capsys):
        """Test an out-of-domain scenario value exits 2."""
        path = tmp_path / "bad.cfg"
        path.write_text(EXAMPLE_SCENARIO.replace("main.delta = 0.4", "main.delta = 1.4"), encoding="utf-8")
        assert run(capsys, "metric", "--config", str(path))[0] == 2


class TestSweepCommand:
    """Test ``ftrsec sweep``."""

    def test_rho_sweep(self, isolated_env, scenario_file, capsys):
        """Test the CSV layout and SOP decreasing in rho."""
        code, out = run(
            capsys, "sweep", "--config", str(scenario_file), "--metric", "sop",
            "--var", "rho_db", "--from", "-5", "--to", "10", "--points", "4",
        )
        assert code == 0
        assert out.splitlines()[0] == "sweep_var,value,metric,analytic,oracle,mc_mean,mc_stderr,n_trunc_d,n_trunc_e"
        rows = csv_rows(out)
        assert [float(row["value"]) for row in rows] == [-5.0, 0.0, 5.0, 10.0]
        values = [float(row["analytic"]) for row in rows]
        assert all(b < a for a, b in zip(values, values[1:]))
        assert all(row["oracle"] == "" for row in rows)

    def test_rows_per_metric(self, isolated_env, scenario_file, capsys):
        """Test one row per (point, metric) in point order."""
        code, out = run(
            capsys, "sweep", "--config", str(scenario_file), "--metric", "asc,spsc",
            "--var", "m_e", "--from", "1", "--to", "3", "--points", "2", "--oracle",
        )
        assert code == 0
        rows = csv_rows(out)
        assert [(row["value"], row["metric"]) for row in rows] == [
            ("1", "asc"), ("1", "spsc"), ("3", "asc"), ("3", "spsc"),
        ]
        assert all(row["oracle"] != "" for row in rows)

    def test_equal_endpoints(self, isolated_env, scenario_file, capsys):
        """Test --from equal to --to exits 2."""
        code, _ = run(
            capsys, "sweep", "--config", str(scenario_file),
            "--var", "rate", "--from", "1", "--to", "1", "--points", "2",
        )
        assert code == 2

    def test_out_of_domain_point(self, isolated_env, scenario_file, capsys):
        """Test a sweep reaching m <= 0 exits 2."""
        code, _ = run(
            capsys, "sweep", "--config", str(scenario_file),
            "--var", "m_d", "--from", "-1", "--to", "2", "--points", "3",
        )
        assert code == 2

    def test_gnuplot_needs_out(self, isolated_env, scenario_file, capsys):
        """Test --gnuplot without --out exits 2."""
        code, _ = run(
            capsys, "sweep", "--config", str(scenario_file),
            "--var", "rate", "--from", "0", "--to", "2", "--points", "2", "--gnuplot",
        )
        assert code == 2

    def test_gnuplot_script(self, isolated_env, scenario_file, tmp_path, capsys):
        """Test the companion script is written next to the CSV."""
        out_path = tmp_path / "sweep.csv"
        code, _ = run(
            capsys, "sweep", "--config", str(scenario_file), "--out", str(out_path),
            "--var", "rate", "--from", "0", "--to", "2", "--points", "3", "--gnuplot",
        )
        assert code == 0
        script = (tmp_path / "sweep.gp").read_text()
        assert str(out_path) in script
        assert "strcol(3) eq 'asc'" in script

    def test_sweep_range_validation(self):
        """Test SweepRange collects every problem."""
        with pytest.raises(ConfigError) as excinfo:
            SweepRange("rate", 2.0, 1.0, 1)
        assert len(excinfo.value.messages) == 2


class TestSweepOrchestrator:
    """Test the asynchronous sweep driver."""

    @pytest.mark.asyncio
    async def test_sequential_run(self, scenario_file):
        """Test rows come back in point order."""
        scenario_config = ScenarioConfig.load(scenario_file)
        points = [
            SweepPoint(scenario_config, "gamma_e_db", value, ("asc",), False, False, 10_000, None, None)
            for value in (0.0, 5.0, 10.0)
        ]
        rows = await SweepOrchestrator(Config(workers=1, coefficient_cache="")).run(points)
        assert [row[1] for row in rows] == [0.0, 5.0, 10.0]
        values = [row[3] for row in rows]
        assert all(b < a for a, b in zip(values, values[1:]))


class TestValidateCommand:
    """Test ``ftrsec validate``."""

    def test_too_few_samples(self, isolated_env, scenario_file, capsys):
        """Test fewer than 10^4 samples exit 2."""
        assert run(capsys, "validate", "--config", str(scenario_file), "--samples", "1000")[0] == 2

    def test_perturbed_coefficient_fails(self, isolated_env, scenario_file, capsys):
        """Test scaling d_1 by 1.01 makes the gate fail."""
        code, out = run(capsys, "validate", "--config", str(scenario_file), "--perturb-d1", "1.01")
        assert code == 4
        lines = {line.split(" | ")[0]: line for line in out.strip().splitlines()}
        assert lines["series_mass[main]"].endswith("FAIL")
        assert lines["summary"].endswith("FAIL")

    @pytest.mark.slow
    def test_report_is_reproducible(self, isolated_env, scenario_file, capsys):
        """Test two runs with the same seed give byte-identical reports."""
        first_code, first = run(capsys, "validate", "--config", str(scenario_file))
        second_code, second = run(capsys, "validate", "--config", str(scenario_file))
        assert first_code == second_code
        assert first == second
        assert first.splitlines()[-1].startswith("summary | ")

    @pytest.mark.slow
    def test_example_scenario_passes(self, isolated_env, capsys):
        """Test the shipped example scenario passes every check."""
        code, out = run(capsys, "validate", "--config", EXAMPLE_SCENARIO_PATH)
        lines = out.strip().splitlines()
        assert [line for line in lines if line.endswith("FAIL")] == []
        assert lines[-1].startswith("summary | ")
        assert lines[-1].endswith("| 0 failed | PASS")
        assert code == 0

    def test_report_format(self):
        """Test report lines and the summary."""
        checks = [CheckResult("a", 1e-3, "<= 1e-2", True), CheckResult("b", 0.5, "<= 1e-2", False)]
        assert format_report(checks).splitlines() == [
            "a | 1.000000e-03 | <= 1e-2 | PASS",
            "b | 5.000000e-01 | <= 1e-2 | FAIL",
            "summary | 2 checks | 1 failed | FAIL",
        ]
