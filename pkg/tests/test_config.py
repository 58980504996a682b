"""Tests for runtime configuration and scenario files."""
import math
import os
import sys

import pytest

sys.path.insert(0, os.path.join(os.path.dirname(__file__), '..'))

from src.channel.ftr_model import average_snr
from src.utils.config import Config
from src.utils.errors import ConfigError
from src.utils.scenario_config import ScenarioConfig, db_to_linear, linear_to_db
from tests.scenarios import EXAMPLE_SCENARIO


def load_errors(text: str) -> list[str]:
    with pytest.raises(ConfigError) as excinfo:
        ScenarioConfig.loads(text, source="s.cfg")
    return excinfo.value.messages


class TestConfig:
    """Test Config.from_env and validate."""

    def test_defaults(self, isolated_env, monkeypatch):
        """Test defaults when nothing is set."""
        for name in ("FTRSEC_COEFF_CACHE", "FTRSEC_WORKERS", "FTRSEC_LOG_LEVEL", "FTRSEC_USE_REDIS"):
            monkeypatch.delenv(name, raising=False)
        config = Config.from_env()
        assert config.log_level == "INFO"
        assert config.workers == 1
        assert config.coefficient_cache == ".ftr_coefficients.json"
        assert not config.use_redis
        assert config.validate() == []

    def test_environment_overrides(self, isolated_env, monkeypatch):
        """Test FTRSEC_* variables are picked up."""
        monkeypatch.setenv("FTRSEC_WORKERS", "4")
        monkeypatch.setenv("FTRSEC_MC_BATCH", "5000")
        monkeypatch.setenv("FTRSEC_LOG_LEVEL", "debug")
        monkeypatch.setenv("FTRSEC_USE_REDIS", "yes")
        config = Config.from_env()
        assert config.workers == 4
        assert config.mc_batch == 5000
        assert config.log_level == "DEBUG"
        assert config.use_redis

    def test_invalid_values(self, isolated_env, monkeypatch):
        """Test malformed values are reported by validate."""
        monkeypatch.setenv("FTRSEC_WORKERS", "many")
        monkeypatch.setenv("FTRSEC_LOG_LEVEL", "LOUD")
        errors = Config.from_env().validate()
        assert any("FTRSEC_WORKERS" in e for e in errors)
        assert any("FTRSEC_LOG_LEVEL" in e for e in errors)

    def test_redis_requires_url(self):
        """Test Redis needs a URL."""
        errors = Config(use_redis=True, redis_url="").validate()
        assert errors == ["FTRSEC_REDIS_URL is required when FTRSEC_USE_REDIS is set"]


class TestScenarioLoading:
    """Test parsing of scenario files."""

    def test_example(self, scenario_file):
        """Test the example scenario loads with defaults filled in."""
        config = ScenarioConfig.load(scenario_file)
        assert config.main.m == 5.5
        assert config.eaves.avg_snr_db == 5.0
        assert config.rate_nats == pytest.approx(math.log(2.0))
        assert config.target_eps == 1e-5
        assert config.mc_samples == 20000
        assert config.mc_seed == 7
        assert config.validate() == []

    def test_average_snr_targets(self, scenario_file):
        """Test avg_snr_db fixes the received average SNR of each channel."""
        config = ScenarioConfig.load(scenario_file)
        scenario = config.scenario()
        assert linear_to_db(scenario.main.mean_snr) == pytest.approx(10.0, abs=1e-9)
        assert linear_to_db(scenario.eaves.mean_snr) == pytest.approx(5.0, abs=1e-9)
        assert config.avg_snr_db("main") == 10.0

    def test_sigma2_with_budget(self):
        """Test sigma2 passes through the link budget."""
        text = EXAMPLE_SCENARIO.replace("main.avg_snr_db = 10", "main.sigma2 = 0.5") + "budget.r = 2\nbudget.eta = 2\nbudget.r_los = 2\n"
        config = ScenarioConfig.loads(text)
        params = config.channel_params("main")
        assert params.sigma2 == 0.5
        assert config.scenario().main.mean_snr == pytest.approx(average_snr(params, config.link_budget()))
        assert config.avg_snr_db("main") == pytest.approx(linear_to_db(2 * 0.5 * 9.0 / 4.0))

    def test_dumps_round_trip(self, scenario_file):
        """Test loads(dumps()) reproduces the configuration."""
        config = ScenarioConfig.load(scenario_file)
        again = ScenarioConfig.loads(config.dumps())
        assert again == config
        assert again.dumps() == config.dumps()

    def test_missing_file(self, tmp_path):
        """Test an unreadable path raises ConfigError."""
        with pytest.raises(ConfigError):
            ScenarioConfig.load(tmp_path / "absent.cfg")

    def test_db_conversion(self):
        """Test dB helpers are inverse."""
        assert db_to_linear(10.0) == pytest.approx(10.0)
        assert linear_to_db(db_to_linear(3.7)) == pytest.approx(3.7)


class TestScenarioErrors:
    """Test errors carry file and line."""

    def test_out_of_domain_value(self):
        """Test a delta outside [0, 1] is reported on its line."""
        errors = load_errors(EXAMPLE_SCENARIO.replace("main.delta = 0.4", "main.delta = 1.4"))
        assert errors == ["s.cfg:4: main.delta must lie in [0, 1], got 1.4"]

    def test_unknown_key(self):
        """Test unknown keys are rejected with their line."""
        errors = load_errors(EXAMPLE_SCENARIO + "main.phase = 3\n")
        assert len(errors) == 1
        assert errors[0].startswith("s.cfg:")
        assert "unknown key 'main.phase'" in errors[0]

    def test_malformed_number(self):
        """Test a non-numeric value is reported once, on its line."""
        errors = load_errors(EXAMPLE_SCENARIO.replace("main.k = 8", "main.k = eight"))
        assert errors == ["s.cfg:3: main.k: malformed number 'eight'"]

    def test_malformed_power_key(self):
        """Test a malformed avg_snr_db still counts as the one power key."""
        errors = load_errors(EXAMPLE_SCENARIO.replace("eaves.avg_snr_db = 5", "eaves.avg_snr_db = five"))
        assert errors == ["s.cfg:10: eaves.avg_snr_db: malformed number 'five'"]

    def test_missing_value(self):
        """Test an empty value is not also reported as a missing key."""
        errors = load_errors(EXAMPLE_SCENARIO.replace("main.m = 5.5", "main.m ="))
        assert errors == ["s.cfg:2: missing value for 'main.m'"]

    def test_duplicate_key(self):
        """Test a repeated key is reported with the first line."""
        errors = load_errors(EXAMPLE_SCENARIO + "main.m = 2\n")
        assert "duplicate key 'main.m' (first set on line 2)" in errors[0]

    def test_both_power_keys(self):
        """Test sigma2 and avg_snr_db are mutually exclusive."""
        errors = load_errors(EXAMPLE_SCENARIO + "main.sigma2 = 1\n")
        assert any("exactly one of main.sigma2 or main.avg_snr_db" in e for e in errors)

    def test_neither_power_key(self):
        """Test one of sigma2 and avg_snr_db is required."""
        errors = load_errors(EXAMPLE_SCENARIO.replace("eaves.avg_snr_db = 5\n", ""))
        assert errors == ["s.cfg: exactly one of eaves.sigma2 or eaves.avg_snr_db must be set"]

    def test_missing_required(self):
        """Test a missing shape parameter is reported."""
        errors = load_errors(EXAMPLE_SCENARIO.replace("main.m = 5.5\n", ""))
        assert "s.cfg: missing required key main.m" in errors

    @pytest.mark.parametrize("value", ["1e-10", "2"])
    def test_target_eps_range(self, value):
        """Test target_eps outside [1e-9, 1] is rejected."""
        errors = load_errors(EXAMPLE_SCENARIO + f"numerics.target_eps = {value}\n")
        assert len(errors) == 1
        assert "numerics.target_eps must lie in" in errors[0]

    def test_bad_rate_unit(self):
        """Test unknown rate units are rejected."""
        errors = load_errors(EXAMPLE_SCENARIO.replace("rate.unit = bits", "rate.unit = dB"))
        assert len(errors) == 1
        assert "rate.unit must be one of nats, bits" in errors[0]

    def test_all_problems_reported(self):
        """Test several problems are collected in one error."""
        text = EXAMPLE_SCENARIO.replace("main.k = 8", "main.k = -1").replace("mc.samples = 20000", "mc.samples = 0")
        errors = load_errors(text)
        assert len(errors) == 2
