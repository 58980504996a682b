"""Shared fixtures."""
import os
import sys

import pytest

sys.path.insert(0, os.path.join(os.path.dirname(__file__), '..'))

from src.channel.coefficient_store import MemoryCoefficientStore, set_default_store
from tests.scenarios import EXAMPLE_SCENARIO


@pytest.fixture(autouse=True)
def memory_store():
    """Fresh in-memory coefficient cache per test."""
    store = MemoryCoefficientStore()
    set_default_store(store)
    yield store
    set_default_store(None)


@pytest.fixture
def scenario_file(tmp_path):
    """Scenario file with both channels given by average SNR."""
    path = tmp_path / "scenario.cfg"
    path.write_text(EXAMPLE_SCENARIO, encoding="utf-8")
    return path


@pytest.fixture
def isolated_env(monkeypatch, tmp_path):
    """Runtime settings that keep the file cache and .env out of the repo."""
    monkeypatch.chdir(tmp_path)
    monkeypatch.setenv("FTRSEC_COEFF_CACHE", "")
    monkeypatch.setenv("FTRSEC_USE_REDIS", "false")
    monkeypatch.setenv("FTRSEC_WORKERS", "1")
    monkeypatch.setenv("FTRSEC_LOG_LEVEL", "WARNING")
    return tmp_path
