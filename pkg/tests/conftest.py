"""Shared fixtures for the bellsim test suite."""

import math

import pytest

from bellsim import config
from bellsim.models import GammaMixture, SettingsQuad


@pytest.fixture(autouse=True)
def clean_settings(monkeypatch):
    """Isolate every test from BELLSIM_* variables and the settings singleton."""
    for name in ("BELLSIM_SEED", "BELLSIM_LOG_LEVEL", "BELLSIM_MAX_WORKERS"):
        monkeypatch.delenv(name, raising=False)
    config.reset_settings()
    yield
    config.reset_settings()


@pytest.fixture
def tsirelson_quad():
    """The one-parameter quadruple at θ = 5π/4, where β_q = 2√2."""
    return SettingsQuad.from_theta(5.0 * math.pi / 4.0)


@pytest.fixture
def mixture_08():
    return GammaMixture(gamma=0.8)


@pytest.fixture
def run_config_data():
    """A minimal valid run configuration document."""
    return {
        "theta": 5.0 * math.pi / 4.0,
        "gamma": 0.8,
        "source": "gamma_mixture",
        "events": 20000,
        "seed": 42,
    }
