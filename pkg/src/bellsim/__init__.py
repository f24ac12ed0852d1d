"""bellsim - CHSH measurement-dependence analytic engine and Monte Carlo simulator."""

__version__ = "0.1.0"
__author__ = "bellsim developers"
__description__ = "Closed-form and simulated CHSH values for settings-correlated hidden-variable sources"

from .engine.analytic import beta_mixture, beta_printed, beta_q, beta_uniform, sweep_fig1
from .engine.audit import factorability_audit, no_signaling_audit, subensemble_report
from .engine.simulation import Tally, estimate, run_simulation, simulate_point
from .exceptions import BellSimError, ConfigurationError, InsufficientDataError
from .models import Angle, DeltaPair, GammaMixture, SettingsQuad, UniformOnCircle

__all__ = [
    "Angle",
    "BellSimError",
    "ConfigurationError",
    "DeltaPair",
    "GammaMixture",
    "InsufficientDataError",
    "SettingsQuad",
    "Tally",
    "UniformOnCircle",
    "beta_mixture",
    "beta_printed",
    "beta_q",
    "beta_uniform",
    "estimate",
    "factorability_audit",
    "no_signaling_audit",
    "run_simulation",
    "simulate_point",
    "subensemble_report",
    "sweep_fig1",
]
