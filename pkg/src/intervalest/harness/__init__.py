"""Monte Carlo verification harness driven by scenario files."""

from .scenario import Scenario, load_scenario, parse_scenario
from .signals import generate_signal
from .sampling import sample_trajectory
from .verify import Fault, VerificationReport, replay, verify

__all__ = [
    "Fault",
    "Scenario",
    "VerificationReport",
    "generate_signal",
    "load_scenario",
    "parse_scenario",
    "replay",
    "sample_trajectory",
    "verify",
]
