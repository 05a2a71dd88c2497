"""Discrete-event simulator of a multi-connectivity RAN with a centralized PDCP."""

from .engine import Simulator
from .harness import export_metrics, load_scenario, run_simulation

__version__ = "0.1.0"
