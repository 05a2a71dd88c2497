from .metrics import CSV_COLUMNS, FlowMetrics, LegMetrics, MetricsReport, RunMeta, export_metrics, to_csv
from .scenario import (
    DanglingReferenceError,
    DuplicateIdError,
    MissingFieldError,
    NonPositiveDurationError,
    Scenario,
    ScenarioError,
    load_scenario,
    parse_scenario,
)
from .simulation import Simulation, run_simulation
from .training import train_rl
