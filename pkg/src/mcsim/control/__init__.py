from .directives import Directive, NoChange, SetDuplicate, SetSplit, Switch, apply_directives, validate
from .madm import BENEFIT, COST, saw_rank, saw_scores, topsis_closeness, topsis_rank
from .measurement import LegView, MeasurementReport, NetworkView, crrm_update, drrm_measure
from .policies import (
    POLICIES,
    MadmPolicy,
    Policy,
    PolicyContext,
    RlPolicy,
    StaticPolicy,
    ThresholdPolicy,
    UtilityPolicy,
    make_policy,
)
from .qlearning import CheckpointError, QTable, load_checkpoint, q_select, q_update, save_checkpoint
from .qoe import FlowEpochStats, nearest_rank, qoe_score
from .tfc import TrafficFlowControl
