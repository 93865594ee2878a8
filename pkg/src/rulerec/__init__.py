"""Interpretable promotion-recommendation rules from logged conversion data.

The pipeline: estimate conversion probabilities from logged
(features, action, outcome) records, reweight the data so that standard
weighted 0/1 loss tracks conversion regret exactly, then grow a
leaf-budgeted decision tree whose leaves read as IF-THEN rules.
"""

from .core import (
    Classifier,
    ConstantPolicy,
    DataFormatError,
    DimensionMismatchError,
    History,
    HistoryRecord,
    InvalidClassifierError,
    InvalidInputError,
    LookupPolicy,
    MalformedDocumentError,
    MissingActionDataError,
    MissingRowError,
    NegativeWeightError,
    ProbTable,
    RegretRow,
    RegretTable,
    RulerecError,
    WeightedSet,
    optimal_action,
    optimal_actions,
    regret_loss,
    regret_row,
    regret_table,
    weighted_loss,
)
from .evaluation import (
    AlphaSweepConfig,
    ExperimentCurve,
    IdentityReport,
    RuleSweepConfig,
    bounds,
    conversion_rate,
    experiment_alpha,
    experiment_rule_count,
    verify_loss_identity,
)
from .prob_model import FitConfig, LogisticModel, OracleModel, fit
from .synth import SynthConfig, add_fictitious, generate
from .transform import (
    TransformConfig,
    min_shift,
    replicate,
    transform_benchmark,
    transform_naive,
    transform_proposed,
    weight_table,
    weights_for_row,
)
from .tree import RuleTree, best_split, extract_rules, train, weighted_gini

__version__ = "0.1.0"
