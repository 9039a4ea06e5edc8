"""Linear non-Gaussian causal discovery, backdoor adjustment and refutation."""

from .discovery import DiscoveryConfig, DiscoveryResult, direct_lingam, pairwise_direction, rcd_discover
from .errors import (
    ConfigError,
    DataError,
    DegenerateError,
    IdentificationError,
    LingamKitError,
    NumericError,
    PreconditionError,
)
from .estimation import (
    EffectEstimate,
    RefutationResult,
    estimate_ate,
    refute_data_subset,
    refute_placebo,
    refute_random_common_cause,
)
from .graph import CausalGraph, d_separated, minimal_backdoor_sets, satisfies_backdoor
from .regression import LassoConfig, adaptive_lasso, cv_best_alpha, lasso, residualize
from .selection import ImportanceRanking, inject_probes, probe_cutoff, rank_features
from .sem import SemSpec, generate, random_spec
from .stats_tests import independence_test, residual_independence_matrix, shapiro_wilk
from .tabular import EncodingPlan, NumericMatrix, Table, encode, impute, load_csv, standardize

__version__ = "0.1.0"
