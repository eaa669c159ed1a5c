"""Stacked regression ensembles with CV-partition selection."""

from .data import (
    CvPartition,
    DataError,
    Dataset,
    FoldAssignment,
    derive_partition,
    load_dataset,
    make_folds,
    split_train_test,
)
from .evaluation import (
    DatasetRow,
    EvalReport,
    MetricError,
    NmseValue,
    WilcoxonResult,
    build_report,
    nmse,
    oracle_best,
    wilcoxon_signed_rank,
)
from .experiment import ConfigError, ExperimentConfig, run_dataset
from .level0 import (
    LEARNERS,
    Basis,
    FitError,
    Learner,
    LearnerConfigs,
    RbfConfig,
    RidgeConfig,
    fit_constant,
    fit_learner,
    fit_rbf,
    fit_ridge,
    kmeans,
)
from .level2 import (
    GammaWeights,
    Level2Ensemble,
    expand_gamma,
    fit_level2_all_at_once,
    fit_level2_two_step,
    predict_level2,
)
from .selection import (
    DecisionMatrix,
    Rule,
    SelectionResult,
    algorithm_s,
    build_decision_matrix,
    error_correlations,
    find_best_ar,
    med_rule,
)
from .stacking import (
    MEMBER_SETS,
    Level1Data,
    Level1Ensemble,
    SimplexWeights,
    cv_level1_data,
    fit_level1,
    predict_level1,
    solve_simplex_ls,
)

__version__ = "0.1.0"
