"""Evaluation of treatment benefit predictors with confounded data."""

from .core import (
    EmpiricalDistribution,
    OverlapError,
    Pop1Spec,
    SpecValidationError,
    build_empirical_distribution,
    eta_at,
    validate_pop1_spec,
)
from .metrics import (
    CurvePoints,
    GroupedBenefit,
    MetricReport,
    calibration_curve,
    cb_exact,
    cb_plug_in,
    gini_from_rcc,
    pairwise_maxlike_oracle,
    rcc,
)
from .populations import (
    Pop2Spec,
    Sample,
    make_pop1_tbp,
    reference_pop1_spec,
    pop1_joint_table,
    pop2_metrics,
    simulate,
)
from .bias import naive_metrics, pop1_bias, pop2_evaluation, sweep_bias
from .estimate import estimate_propensity, ipw_tau, outcome_regression_tau

__version__ = "0.1.0"
