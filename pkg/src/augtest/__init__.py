"""Prediction-assisted independence testing of discrete distributions."""

from .domain import (
    DomainError,
    JointDistribution,
    JointSampler,
    ProductDomain,
    Rng,
    SampleAccount,
    distribution_from_json,
    distribution_to_json,
    draw_samples,
    l2_norm_sq,
    load_distribution,
    marginal,
    merge_axes,
    merge_index,
    poisson,
    product_of_marginals,
    save_distribution,
    split_axis,
    split_index,
    tv_distance,
    tv_to_own_product,
)
from .flattening import (
    AxisFlattening,
    ProductFlattening,
    build_axis_flattening,
    flatten_distribution_explicit,
    flatten_sample,
    flatten_samples,
    flattened_axis_view,
    flattened_joint_view,
    flattened_product_view,
)
from .estimators import (
    EstimatorConfig,
    VectorSampler,
    closeness_params,
    closeness_test,
    empirical_tv_to_product,
    estimate_l2_squared,
    learn_empirical,
    repetitions,
)
from .testers import (
    GroupedSampler,
    Outcome,
    PermutedSampler,
    ProjectedSampler,
    TesterConfig,
    TesterHooks,
    Verdict,
    amplify,
    aug_independence_2d,
    aug_independence_3d,
    aug_independence_d,
    partition_coordinates,
    test_independence_by_learning,
)
from .hard_instances import (
    HardInstance,
    ValidityReport,
    embed_hard_to_d,
    gen_hard_2d,
    gen_valid_hard_2d,
    poissonized_counts,
    rank_one_gap,
    validity_check,
)
from .bench import (
    ExperimentConfig,
    TrialRecord,
    emit_report,
    emit_sweep,
    run_trials,
    summarize,
    sweep_alpha,
    wilson_interval,
)

__version__ = "0.1.0"
